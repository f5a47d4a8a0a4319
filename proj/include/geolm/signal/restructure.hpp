#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "geolm/common/error.hpp"
#include "geolm/signal/records.hpp"
#include "geolm/signal/templates.hpp"

namespace geolm::signal {

// Single-edit negation: inserts "not" after the first copula or auxiliary
// (is/are/was/were/can), rewrites has/have to "does not have"/"do not have"
// and does/do to "does not"/"do not". A copula already followed by "not"
// loses the "not" instead. Throws Error(kNoNegationSite) otherwise.
std::string negate_statement(std::string_view statement);

InstructionRecord restructure_explanation(const std::string& id, const WordDescription& r, const TemplateSet& t);
InstructionRecord restructure_ner(const std::string& id, const EntityMentions& r, const TemplateSet& t);
InstructionRecord restructure_reasoning(const std::string& id, const RelationRecord& r, const TemplateSet& t);

// When the statement cannot be negated, only the original is emitted and the
// reason is written to `negation_failure` (if given).
std::vector<InstructionRecord> restructure_fact_verification(const std::string& id, const FactStatement& r,
                                                             const TemplateSet& t,
                                                             std::string* negation_failure = nullptr);

InstructionRecord restructure_summarization(const std::string& id, const PaperContent& r, const TemplateSet& t);
InstructionRecord restructure_summarization(const std::string& id, const ReferencePair& r, const TemplateSet& t);
InstructionRecord restructure_classification(const std::string& id, const CategoryLabel& r, const TemplateSet& t);
std::vector<InstructionRecord> restructure_word_semantics(const std::string& id, const TaxonomyRecord& r,
                                                          const TemplateSet& t);
std::vector<InstructionRecord> restructure_qa(const std::string& id, const QAPair& r, const TemplateSet& t);
std::vector<InstructionRecord> restructure_qa(const std::string& id, const KeyValueRecord& r, const TemplateSet& t);
std::vector<InstructionRecord> restructure_qa(const std::string& id, const CaptionRecord& r, const TemplateSet& t);

struct Reject {
  std::string source_id;
  std::string signal;
  ErrorCode reason;
  std::string detail;
};

Json reject_to_json(const Reject& r);

struct ForgeOutput {
  std::vector<InstructionRecord> records;
  std::vector<Reject> rejects;
};

// Routes each source record to its restructurer. Precondition failures go to
// `rejects`; nothing is fatal.
ForgeOutput forge(const std::vector<SourceRecord>& sources, const TemplateSet& t);

}  // namespace geolm::signal
