#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "geolm/common/io.hpp"

namespace geolm::signal {

// The eight instruction-tuning task families.
enum class Task {
  kExplanation,
  kNamedEntityRecognition,
  kReasoning,
  kFactVerification,
  kSummarization,
  kTextClassification,
  kWordSemantics,
  kQuestionAnswering,
};

inline constexpr std::array<Task, 8> kAllTasks = {
    Task::kNamedEntityRecognition, Task::kReasoning,          Task::kFactVerification,
    Task::kSummarization,          Task::kTextClassification, Task::kWordSemantics,
    Task::kExplanation,            Task::kQuestionAnswering,
};

std::string_view to_string(Task t);
Task parse_task(std::string_view s);
// Human-readable row label, e.g. "Named Entity Recognition".
std::string_view display_name(Task t);

struct PaperContent {  // g1
  std::string title;
  std::string abstract_text;
  std::optional<std::string> fulltext;
};
struct CategoryLabel {  // g2
  std::string subject_text;
  std::string label;
  std::string label_set_id;
};
struct ReferencePair {  // g3
  std::string citing_context;
  std::string cited_title;
};
struct CaptionRecord {  // g4
  enum class Kind { kFigure, kTable };
  Kind caption_kind = Kind::kFigure;
  std::string caption;
  std::string surrounding_mention;
};
struct EntityMentions {  // g5
  std::string paragraph;
  std::vector<std::string> entities;
};
struct RelationRecord {  // g6
  std::string concept_a;
  std::string concept_b;
  std::string paragraph_a;
  std::string paragraph_b;
  bool relation_exists = false;
};
struct WordDescription {  // g7
  std::string term;
  std::string definition;
};
struct TaxonomyRecord {  // g8
  std::string term;
  std::vector<std::string> synonyms;
  std::vector<std::string> hypernyms;
  std::vector<std::string> hyponyms;
};
struct QAPair {  // g9
  std::string question;
  std::string answer;
};
struct FactStatement {  // g10
  std::string statement;
  bool is_true = true;
};
struct KeyValueRecord {  // g10, structured-website form
  std::string entity_name;
  std::vector<std::pair<std::string, std::string>> pairs;
};

using SignalPayload = std::variant<PaperContent, CategoryLabel, ReferencePair, CaptionRecord, EntityMentions,
                                   RelationRecord, WordDescription, TaxonomyRecord, QAPair, FactStatement,
                                   KeyValueRecord>;

struct SourceRecord {
  std::string id;
  SignalPayload payload;
};

// "g1".."g10" or "kv".
std::string_view signal_kind(const SignalPayload& p);

SourceRecord source_record_from_json(const Json& j);
Json source_record_to_json(const SourceRecord& r);

struct Provenance {
  std::string source_kind;
  std::string source_id;
};

struct InstructionRecord {
  Task task = Task::kQuestionAnswering;
  std::string instruction;
  std::string input;
  std::string output;
  Provenance provenance;
};

Json instruction_to_json(const InstructionRecord& r);
InstructionRecord instruction_from_json(const Json& j);

// Per-task schema check; returns the list of problems (empty when valid).
std::vector<std::string> validate_instruction(const InstructionRecord& r);

}  // namespace geolm::signal
