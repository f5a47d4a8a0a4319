#include "geolm/signal/restructure.hpp"

#include <algorithm>
#include <cctype>

#include "geolm/doc/normalize.hpp"

namespace geolm::signal {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string require(std::string_view value, const char* field) {
  std::string v = trim(value);
  if (v.empty()) throw Error(ErrorCode::kEmptyField, std::string(field) + " is empty");
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

InstructionRecord make(Task task, std::string instruction, std::string input, std::string output,
                       std::string_view kind, const std::string& id) {
  InstructionRecord r;
  r.task = task;
  r.instruction = std::move(instruction);
  r.input = std::move(input);
  r.output = std::move(output);
  r.provenance = {std::string(kind), id};
  return r;
}

}  // namespace

InstructionRecord restructure_explanation(const std::string& id, const WordDescription& r, const TemplateSet& t) {
  const std::string term = require(r.term, "term");
  const std::string definition = require(r.definition, "definition");
  const auto& tmpl = t.pick(Family::kExplanation, id);
  const std::map<std::string, std::string> slots = {{"term", term}};
  return make(Task::kExplanation, render_slots(tmpl.instruction, slots),
              tmpl.input ? render_slots(*tmpl.input, slots) : std::string(), definition, "g7", id);
}

InstructionRecord restructure_ner(const std::string& id, const EntityMentions& r, const TemplateSet& t) {
  const std::string paragraph = require(r.paragraph, "paragraph");
  if (r.entities.empty()) throw Error(ErrorCode::kEmptyField, "entities is empty");
  const std::string haystack = lower(paragraph);

  struct Hit {
    std::size_t pos;
    std::size_t order;
    std::string entity;
  };
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < r.entities.size(); ++i) {
    const std::string entity = require(r.entities[i], "entity");
    if (std::any_of(hits.begin(), hits.end(), [&](const Hit& h) { return h.entity == entity; })) continue;
    const auto pos = haystack.find(lower(entity));
    if (pos == std::string::npos) {
      throw Error(ErrorCode::kEntityNotInParagraph, "entity '" + entity + "' not found in paragraph");
    }
    hits.push_back({pos, i, entity});
  }
  std::sort(hits.begin(), hits.end(),
            [](const Hit& a, const Hit& b) { return a.pos != b.pos ? a.pos < b.pos : a.order < b.order; });
  std::vector<std::string> ordered;
  for (auto& h : hits) ordered.push_back(std::move(h.entity));

  const auto& tmpl = t.pick(Family::kNer, id);
  return make(Task::kNamedEntityRecognition, render_slots(tmpl.instruction, {}), paragraph, join(ordered, ", "), "g5",
              id);
}

InstructionRecord restructure_reasoning(const std::string& id, const RelationRecord& r, const TemplateSet& t) {
  const std::string a = require(r.concept_a, "concept_a");
  const std::string b = require(r.concept_b, "concept_b");
  const std::string pa = require(r.paragraph_a, "paragraph_a");
  const std::string pb = require(r.paragraph_b, "paragraph_b");
  if (a == b) throw Error(ErrorCode::kConceptsNotDistinct, "concept_a equals concept_b ('" + a + "')");
  const auto& tmpl = t.pick(Family::kReasoning, id);
  std::string input = "Concept A: " + a + "\nConcept B: " + b + "\n\nParagraph A:\n" + pa + "\n\nParagraph B:\n" + pb;
  return make(Task::kReasoning, render_slots(tmpl.instruction, {{"concept_a", a}, {"concept_b", b}}),
              std::move(input), r.relation_exists ? "Yes" : "No", "g6", id);
}

std::vector<InstructionRecord> restructure_fact_verification(const std::string& id, const FactStatement& r,
                                                             const TemplateSet& t, std::string* negation_failure) {
  const std::string statement = require(r.statement, "statement");
  const auto& tmpl = t.pick(Family::kFactVerification, id);
  const std::string instruction = render_slots(tmpl.instruction, {});
  const char* original_label = r.is_true ? "True" : "False";
  const char* twin_label = r.is_true ? "False" : "True";

  std::vector<InstructionRecord> out;
  out.push_back(make(Task::kFactVerification, instruction, statement, original_label, "g10", id));
  try {
    out.push_back(make(Task::kFactVerification, instruction, negate_statement(statement), twin_label, "g10", id));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoNegationSite) throw;
    if (negation_failure) *negation_failure = e.what();
  }
  return out;
}

InstructionRecord restructure_summarization(const std::string& id, const PaperContent& r, const TemplateSet& t) {
  const std::string title = require(r.title, "title");
  const std::string abstract_text = require(r.abstract_text, "abstract");
  const auto& tmpl = t.pick(Family::kSummarizeTitle, id);
  return make(Task::kSummarization, render_slots(tmpl.instruction, {}), abstract_text, title, "g1", id);
}

InstructionRecord restructure_summarization(const std::string& id, const ReferencePair& r, const TemplateSet& t) {
  const std::string context = require(r.citing_context, "citing_context");
  const std::string title = require(r.cited_title, "cited_title");
  const auto& tmpl = t.pick(Family::kSummarizeReference, id);
  return make(Task::kSummarization, render_slots(tmpl.instruction, {}), context, title, "g3", id);
}

InstructionRecord restructure_classification(const std::string& id, const CategoryLabel& r, const TemplateSet& t) {
  const std::string subject = require(r.subject_text, "subject_text");
  const std::string label = require(r.label, "label");
  const auto* labels = t.label_set(r.label_set_id);
  if (!labels) throw Error(ErrorCode::kUnknownLabel, "unknown label set '" + r.label_set_id + "'");
  if (std::find(labels->begin(), labels->end(), label) == labels->end()) {
    throw Error(ErrorCode::kUnknownLabel, "label '" + label + "' not in set '" + r.label_set_id + "'");
  }
  const auto& tmpl = t.pick(Family::kClassification, id);
  return make(Task::kTextClassification, render_slots(tmpl.instruction, {{"labels", join(*labels, ", ")}}), subject,
              label, "g2", id);
}

std::vector<InstructionRecord> restructure_word_semantics(const std::string& id, const TaxonomyRecord& r,
                                                          const TemplateSet& t) {
  const std::string term = require(r.term, "term");
  const std::pair<const char*, const std::vector<std::string>*> relations[] = {
      {"synonyms", &r.synonyms}, {"hypernyms", &r.hypernyms}, {"hyponyms", &r.hyponyms}};
  const auto& tmpl = t.pick(Family::kWordSemantics, id);
  std::vector<InstructionRecord> out;
  for (const auto& [relation, list] : relations) {
    std::vector<std::string> items;
    for (const auto& s : *list) {
      std::string v = trim(s);
      if (!v.empty()) items.push_back(std::move(v));
    }
    if (items.empty()) continue;
    out.push_back(make(Task::kWordSemantics, render_slots(tmpl.instruction, {{"term", term}, {"relation", relation}}),
                       term, join(items, ", "), "g8", id));
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyField, "no synonyms, hypernyms or hyponyms for '" + term + "'");
  return out;
}

std::vector<InstructionRecord> restructure_qa(const std::string& id, const QAPair& r, const TemplateSet&) {
  return {make(Task::kQuestionAnswering, require(r.question, "question"), "", require(r.answer, "answer"), "g9", id)};
}

std::vector<InstructionRecord> restructure_qa(const std::string& id, const KeyValueRecord& r, const TemplateSet&) {
  const std::string entity = require(r.entity_name, "entity_name");
  if (r.pairs.empty()) throw Error(ErrorCode::kEmptyField, "pairs is empty");
  std::vector<InstructionRecord> out;
  for (const auto& [k, v] : r.pairs) {
    const std::string key = require(k, "key");
    const std::string value = require(v, "value");
    out.push_back(make(Task::kQuestionAnswering, "What is the " + key + " of " + entity + "?", "", value, "kv", id));
  }
  return out;
}

std::vector<InstructionRecord> restructure_qa(const std::string& id, const CaptionRecord& r, const TemplateSet& t) {
  const std::string caption = require(doc::strip_reserved_literals(r.caption), "caption");
  const std::string mention = require(r.surrounding_mention, "surrounding_mention");
  const bool figure = r.caption_kind == CaptionRecord::Kind::kFigure;
  const auto& tmpl = t.pick(Family::kQaCaption, id);
  return {make(Task::kQuestionAnswering, render_slots(tmpl.instruction, {{"kind", figure ? "figure" : "table"}}),
               doc::wrap_marker(figure ? doc::MarkerKind::kFigure : doc::MarkerKind::kTable, caption), mention, "g4",
               id)};
}

Json reject_to_json(const Reject& r) {
  Json j;
  j["source_id"] = r.source_id;
  j["signal"] = r.signal;
  j["reason"] = std::string(to_string(r.reason));
  j["detail"] = r.detail;
  return j;
}

ForgeOutput forge(const std::vector<SourceRecord>& sources, const TemplateSet& t) {
  ForgeOutput out;
  auto emit = [&](InstructionRecord r) { out.records.push_back(std::move(r)); };
  auto emit_all = [&](std::vector<InstructionRecord> rs) {
    for (auto& r : rs) out.records.push_back(std::move(r));
  };
  for (const auto& src : sources) {
    const std::string kind(signal_kind(src.payload));
    try {
      std::visit(
          [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, PaperContent> || std::is_same_v<P, ReferencePair>) {
              emit(restructure_summarization(src.id, p, t));
            } else if constexpr (std::is_same_v<P, CategoryLabel>) {
              emit(restructure_classification(src.id, p, t));
            } else if constexpr (std::is_same_v<P, EntityMentions>) {
              emit(restructure_ner(src.id, p, t));
            } else if constexpr (std::is_same_v<P, RelationRecord>) {
              emit(restructure_reasoning(src.id, p, t));
            } else if constexpr (std::is_same_v<P, WordDescription>) {
              emit(restructure_explanation(src.id, p, t));
            } else if constexpr (std::is_same_v<P, TaxonomyRecord>) {
              emit_all(restructure_word_semantics(src.id, p, t));
            } else if constexpr (std::is_same_v<P, FactStatement>) {
              std::string failure;
              emit_all(restructure_fact_verification(src.id, p, t, &failure));
              if (!failure.empty()) out.rejects.push_back({src.id, kind, ErrorCode::kNoNegationSite, failure});
            } else {
              emit_all(restructure_qa(src.id, p, t));
            }
          },
          src.payload);
    } catch (const Error& e) {
      out.rejects.push_back({src.id, kind, e.code(), e.what()});
    }
  }
  return out;
}

}  // namespace geolm::signal
