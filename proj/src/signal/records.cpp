#include "geolm/signal/records.hpp"

#include "geolm/common/error.hpp"

namespace geolm::signal {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::kExplanation: return "explanation";
    case Task::kNamedEntityRecognition: return "ner";
    case Task::kReasoning: return "reasoning";
    case Task::kFactVerification: return "fact_verification";
    case Task::kSummarization: return "summarization";
    case Task::kTextClassification: return "text_classification";
    case Task::kWordSemantics: return "word_semantics";
    case Task::kQuestionAnswering: return "question_answering";
  }
  return "question_answering";
}

Task parse_task(std::string_view s) {
  for (Task t : kAllTasks) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::kFormat, "unknown task '" + std::string(s) + "'");
}

std::string_view display_name(Task t) {
  switch (t) {
    case Task::kExplanation: return "Explanation";
    case Task::kNamedEntityRecognition: return "Named Entity Recognition";
    case Task::kReasoning: return "Reasoning";
    case Task::kFactVerification: return "Fact Verification";
    case Task::kSummarization: return "Summarization";
    case Task::kTextClassification: return "Text Classification";
    case Task::kWordSemantics: return "Word Semantics";
    case Task::kQuestionAnswering: return "Question Answering";
  }
  return "";
}

std::string_view signal_kind(const SignalPayload& p) {
  static constexpr std::array<std::string_view, 11> kKinds = {"g1", "g2", "g3", "g4", "g5", "g6",
                                                               "g7", "g8", "g9", "g10", "kv"};
  return kKinds[p.index()];
}

namespace {

std::string str(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::kFormat, std::string("missing field '") + key + "'");
  return j.at(key).get<std::string>();
}

std::vector<std::string> str_list(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace

SourceRecord source_record_from_json(const Json& j) {
  SourceRecord r;
  try {
    r.id = str(j, "id");
    const auto kind = str(j, "signal");
    if (kind == "g1") {
      PaperContent p{str(j, "title"), str(j, "abstract"), std::nullopt};
      if (j.contains("fulltext") && !j["fulltext"].is_null()) p.fulltext = j["fulltext"].get<std::string>();
      r.payload = std::move(p);
    } else if (kind == "g2") {
      r.payload = CategoryLabel{str(j, "subject_text"), str(j, "label"), str(j, "label_set_id")};
    } else if (kind == "g3") {
      r.payload = ReferencePair{str(j, "citing_context"), str(j, "cited_title")};
    } else if (kind == "g4") {
      const auto ck = str(j, "caption_kind");
      if (ck != "figure" && ck != "table") throw Error(ErrorCode::kFormat, "caption_kind must be figure|table");
      r.payload = CaptionRecord{ck == "figure" ? CaptionRecord::Kind::kFigure : CaptionRecord::Kind::kTable,
                                str(j, "caption"), str(j, "surrounding_mention")};
    } else if (kind == "g5") {
      r.payload = EntityMentions{str(j, "paragraph"), str_list(j, "entities")};
    } else if (kind == "g6") {
      r.payload = RelationRecord{str(j, "concept_a"), str(j, "concept_b"), str(j, "paragraph_a"),
                                 str(j, "paragraph_b"), j.at("relation_exists").get<bool>()};
    } else if (kind == "g7") {
      r.payload = WordDescription{str(j, "term"), str(j, "definition")};
    } else if (kind == "g8") {
      r.payload = TaxonomyRecord{str(j, "term"), str_list(j, "synonyms"), str_list(j, "hypernyms"),
                                 str_list(j, "hyponyms")};
    } else if (kind == "g9") {
      r.payload = QAPair{str(j, "question"), str(j, "answer")};
    } else if (kind == "g10") {
      r.payload = FactStatement{str(j, "statement"), j.at("is_true").get<bool>()};
    } else if (kind == "kv") {
      KeyValueRecord kv{str(j, "entity_name"), {}};
      for (const auto& p : j.at("pairs")) {
        kv.pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      }
      r.payload = std::move(kv);
    } else {
      throw Error(ErrorCode::kUnknownSignal, "unknown signal '" + kind + "'");
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("signal record: ") + e.what());
  }
  return r;
}

Json source_record_to_json(const SourceRecord& r) {
  Json j;
  j["id"] = r.id;
  j["signal"] = std::string(signal_kind(r.payload));
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, PaperContent>) {
          j["title"] = p.title;
          j["abstract"] = p.abstract_text;
          if (p.fulltext) j["fulltext"] = *p.fulltext;
        } else if constexpr (std::is_same_v<P, CategoryLabel>) {
          j["subject_text"] = p.subject_text;
          j["label"] = p.label;
          j["label_set_id"] = p.label_set_id;
        } else if constexpr (std::is_same_v<P, ReferencePair>) {
          j["citing_context"] = p.citing_context;
          j["cited_title"] = p.cited_title;
        } else if constexpr (std::is_same_v<P, CaptionRecord>) {
          j["caption_kind"] = p.caption_kind == CaptionRecord::Kind::kFigure ? "figure" : "table";
          j["caption"] = p.caption;
          j["surrounding_mention"] = p.surrounding_mention;
        } else if constexpr (std::is_same_v<P, EntityMentions>) {
          j["paragraph"] = p.paragraph;
          j["entities"] = p.entities;
        } else if constexpr (std::is_same_v<P, RelationRecord>) {
          j["concept_a"] = p.concept_a;
          j["concept_b"] = p.concept_b;
          j["paragraph_a"] = p.paragraph_a;
          j["paragraph_b"] = p.paragraph_b;
          j["relation_exists"] = p.relation_exists;
        } else if constexpr (std::is_same_v<P, WordDescription>) {
          j["term"] = p.term;
          j["definition"] = p.definition;
        } else if constexpr (std::is_same_v<P, TaxonomyRecord>) {
          j["term"] = p.term;
          j["synonyms"] = p.synonyms;
          j["hypernyms"] = p.hypernyms;
          j["hyponyms"] = p.hyponyms;
        } else if constexpr (std::is_same_v<P, QAPair>) {
          j["question"] = p.question;
          j["answer"] = p.answer;
        } else if constexpr (std::is_same_v<P, FactStatement>) {
          j["statement"] = p.statement;
          j["is_true"] = p.is_true;
        } else {
          j["entity_name"] = p.entity_name;
          j["pairs"] = Json::array();
          for (const auto& [k, v] : p.pairs) j["pairs"].push_back(Json::array({k, v}));
        }
      },
      r.payload);
  return j;
}

Json instruction_to_json(const InstructionRecord& r) {
  Json j;
  j["task"] = std::string(to_string(r.task));
  j["instruction"] = r.instruction;
  j["input"] = r.input;
  j["output"] = r.output;
  j["provenance"] = {{"source_kind", r.provenance.source_kind}, {"source_id", r.provenance.source_id}};
  return j;
}

InstructionRecord instruction_from_json(const Json& j) {
  InstructionRecord r;
  try {
    r.task = parse_task(j.at("task").get<std::string>());
    r.instruction = j.at("instruction").get<std::string>();
    r.input = j.value("input", std::string());
    r.output = j.at("output").get<std::string>();
    if (j.contains("provenance")) {
      r.provenance.source_kind = j["provenance"].value("source_kind", std::string());
      r.provenance.source_id = j["provenance"].value("source_id", std::string());
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("instruction record: ") + e.what());
  }
  return r;
}

std::vector<std::string> validate_instruction(const InstructionRecord& r) {
  std::vector<std::string> problems;
  auto require = [&](bool ok, const char* what) {
    if (!ok) problems.emplace_back(what);
  };
  require(!r.instruction.empty(), "instruction empty");
  require(!r.output.empty(), "output empty");
  require(!r.provenance.source_kind.empty(), "provenance.source_kind empty");
  require(!r.provenance.source_id.empty(), "provenance.source_id empty");
  switch (r.task) {
    case Task::kExplanation:
      require(r.provenance.source_kind == "g7", "explanation must come from g7");
      break;
    case Task::kNamedEntityRecognition:
      require(!r.input.empty(), "ner input empty");
      require(r.provenance.source_kind == "g5", "ner must come from g5");
      break;
    case Task::kReasoning:
      require(r.output == "Yes" || r.output == "No", "reasoning output must be Yes|No");
      require(!r.input.empty(), "reasoning input empty");
      require(r.provenance.source_kind == "g6", "reasoning must come from g6");
      break;
    case Task::kFactVerification:
      require(r.output == "True" || r.output == "False", "fact verification output must be True|False");
      require(!r.input.empty(), "fact verification input empty");
      require(r.provenance.source_kind == "g10", "fact verification must come from g10");
      break;
    case Task::kSummarization:
      require(!r.input.empty(), "summarization input empty");
      require(r.provenance.source_kind == "g1" || r.provenance.source_kind == "g3",
              "summarization must come from g1|g3");
      break;
    case Task::kTextClassification:
      require(!r.input.empty(), "classification input empty");
      require(r.provenance.source_kind == "g2", "classification must come from g2");
      break;
    case Task::kWordSemantics:
      require(!r.input.empty(), "word semantics input empty");
      require(r.provenance.source_kind == "g8", "word semantics must come from g8");
      break;
    case Task::kQuestionAnswering:
      require(r.provenance.source_kind == "g9" || r.provenance.source_kind == "kv" ||
                  r.provenance.source_kind == "g4",
              "question answering must come from g9|kv|g4");
      break;
  }
  return problems;
}

}  // namespace geolm::signal
