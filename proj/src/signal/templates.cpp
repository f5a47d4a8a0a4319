#include "geolm/signal/templates.hpp"

#include <array>

#include "geolm/common/error.hpp"
#include "geolm/common/hash.hpp"

namespace geolm::signal {

namespace {

constexpr std::array<Family, 9> kFamilies = {
    Family::kExplanation,     Family::kNer,
    Family::kReasoning,       Family::kFactVerification,
    Family::kSummarizeTitle,  Family::kSummarizeReference,
    Family::kClassification,  Family::kWordSemantics,
    Family::kQaCaption,
};

constexpr std::size_t kMinTemplatesPerFamily = 3;

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kExplanation: return "explanation";
    case Family::kNer: return "ner";
    case Family::kReasoning: return "reasoning";
    case Family::kFactVerification: return "fact_verification";
    case Family::kSummarizeTitle: return "summarize_title";
    case Family::kSummarizeReference: return "summarize_reference";
    case Family::kClassification: return "text_classification";
    case Family::kWordSemantics: return "word_semantics";
    case Family::kQaCaption: return "qa_caption";
  }
  return "";
}

Family parse_family(std::string_view s) {
  for (Family f : kFamilies) {
    if (to_string(f) == s) return f;
  }
  throw Error(ErrorCode::kFormat, "unknown template family '" + std::string(s) + "'");
}

const std::set<std::string>& family_slots(Family f) {
  static const std::set<std::string> kNone;
  static const std::set<std::string> kTerm = {"term"};
  static const std::set<std::string> kConcepts = {"concept_a", "concept_b"};
  static const std::set<std::string> kLabels = {"labels"};
  static const std::set<std::string> kRelation = {"term", "relation"};
  static const std::set<std::string> kKind = {"kind"};
  switch (f) {
    case Family::kExplanation: return kTerm;
    case Family::kReasoning: return kConcepts;
    case Family::kClassification: return kLabels;
    case Family::kWordSemantics: return kRelation;
    case Family::kQaCaption: return kKind;
    default: return kNone;
  }
}

std::set<std::string> slot_names(std::string_view tmpl) {
  std::set<std::string> names;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
    const auto close = tmpl.find('}', pos);
    if (close == std::string_view::npos) break;
    names.emplace(tmpl.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return names;
}

std::string render_slots(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size() + 64);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::string name(tmpl.substr(open + 1, close - open - 1));
    auto it = slots.find(name);
    if (it == slots.end()) throw Error(ErrorCode::kInvalidArgument, "template slot {" + name + "} not provided");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

TemplateSet TemplateSet::builtin(std::uint64_t seed) {
  TemplateSet t;
  t.seed_ = seed;
  t.families_[Family::kExplanation] = {
      {"What is {term} in geoscience?", std::string()},
      {"Explain the following geoscience term.", std::string("{term}")},
      {"Give the definition of the geoscience term {term}.", std::string()},
      {"Describe what the following term means in geoscience.", std::string("{term}")},
  };
  t.families_[Family::kNer] = {
      {"Extract the geoscience entities mentioned in the following paragraph.", std::nullopt},
      {"List the key geoscience concepts that appear in the text below, in order of appearance.", std::nullopt},
      {"Identify the named entities in this geoscience passage.", std::nullopt},
  };
  t.families_[Family::kReasoning] = {
      {"Based on the two paragraphs, is there a relation between {concept_a} and {concept_b}? Answer Yes or No.",
       std::nullopt},
      {"Do {concept_a} and {concept_b} have a meaningful relation in geoscience? Answer Yes or No.", std::nullopt},
      {"Read the paragraphs and decide whether {concept_a} is related to {concept_b}. Answer Yes or No.",
       std::nullopt},
  };
  t.families_[Family::kFactVerification] = {
      {"Is the following statement true or false? Answer True or False.", std::nullopt},
      {"Verify the following geoscience fact. Answer True or False.", std::nullopt},
      {"Decide whether this statement is correct. Answer True or False.", std::nullopt},
  };
  t.families_[Family::kSummarizeTitle] = {
      {"Generate a title for the following abstract.", std::nullopt},
      {"Write a suitable paper title for this abstract.", std::nullopt},
      {"What would be a good title for a paper with the following abstract?", std::nullopt},
  };
  t.families_[Family::kSummarizeReference] = {
      {"Summarize the work described in the following citing context in one sentence.", std::nullopt},
      {"Which paper is being described here? Give its one-sentence summary.", std::nullopt},
      {"Give a one-sentence summary of the referenced work.", std::nullopt},
  };
  t.families_[Family::kClassification] = {
      {"Classify the following text into one of these categories: {labels}.", std::nullopt},
      {"Which of the following fields does this text belong to? Options: {labels}.", std::nullopt},
      {"Assign a category to the text. Choose from: {labels}.", std::nullopt},
  };
  t.families_[Family::kWordSemantics] = {
      {"List the {relation} of the geoscience term.", std::nullopt},
      {"What are the {relation} of {term}?", std::nullopt},
      {"Give the {relation} for the following term.", std::nullopt},
  };
  t.families_[Family::kQaCaption] = {
      {"Explain the marked {kind} caption in the context of its source article.", std::nullopt},
      {"What does the source article say about the following {kind}?", std::nullopt},
      {"Describe the content of the {kind} with this caption.", std::nullopt},
  };
  t.label_sets_["dde18"] = {
      "Geology",      "Geophysics",        "Geochemistry", "Paleontology",       "Mineralogy",     "Petrology",
      "Sedimentology", "Stratigraphy",     "Structural Geology", "Hydrology",    "Oceanography",   "Atmospheric Science",
      "Geography",    "Geodesy",           "Seismology",   "Volcanology",        "Glaciology",     "Soil Science",
  };
  t.label_sets_["dict8"] = {
      "Geology", "Geography", "Geophysics", "Geochemistry", "Mineralogy", "Paleontology", "Oceanography", "Meteorology",
  };
  return t;
}

TemplateSet TemplateSet::from_json(const Json& j) {
  TemplateSet t;
  try {
    t.version_ = j.value("version", std::string("v1"));
    t.seed_ = j.value("seed", std::uint64_t{0});
    for (const auto& [name, list] : j.at("families").items()) {
      std::vector<InstructionTemplate> templates;
      for (const auto& e : list) {
        InstructionTemplate it;
        if (e.is_string()) {
          it.instruction = e.get<std::string>();
        } else {
          it.instruction = e.at("instruction").get<std::string>();
          if (e.contains("input") && !e["input"].is_null()) it.input = e["input"].get<std::string>();
        }
        templates.push_back(std::move(it));
      }
      t.families_[parse_family(name)] = std::move(templates);
    }
    if (j.contains("label_sets")) {
      for (const auto& [id, labels] : j["label_sets"].items()) {
        t.label_sets_[id] = labels.get<std::vector<std::string>>();
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("template set: ") + e.what());
  }
  t.validate();
  return t;
}

TemplateSet TemplateSet::load(const std::string& path) { return from_json(Json::parse(read_file(path))); }

Json TemplateSet::to_json() const {
  Json j;
  j["version"] = version_;
  j["seed"] = seed_;
  j["families"] = Json::object();
  for (const auto& [f, list] : families_) {
    Json arr = Json::array();
    for (const auto& it : list) {
      Json e;
      e["instruction"] = it.instruction;
      if (it.input) e["input"] = *it.input;
      arr.push_back(std::move(e));
    }
    j["families"][std::string(to_string(f))] = std::move(arr);
  }
  j["label_sets"] = Json::object();
  for (const auto& [id, labels] : label_sets_) j["label_sets"][id] = labels;
  return j;
}

const InstructionTemplate& TemplateSet::pick(Family f, std::string_view record_id) const {
  auto it = families_.find(f);
  if (it == families_.end() || it->second.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no templates for family " + std::string(to_string(f)));
  }
  const std::string key = std::string(to_string(f)) + ":" + std::string(record_id);
  const std::uint64_t h = mix64(seed_, fnv1a64(key));
  return it->second[h % it->second.size()];
}

const std::vector<std::string>* TemplateSet::label_set(std::string_view id) const {
  auto it = label_sets_.find(id);
  return it == label_sets_.end() ? nullptr : &it->second;
}

void TemplateSet::add_label_set(std::string id, std::vector<std::string> labels) {
  label_sets_[std::move(id)] = std::move(labels);
}

void TemplateSet::set_family(Family f, std::vector<InstructionTemplate> templates) {
  families_[f] = std::move(templates);
}

void TemplateSet::validate() const {
  for (Family f : kFamilies) {
    auto it = families_.find(f);
    if (it == families_.end() || it->second.size() < kMinTemplatesPerFamily) {
      throw Error(ErrorCode::kInvalidArgument, "family " + std::string(to_string(f)) + " needs at least " +
                                                   std::to_string(kMinTemplatesPerFamily) + " templates");
    }
    const auto& allowed = family_slots(f);
    for (const auto& t : it->second) {
      auto check = [&](const std::string& text) {
        for (const auto& s : slot_names(text)) {
          if (!allowed.count(s)) {
            throw Error(ErrorCode::kInvalidArgument,
                        "template '" + text + "' uses slot {" + s + "} not provided for " + std::string(to_string(f)));
          }
        }
      };
      check(t.instruction);
      if (t.input) {
        if (f != Family::kExplanation) {
          throw Error(ErrorCode::kInvalidArgument, "input override only allowed for explanation templates");
        }
        check(*t.input);
      }
      if (f == Family::kWordSemantics && !slot_names(t.instruction).count("relation")) {
        throw Error(ErrorCode::kInvalidArgument, "word_semantics templates must name {relation}");
      }
    }
  }
}

}  // namespace geolm::signal
