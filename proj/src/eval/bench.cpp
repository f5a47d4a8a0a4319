#include "geolm/eval/bench.hpp"

#include <algorithm>

#include "geolm/common/error.hpp"

namespace geolm::eval {

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::kNpee: return "npee";
    case Subset::kAptest: return "aptest";
    case Subset::kCustom: return "custom";
  }
  return "custom";
}

Subset parse_subset(std::string_view s) {
  if (s == "npee") return Subset::kNpee;
  if (s == "aptest") return Subset::kAptest;
  if (s == "custom") return Subset::kCustom;
  throw Error(ErrorCode::kInvalidArgument, "unknown subset '" + std::string(s) + "'");
}

std::string_view to_string(SubjectiveKind k) {
  switch (k) {
    case SubjectiveKind::kFillBlank: return "fill_blank";
    case SubjectiveKind::kWordExplanation: return "word_explanation";
    case SubjectiveKind::kEssay: return "essay";
  }
  return "essay";
}

SubjectiveKind parse_subjective_kind(std::string_view s) {
  if (s == "fill_blank") return SubjectiveKind::kFillBlank;
  if (s == "word_explanation") return SubjectiveKind::kWordExplanation;
  if (s == "essay") return SubjectiveKind::kEssay;
  throw Error(ErrorCode::kInvalidArgument, "unknown subjective kind '" + std::string(s) + "'");
}

void ObjectiveItem::validate() const {
  const auto fail = [&](const std::string& why) { return Error(ErrorCode::kInvalidArgument, "item '" + id + "': " + why); };
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "item id is empty");
  if (question.empty()) throw fail("question is empty");
  if (choices.size() < 2 || choices.size() > 5) throw fail("needs 2 to 5 choices");
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (choices[i].first != std::string(1, static_cast<char>('A' + i))) throw fail("choice labels must run A, B, ...");
  }
  const bool known = std::any_of(choices.begin(), choices.end(), [&](const auto& c) { return c.first == answer; });
  if (!known) throw fail("answer '" + answer + "' is not a choice label");
}

void SubjectiveItem::validate() const {
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "item id is empty");
  if (question.empty() || reference_answer.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "item '" + id + "': question and reference_answer must be nonempty");
  }
}

Json objective_to_json(const ObjectiveItem& item) {
  Json choices = Json::object();
  for (const auto& [label, text] : item.choices) choices[label] = text;
  return Json{{"id", item.id},
              {"question", item.question},
              {"choices", choices},
              {"answer", item.answer},
              {"subset", std::string(to_string(item.subset))}};
}

ObjectiveItem objective_from_json(const Json& j) {
  ObjectiveItem item;
  item.id = j.at("id").get<std::string>();
  item.question = j.at("question").get<std::string>();
  for (const auto& [label, text] : j.at("choices").items()) item.choices.emplace_back(label, text.get<std::string>());
  std::sort(item.choices.begin(), item.choices.end());
  item.answer = j.at("answer").get<std::string>();
  item.subset = parse_subset(j.value("subset", std::string("custom")));
  item.validate();
  return item;
}

Json subjective_to_json(const SubjectiveItem& item) {
  return Json{{"id", item.id},
              {"question", item.question},
              {"reference_answer", item.reference_answer},
              {"kind", std::string(to_string(item.kind))}};
}

SubjectiveItem subjective_from_json(const Json& j) {
  SubjectiveItem item;
  item.id = j.at("id").get<std::string>();
  item.question = j.at("question").get<std::string>();
  item.reference_answer = j.at("reference_answer").get<std::string>();
  item.kind = parse_subjective_kind(j.value("kind", std::string("essay")));
  item.validate();
  return item;
}

namespace {

template <typename Item, typename Parse>
std::vector<Item> load_items(const std::string& path, Parse parse) {
  std::vector<Item> out;
  for_each_jsonl(path, [&](std::size_t line, const Json& j) {
    try {
      out.push_back(parse(j));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kFormat, path + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace

std::vector<ObjectiveItem> load_objective(const std::string& path) {
  return load_items<ObjectiveItem>(path, objective_from_json);
}

std::vector<SubjectiveItem> load_subjective(const std::string& path) {
  return load_items<SubjectiveItem>(path, subjective_from_json);
}

std::string format_choice_prompt(const ObjectiveItem& item) {
  std::string out = item.question;
  out += "\nChoose from:\n";
  for (const auto& [label, text] : item.choices) {
    out += label;
    out += ". ";
    out += text;
    out += '\n';
  }
  out += "The answer is:";
  return out;
}

}  // namespace geolm::eval
