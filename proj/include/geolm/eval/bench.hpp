#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geolm/common/io.hpp"

namespace geolm::eval {

inline constexpr std::string_view kPromptVersion = "v1";

enum class Subset { kNpee, kAptest, kCustom };
std::string_view to_string(Subset s);
Subset parse_subset(std::string_view s);

struct ObjectiveItem {
  std::string id;
  std::string question;
  std::vector<std::pair<std::string, std::string>> choices;  // label -> text, in label order
  std::string answer;
  Subset subset = Subset::kCustom;

  // Throws kInvalidArgument unless labels run A, B, ... (2 to 5 of them) and
  // the answer is one of them.
  void validate() const;
};

enum class SubjectiveKind { kFillBlank, kWordExplanation, kEssay };
std::string_view to_string(SubjectiveKind k);
SubjectiveKind parse_subjective_kind(std::string_view s);

struct SubjectiveItem {
  std::string id;
  std::string question;
  std::string reference_answer;
  SubjectiveKind kind = SubjectiveKind::kEssay;

  void validate() const;
};

Json objective_to_json(const ObjectiveItem& item);
ObjectiveItem objective_from_json(const Json& j);
Json subjective_to_json(const SubjectiveItem& item);
SubjectiveItem subjective_from_json(const Json& j);

std::vector<ObjectiveItem> load_objective(const std::string& path);
std::vector<SubjectiveItem> load_subjective(const std::string& path);

// "{question}\nChoose from:\nA. ...\nB. ...\nThe answer is:"
std::string format_choice_prompt(const ObjectiveItem& item);

}  // namespace geolm::eval
