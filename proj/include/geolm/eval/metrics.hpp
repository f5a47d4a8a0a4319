#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geolm/common/io.hpp"
#include "geolm/eval/bench.hpp"
#include "geolm/eval/scorer.hpp"

namespace geolm::eval {

struct ChoiceScore {
  std::vector<std::pair<std::string, double>> probs;  // label order
  std::string predicted;
};

// Softmax over the given label log-probabilities (computed in double); the
// prediction is the highest probability, earliest label on ties.
ChoiceScore choice_softmax(const std::vector<std::pair<std::string, double>>& label_logprobs);

// Scores each label as the single token following format_choice_prompt(item)
// plus one space. Throws kMultiTokenLabel if a label is not one token.
ChoiceScore score_choices(Scorer& scorer, const ObjectiveItem& item);

struct ItemResult {
  std::string id;
  Subset subset = Subset::kCustom;
  std::string answer;
  std::string predicted;
  bool correct = false;
  std::vector<std::pair<std::string, double>> probs;
};

struct SubsetScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct SubjectiveResult {
  std::string id;
  std::string generated;
  double perplexity = 0.0;
  double gptscore = 0.0;
};

struct EvalReport {
  std::map<std::string, SubsetScore> subsets;  // keyed by subset name
  SubsetScore overall;
  std::vector<ItemResult> items;
  std::vector<SubjectiveResult> subjective;
  Json metadata = Json::object();

  Json to_json() const;
};

// Throws kInvalidArgument on an empty item list.
EvalReport accuracy(Scorer& scorer, std::span<const ObjectiveItem> items, Json metadata = Json::object());

// exp(mean NLL) of every token of `text` after the first. Throws kTooShort
// below two tokens.
double perplexity(Scorer& scorer, std::string_view text);

// Mean log-probability of `generated` given `instruction`. Throws kTooShort
// when `generated` is empty.
double gptscore(Scorer& scorer, std::string_view instruction, std::string_view generated);

// Greedy answer from `generator`, scored by `evaluator`. An empty generation
// gets NaN scores rather than an error.
SubjectiveResult evaluate_subjective(Scorer& generator, Scorer& evaluator, const SubjectiveItem& item, int max_new);

struct CurvePoint {
  std::uint64_t step = 0;
  std::map<std::string, SubsetScore> subsets;
  SubsetScore overall;
};

struct CurveReport {
  std::vector<CurvePoint> points;  // ascending step

  std::string to_csv() const;
  Json to_json() const;
};

struct CurveInput {
  std::uint64_t step = 0;
  Scorer* scorer = nullptr;
};

// Needs at least two checkpoints; throws kDuplicateStep on repeated steps.
CurveReport checkpoint_curve(std::vector<CurveInput> checkpoints, std::span<const ObjectiveItem> items);

struct AblationRow {
  std::string arm;
  std::map<std::string, SubsetScore> subsets;
  SubsetScore overall;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // sorted by arm name

  Json to_json() const;
  std::string to_markdown() const;
};

AblationTable ablation_matrix(const std::map<std::string, Scorer*>& arms, std::span<const ObjectiveItem> items);

// Manually entered panel scores, each on a 1..3 scale.
struct HumanEvalEntry {
  std::string item_id;
  std::string rater;
  int rationality = 0;
  int correctness = 0;
  int consistency = 0;
};

void validate_human_eval(const HumanEvalEntry& e);
HumanEvalEntry human_eval_from_json(const Json& j);
Json human_eval_to_json(const HumanEvalEntry& e);
// Per-criterion means over the entries.
Json summarize_human_eval(std::span<const HumanEvalEntry> entries);

}  // namespace geolm::eval
