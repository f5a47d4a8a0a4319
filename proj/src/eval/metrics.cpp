#include "geolm/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "geolm/common/error.hpp"

namespace geolm::eval {

ChoiceScore choice_softmax(const std::vector<std::pair<std::string, double>>& label_logprobs) {
  if (label_logprobs.empty()) throw Error(ErrorCode::kInvalidArgument, "no labels to score");
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& [label, lp] : label_logprobs) mx = std::max(mx, lp);
  std::vector<double> w;
  double sum = 0.0;
  for (const auto& [label, lp] : label_logprobs) {
    w.push_back(std::exp(lp - mx));
    sum += w.back();
  }
  ChoiceScore out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < label_logprobs.size(); ++i) {
    out.probs.emplace_back(label_logprobs[i].first, w[i] / sum);
    const bool earlier = label_logprobs[i].first < label_logprobs[best].first;
    if (w[i] > w[best] || (w[i] == w[best] && earlier)) best = i;
  }
  out.predicted = label_logprobs[best].first;
  return out;
}

ChoiceScore score_choices(Scorer& scorer, const ObjectiveItem& item) {
  const std::string text = format_choice_prompt(item) + " ";
  std::vector<std::pair<std::string, double>> lps;
  for (const auto& [label, unused] : item.choices) {
    const auto lp = scorer.token_logprobs(text, label);
    if (lp.size() != 1) {
      throw Error(ErrorCode::kMultiTokenLabel, "label '" + label + "' is " + std::to_string(lp.size()) + " tokens");
    }
    lps.emplace_back(label, lp[0]);
  }
  return choice_softmax(lps);
}

namespace {

void tally(std::map<std::string, SubsetScore>& subsets, SubsetScore& overall, Subset s, bool correct) {
  auto& sub = subsets[std::string(to_string(s))];
  ++sub.total;
  ++overall.total;
  if (correct) {
    ++sub.correct;
    ++overall.correct;
  }
}

Json score_json(const SubsetScore& s) {
  return Json{{"correct", s.correct}, {"total", s.total}, {"accuracy", s.accuracy()}};
}

Json subsets_json(const std::map<std::string, SubsetScore>& subsets) {
  Json j = Json::object();
  for (const auto& [name, s] : subsets) j[name] = score_json(s);
  return j;
}

}  // namespace

Json EvalReport::to_json() const {
  Json items_json = Json::array();
  for (const auto& it : items) {
    Json probs = Json::object();
    for (const auto& [label, p] : it.probs) probs[label] = p;
    items_json.push_back({{"id", it.id},
                          {"subset", std::string(to_string(it.subset))},
                          {"answer", it.answer},
                          {"predicted", it.predicted},
                          {"correct", it.correct},
                          {"probs", probs}});
  }
  Json subj = Json::array();
  for (const auto& s : subjective) {
    subj.push_back({{"id", s.id},
                    {"generated", s.generated},
                    {"perplexity", std::isfinite(s.perplexity) ? Json(s.perplexity) : Json(nullptr)},
                    {"gptscore", std::isfinite(s.gptscore) ? Json(s.gptscore) : Json(nullptr)}});
  }
  return Json{{"metadata", metadata},
              {"overall", score_json(overall)},
              {"subsets", subsets_json(subsets)},
              {"items", items_json},
              {"subjective", subj}};
}

EvalReport accuracy(Scorer& scorer, std::span<const ObjectiveItem> items, Json metadata) {
  if (items.empty()) throw Error(ErrorCode::kInvalidArgument, "no benchmark items");
  EvalReport rep;
  rep.metadata = std::move(metadata);
  rep.metadata["scorer"] = scorer.id();
  rep.metadata["prompt_version"] = std::string(kPromptVersion);
  for (const auto& item : items) {
    const auto cs = score_choices(scorer, item);
    ItemResult r{item.id, item.subset, item.answer, cs.predicted, cs.predicted == item.answer, cs.probs};
    tally(rep.subsets, rep.overall, item.subset, r.correct);
    rep.items.push_back(std::move(r));
  }
  return rep;
}

double perplexity(Scorer& scorer, std::string_view text) {
  const auto lps = scorer.token_logprobs("", text);
  if (lps.size() < 2) throw Error(ErrorCode::kTooShort, "perplexity needs at least two tokens");
  double nll = 0.0;
  for (std::size_t i = 1; i < lps.size(); ++i) nll -= lps[i];
  return std::exp(nll / static_cast<double>(lps.size() - 1));
}

double gptscore(Scorer& scorer, std::string_view instruction, std::string_view generated) {
  const auto lps = scorer.token_logprobs(instruction, generated);
  if (lps.empty()) throw Error(ErrorCode::kTooShort, "gptscore needs a nonempty generation");
  double sum = 0.0;
  for (double lp : lps) sum += lp;
  return sum / static_cast<double>(lps.size());
}

SubjectiveResult evaluate_subjective(Scorer& generator, Scorer& evaluator, const SubjectiveItem& item, int max_new) {
  SubjectiveResult r;
  r.id = item.id;
  r.generated = generator.generate(item.question, max_new);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    r.perplexity = perplexity(evaluator, r.generated);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kTooShort) throw;
    r.perplexity = nan;
  }
  try {
    r.gptscore = gptscore(evaluator, item.question, r.generated);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kTooShort) throw;
    r.gptscore = nan;
  }
  return r;
}

std::string CurveReport::to_csv() const {
  std::set<std::string> names;
  for (const auto& p : points) {
    for (const auto& [n, s] : p.subsets) names.insert(n);
  }
  std::ostringstream os;
  os.precision(9);
  os << "step,accuracy";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (const auto& p : points) {
    os << p.step << ',' << p.overall.accuracy();
    for (const auto& n : names) {
      auto it = p.subsets.find(n);
      os << ',';
      if (it != p.subsets.end()) os << it->second.accuracy();
    }
    os << '\n';
  }
  return os.str();
}

Json CurveReport::to_json() const {
  Json steps = Json::array();
  Json acc = Json::array();
  Json subs = Json::object();
  for (const auto& p : points) {
    steps.push_back(p.step);
    acc.push_back(p.overall.accuracy());
    for (const auto& [n, s] : p.subsets) {
      if (!subs.contains(n)) subs[n] = Json::array();
    }
  }
  for (auto& [n, arr] : subs.items()) {
    for (const auto& p : points) {
      auto it = p.subsets.find(n);
      arr.push_back(it == p.subsets.end() ? Json(nullptr) : Json(it->second.accuracy()));
    }
  }
  return Json{{"steps", steps}, {"accuracy", acc}, {"subsets", subs}};
}

CurveReport checkpoint_curve(std::vector<CurveInput> checkpoints, std::span<const ObjectiveItem> items) {
  if (checkpoints.size() < 2) throw Error(ErrorCode::kInvalidArgument, "a curve needs at least two checkpoints");
  std::sort(checkpoints.begin(), checkpoints.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    if (checkpoints[i].step == checkpoints[i - 1].step) {
      throw Error(ErrorCode::kDuplicateStep, "step " + std::to_string(checkpoints[i].step) + " appears twice");
    }
  }
  CurveReport out;
  for (const auto& c : checkpoints) {
    const auto rep = accuracy(*c.scorer, items);
    out.points.push_back({c.step, rep.subsets, rep.overall});
  }
  return out;
}

Json AblationTable::to_json() const {
  Json rows_json = Json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"arm", r.arm}, {"overall", score_json(r.overall)}, {"subsets", subsets_json(r.subsets)}});
  }
  return rows_json;
}

std::string AblationTable::to_markdown() const {
  std::set<std::string> names;
  for (const auto& r : rows) {
    for (const auto& [n, s] : r.subsets) names.insert(n);
  }
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "| arm | overall |";
  for (const auto& n : names) os << ' ' << n << " |";
  os << "\n| --- | --- |";
  for (std::size_t i = 0; i < names.size(); ++i) os << " --- |";
  os << '\n';
  for (const auto& r : rows) {
    os << "| " << r.arm << " | " << r.overall.accuracy() << " |";
    for (const auto& n : names) {
      auto it = r.subsets.find(n);
      os << ' ';
      if (it != r.subsets.end()) os << it->second.accuracy();
      os << " |";
    }
    os << '\n';
  }
  return os.str();
}

AblationTable ablation_matrix(const std::map<std::string, Scorer*>& arms, std::span<const ObjectiveItem> items) {
  if (arms.empty()) throw Error(ErrorCode::kInvalidArgument, "ablation needs at least one arm");
  AblationTable t;
  for (const auto& [name, scorer] : arms) {
    const auto rep = accuracy(*scorer, items);
    t.rows.push_back({name, rep.subsets, rep.overall});
  }
  return t;
}

void validate_human_eval(const HumanEvalEntry& e) {
  if (e.item_id.empty()) throw Error(ErrorCode::kInvalidArgument, "human eval entry without item_id");
  for (int v : {e.rationality, e.correctness, e.consistency}) {
    if (v < 1 || v > 3) throw Error(ErrorCode::kInvalidArgument, "human eval scores must be 1, 2 or 3");
  }
}

HumanEvalEntry human_eval_from_json(const Json& j) {
  HumanEvalEntry e;
  e.item_id = j.at("item_id").get<std::string>();
  e.rater = j.value("rater", std::string());
  e.rationality = j.at("rationality").get<int>();
  e.correctness = j.at("correctness").get<int>();
  e.consistency = j.at("consistency").get<int>();
  validate_human_eval(e);
  return e;
}

Json human_eval_to_json(const HumanEvalEntry& e) {
  return Json{{"item_id", e.item_id},
              {"rater", e.rater},
              {"rationality", e.rationality},
              {"correctness", e.correctness},
              {"consistency", e.consistency}};
}

Json summarize_human_eval(std::span<const HumanEvalEntry> entries) {
  double r = 0, c = 0, k = 0;
  for (const auto& e : entries) {
    validate_human_eval(e);
    r += e.rationality;
    c += e.correctness;
    k += e.consistency;
  }
  const double n = static_cast<double>(entries.size());
  if (entries.empty()) return Json{{"count", 0}};
  return Json{{"count", entries.size()}, {"rationality", r / n}, {"correctness", c / n}, {"consistency", k / n}};
}

}  // namespace geolm::eval
