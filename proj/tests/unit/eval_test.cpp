#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "../support/fake_scorer.hpp"
#include "geolm/common/rng.hpp"
#include "geolm/eval/metrics.hpp"
#include "geolm/lm/transformer.hpp"
#include "test_util.hpp"

namespace geolm::eval {
namespace {

using testing::FakeScorer;

ObjectiveItem moho() {
  ObjectiveItem it;
  it.id = "moho";
  it.question = "The interface between crust and mantle is called:";
  it.choices = {{"A", "Gutenberg"}, {"B", "Conrad"}, {"C", "Moho"}};
  it.answer = "C";
  it.subset = Subset::kNpee;
  return it;
}

// Rigs the label token: logprob table indexed by the label letter.
FakeScorer label_scorer(std::map<std::string, double> table) {
  return FakeScorer([table](std::string_view, std::string_view cont, std::size_t) {
    auto it = table.find(std::string(cont));
    return it == table.end() ? -50.0 : it->second;
  });
}

double prob_of(const ChoiceScore& s, const std::string& label) {
  for (const auto& [l, p] : s.probs) {
    if (l == label) return p;
  }
  return -1;
}

std::vector<ObjectiveItem> synthetic_items(std::size_t n, std::uint64_t seed, int choices = 4) {
  SplitMix64 rng(seed);
  std::vector<ObjectiveItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    ObjectiveItem it;
    it.id = "syn-" + std::to_string(i);
    it.question = "Synthetic question " + std::to_string(i) + " about strata?";
    for (int c = 0; c < choices; ++c) {
      it.choices.emplace_back(std::string(1, static_cast<char>('A' + c)), "option " + std::to_string(rng.below(1000)));
    }
    it.answer = std::string(1, static_cast<char>('A' + rng.below(static_cast<std::uint64_t>(choices))));
    it.subset = i % 2 ? Subset::kAptest : Subset::kNpee;
    out.push_back(std::move(it));
  }
  return out;
}

TEST(Prompt, MohoLayout) {
  const auto p = format_choice_prompt(moho());
  EXPECT_EQ(p,
            "The interface between crust and mantle is called:\nChoose from:\nA. Gutenberg\nB. Conrad\nC. Moho\n"
            "The answer is:");
  EXPECT_EQ(p, format_choice_prompt(moho()));
  auto two = moho();
  two.choices.resize(2);
  two.answer = "A";
  const auto q = format_choice_prompt(two);
  EXPECT_EQ(std::count(q.begin(), q.end(), '\n'), 4);
  EXPECT_EQ(q.find("C. "), std::string::npos);
}

TEST(Items, ValidationAndJson) {
  auto it = moho();
  EXPECT_NO_THROW(it.validate());
  EXPECT_EQ(objective_to_json(objective_from_json(objective_to_json(it))), objective_to_json(it));
  it.answer = "D";
  EXPECT_GEOLM_ERROR(it.validate(), ErrorCode::kInvalidArgument);
  it = moho();
  it.choices = {{"A", "x"}, {"C", "y"}};
  it.answer = "A";
  EXPECT_GEOLM_ERROR(it.validate(), ErrorCode::kInvalidArgument);
  it.choices = {{"A", "x"}};
  EXPECT_GEOLM_ERROR(it.validate(), ErrorCode::kInvalidArgument);

  SubjectiveItem s{"s1", "What is a fault?", "A fracture.", SubjectiveKind::kWordExplanation};
  EXPECT_EQ(subjective_to_json(subjective_from_json(subjective_to_json(s))), subjective_to_json(s));
  s.reference_answer.clear();
  EXPECT_GEOLM_ERROR(s.validate(), ErrorCode::kInvalidArgument);

  EXPECT_EQ(load_objective(testing::fixture("bench_objective.jsonl")).size(), 40u);
  EXPECT_EQ(load_subjective(testing::fixture("bench_subjective.jsonl")).size(), 6u);
}

TEST(Softmax, HandComputedValues) {
  const auto s = choice_softmax({{"A", -1}, {"B", -2}, {"C", -3}});
  // Oracle: e^-k / (e^-1 + e^-2 + e^-3).
  const double z = std::exp(-1) + std::exp(-2) + std::exp(-3);
  EXPECT_NEAR(prob_of(s, "A"), std::exp(-1) / z, 1e-12);
  EXPECT_NEAR(prob_of(s, "B"), std::exp(-2) / z, 1e-12);
  EXPECT_NEAR(prob_of(s, "C"), std::exp(-3) / z, 1e-12);
  EXPECT_NEAR(prob_of(s, "A"), 0.6652, 1e-4);
  EXPECT_NEAR(prob_of(s, "B"), 0.2447, 1e-4);
  EXPECT_NEAR(prob_of(s, "C"), 0.0900, 1e-4);
  EXPECT_EQ(s.predicted, "A");
}

TEST(Softmax, EqualAndTies) {
  const auto eq = choice_softmax({{"A", -4}, {"B", -4}, {"C", -4}});
  for (const auto& [l, p] : eq.probs) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(eq.predicted, "A");
  EXPECT_EQ(choice_softmax({{"A", -9}, {"B", -2}, {"C", -2}}).predicted, "B");
}

TEST(Softmax, ShiftInvarianceAndArgmaxScaling) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::pair<std::string, double>> lps;
    const auto n = 2 + rng.below(4);
    for (std::uint64_t i = 0; i < n; ++i) lps.emplace_back(std::string(1, 'A' + i), rng.uniform(-30, 0));
    const auto base = choice_softmax(lps);
    double sum = 0;
    for (const auto& [l, p] : base.probs) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);

    const double shift = rng.uniform(-500, 500);
    auto shifted = lps;
    for (auto& [l, v] : shifted) v += shift;
    const auto s = choice_softmax(shifted);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(s.probs[i].second, base.probs[i].second, 1e-9);
    EXPECT_EQ(s.predicted, base.predicted);

    const double k = rng.uniform(0.01, 50);
    auto scaled = lps;
    for (auto& [l, v] : scaled) v *= k;
    EXPECT_EQ(choice_softmax(scaled).predicted, base.predicted);
  }
}

TEST(ScoreChoices, UsesLetterAfterPromptAndSpace) {
  std::string seen_text;
  FakeScorer s([&](std::string_view text, std::string_view cont, std::size_t) {
    seen_text = std::string(text);
    return cont == "C" ? -0.1 : -3.0;
  });
  const auto cs = score_choices(s, moho());
  EXPECT_EQ(seen_text, format_choice_prompt(moho()) + " ");
  EXPECT_EQ(cs.predicted, "C");
  EXPECT_EQ(s.calls.load(), 3);
  auto rigged = label_scorer({{"A", -1}, {"B", -2}, {"C", -3}});
  EXPECT_NEAR(prob_of(score_choices(rigged, moho()), "B"), 0.2447, 1e-4);
}

TEST(ScoreChoices, MultiTokenLabel) {
  FakeScorer two_tokens([](std::string_view, std::string_view, std::size_t) { return -1.0; });
  auto item = moho();
  item.choices[0].first = "AA";
  EXPECT_GEOLM_ERROR(score_choices(two_tokens, item), ErrorCode::kMultiTokenLabel);
}

TEST(Accuracy, RiggedScorers) {
  const auto items = synthetic_items(60, 4);
  FakeScorer oracle([&](std::string_view text, std::string_view cont, std::size_t) {
    for (const auto& it : items) {
      if (text.find(it.question) != std::string_view::npos) return cont == it.answer ? -0.5 : -5.0;
    }
    return -9.0;
  });
  const auto perfect = accuracy(oracle, items, Json{{"seed", 1}});
  EXPECT_EQ(perfect.overall.correct, 60u);
  EXPECT_DOUBLE_EQ(perfect.overall.accuracy(), 1.0);
  EXPECT_EQ(perfect.metadata.at("scorer"), "fake");
  EXPECT_EQ(perfect.metadata.at("prompt_version"), "v1");
  EXPECT_EQ(perfect.metadata.at("seed"), 1);
  EXPECT_EQ(perfect.subsets.at("npee").total, 30u);
  EXPECT_EQ(perfect.subsets.at("aptest").total, 30u);

  auto all_b = items;
  for (auto& it : all_b) it.answer = "B";
  auto favour_a = label_scorer({{"A", -0.1}});
  const auto zero = accuracy(favour_a, all_b);
  EXPECT_EQ(zero.overall.correct, 0u);
  EXPECT_DOUBLE_EQ(zero.overall.accuracy(), 0.0);

  EXPECT_GEOLM_ERROR(accuracy(oracle, std::span<const ObjectiveItem>{}), ErrorCode::kInvalidArgument);
}

TEST(Accuracy, RandomScorerWithinBinomialBand) {
  const auto items = synthetic_items(1000, 5);
  auto rnd = testing::hashed_scorer(17);
  const double acc = accuracy(rnd, items).overall.accuracy();
  const double sigma = std::sqrt(0.25 * 0.75 / 1000.0);
  EXPECT_NEAR(acc, 0.25, 3 * sigma);
}

TEST(Accuracy, PermutationInvariantAndExactFraction) {
  auto items = synthetic_items(50, 6, 3);
  auto rnd = testing::hashed_scorer(2);
  const auto a = accuracy(rnd, items);
  SplitMix64 rng(8);
  seeded_shuffle(items, rng);
  const auto b = accuracy(rnd, items);
  EXPECT_EQ(a.overall.correct, b.overall.correct);
  EXPECT_EQ(a.to_json().at("overall"), b.to_json().at("overall"));
  EXPECT_EQ(a.overall.accuracy(), static_cast<double>(a.overall.correct) / 50.0);
}

TEST(Perplexity, AnalyticCases) {
  auto uni = testing::uniform_scorer();
  for (const char* text : {"ab", "quartz veins", "a much longer text about metamorphic facies"}) {
    EXPECT_NEAR(perplexity(uni, text), 268.0, 1e-6) << text;
  }
  FakeScorer sure([](std::string_view, std::string_view, std::size_t) { return 0.0; });
  EXPECT_DOUBLE_EQ(perplexity(sure, "granite"), 1.0);
  FakeScorer half([](std::string_view, std::string_view, std::size_t i) { return i == 0 ? -7.0 : std::log(0.5); });
  EXPECT_NEAR(perplexity(half, "ab"), 2.0, 1e-12);
  EXPECT_GEOLM_ERROR(perplexity(uni, "a"), ErrorCode::kTooShort);
  EXPECT_GEOLM_ERROR(perplexity(uni, ""), ErrorCode::kTooShort);
}

TEST(GptScore, AnalyticCases) {
  FakeScorer e1([](std::string_view, std::string_view, std::size_t) { return -1.0; });
  EXPECT_DOUBLE_EQ(gptscore(e1, "Explain.", "some answer"), -1.0);
  FakeScorer pair([](std::string_view, std::string_view, std::size_t i) { return std::log(i == 0 ? 0.5 : 0.25); });
  EXPECT_NEAR(gptscore(pair, "Q", "xy"), (std::log(0.5) + std::log(0.25)) / 2, 1e-12);
  EXPECT_NEAR(gptscore(pair, "Q", "xy"), -1.0397, 1e-4);
  EXPECT_GEOLM_ERROR(gptscore(e1, "Q", ""), ErrorCode::kTooShort);
}

TEST(GptScore, ConsistentWithModelLoss) {
  lm::ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.context_len = 64;
  const auto ck = lm::init_checkpoint(cfg, 19);
  LocalScorer scorer(ck);
  const std::string instruction = "Describe gneiss.";
  const std::string generated = "banded rock";
  lm::TokenSequence tokens{lm::ByteTokenizer::kBos};
  const auto a = lm::ByteTokenizer::encode(instruction);
  const auto b = lm::ByteTokenizer::encode(generated);
  tokens.insert(tokens.end(), a.begin(), a.end());
  tokens.insert(tokens.end(), b.begin(), b.end());
  std::vector<std::uint8_t> mask(tokens.size(), 0);
  for (std::size_t i = tokens.size() - b.size(); i < tokens.size(); ++i) mask[i] = 1;
  const auto l = lm::Transformer<float>(cfg, ck.params).loss(tokens, mask, 1.0f, {});
  EXPECT_NEAR(gptscore(scorer, instruction, generated), -l.nll_sum / static_cast<double>(l.targets), 1e-6);

  // Perplexity and gptscore agree on a text scored from the start.
  const double ppl = perplexity(scorer, generated);
  const auto lps = scorer.token_logprobs("", generated);
  double nll = 0;
  for (std::size_t i = 1; i < lps.size(); ++i) nll -= lps[i];
  EXPECT_NEAR(std::log(ppl), nll / static_cast<double>(lps.size() - 1), 1e-9);
}

TEST(LocalScorer, CacheDoesNotChangeResultsAndTruncation) {
  lm::ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.context_len = 32;
  LocalScorer s(lm::init_checkpoint(cfg, 3));
  const auto first = s.token_logprobs("prefix", "A");
  const auto again = s.token_logprobs("prefix", "A");
  EXPECT_EQ(first, again);
  const auto long_text = std::string(100, 'x');
  const auto lp = s.token_logprobs(long_text, "AB");
  EXPECT_EQ(lp.size(), 2u);
  for (double v : lp) EXPECT_LE(v, 0.0);
  EXPECT_GEOLM_ERROR(s.token_logprobs("", std::string(40, 'y')), ErrorCode::kSequenceTooLong);
}

TEST(Subjective, EvaluateAndEmptyGeneration) {
  FakeScorer gen([](std::string_view, std::string_view, std::size_t) { return -1.0; }, "a fault plane");
  FakeScorer ev([](std::string_view, std::string_view, std::size_t) { return -2.0; });
  SubjectiveItem item{"s", "What is a translational fault?", "Walls slide along strike.", SubjectiveKind::kEssay};
  const auto r = evaluate_subjective(gen, ev, item, 6);
  EXPECT_EQ(r.generated, "a faul");
  EXPECT_NEAR(r.perplexity, std::exp(2.0), 1e-9);
  EXPECT_DOUBLE_EQ(r.gptscore, -2.0);
  const auto empty = evaluate_subjective(gen, ev, item, 0);
  EXPECT_TRUE(std::isnan(empty.perplexity));
  EXPECT_TRUE(std::isnan(empty.gptscore));
}

TEST(Curve, OrderedAndDuplicateStep) {
  const auto items = synthetic_items(20, 9);
  FakeScorer good([&](std::string_view text, std::string_view cont, std::size_t) {
    for (const auto& it : items) {
      if (text.find(it.question) != std::string_view::npos) return cont == it.answer ? -0.5 : -5.0;
    }
    return -9.0;
  });
  auto bad = label_scorer({{"E", 0.0}});
  const auto curve = checkpoint_curve({{300, &good}, {0, &bad}}, items);
  ASSERT_EQ(curve.points.size(), 2u);
  EXPECT_EQ(curve.points[0].step, 0u);
  EXPECT_EQ(curve.points[1].step, 300u);
  EXPECT_GE(curve.points[1].overall.accuracy(), curve.points[0].overall.accuracy());
  const auto csv = curve.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,accuracy,aptest,npee");
  EXPECT_EQ(curve.to_json().at("steps"), Json::array({0, 300}));
  EXPECT_EQ(curve.to_json().at("subsets").at("npee").size(), 2u);

  EXPECT_GEOLM_ERROR(checkpoint_curve({{5, &good}, {5, &bad}}, items), ErrorCode::kDuplicateStep);
  EXPECT_GEOLM_ERROR(checkpoint_curve({{5, &good}}, items), ErrorCode::kInvalidArgument);
  EXPECT_GEOLM_ERROR(checkpoint_curve({{1, &good}, {2, &bad}}, std::span<const ObjectiveItem>{}),
                     ErrorCode::kInvalidArgument);
}

TEST(Ablation, RowsSortedAndIdenticalArmsMatch) {
  const auto items = synthetic_items(40, 10);
  auto rnd = testing::hashed_scorer(4);
  auto other = testing::hashed_scorer(5);
  const auto t = ablation_matrix({{"zeta", &rnd}, {"alpha", &rnd}, {"mid", &other}}, items);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0].arm, "alpha");
  EXPECT_EQ(t.rows[1].arm, "mid");
  EXPECT_EQ(t.rows[2].arm, "zeta");
  EXPECT_EQ(t.rows[0].overall.correct, t.rows[2].overall.correct);
  EXPECT_EQ(t.to_json().at(0).at("subsets"), t.to_json().at(2).at("subsets"));
  const auto md = t.to_markdown();
  EXPECT_EQ(md.substr(0, md.find('\n')), "| arm | overall | aptest | npee |");
  EXPECT_EQ(std::count(md.begin(), md.end(), '\n'), 5);
  EXPECT_GEOLM_ERROR(ablation_matrix({}, items), ErrorCode::kInvalidArgument);
}

TEST(HumanEval, SchemaAndSummary) {
  const Json j = {{"item_id", "q1"}, {"rater", "r1"}, {"rationality", 3}, {"correctness", 2}, {"consistency", 1}};
  const auto e = human_eval_from_json(j);
  EXPECT_EQ(human_eval_to_json(e), j);
  Json bad = j;
  bad["correctness"] = 4;
  EXPECT_GEOLM_ERROR(human_eval_from_json(bad), ErrorCode::kInvalidArgument);
  bad["correctness"] = 0;
  EXPECT_GEOLM_ERROR(human_eval_from_json(bad), ErrorCode::kInvalidArgument);
  std::vector<HumanEvalEntry> entries = {e, {"q2", "r2", 1, 2, 3}};
  const auto sum = summarize_human_eval(entries);
  EXPECT_EQ(sum.at("count"), 2);
  EXPECT_DOUBLE_EQ(sum.at("rationality").get<double>(), 2.0);
  EXPECT_DOUBLE_EQ(sum.at("consistency").get<double>(), 2.0);
}

}  // namespace
}  // namespace geolm::eval
