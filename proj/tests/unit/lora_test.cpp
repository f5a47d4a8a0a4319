#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "geolm/common/rng.hpp"
#include "geolm/lm/transformer.hpp"
#include "geolm/lora/adapter.hpp"
#include "geolm/lora/recipe.hpp"
#include "geolm/lora/sft.hpp"
#include "test_util.hpp"

namespace geolm::lora {
namespace {

using MatD = Matrix<double>;

MatD random_matrix(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

MatD zeros(Eigen::Index rows, Eigen::Index cols) { return MatD::Zero(rows, cols); }

double max_relative(const MatD& got, const MatD& want) {
  return (got - want).cwiseAbs().maxCoeff() / std::max(want.cwiseAbs().maxCoeff(), 1e-300);
}

lm::ModelConfig small_model() {
  lm::ModelConfig c;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.context_len = 160;
  return c;
}

signal::InstructionRecord record(int i) {
  signal::InstructionRecord r;
  r.instruction = "Name the rock type for sample " + std::to_string(i) + ".";
  r.input = i % 2 ? "" : "found near the ridge";
  r.output = i % 3 ? "basalt" : "granite";
  r.provenance = {"test", "rec-" + std::to_string(i)};
  return r;
}

std::vector<signal::InstructionRecord> records(int n, int offset = 0) {
  std::vector<signal::InstructionRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(record(offset + i));
  return out;
}

StageSpec stage(std::string name, std::vector<signal::InstructionRecord> recs, int epochs = 1, int batch = 2) {
  StageSpec s;
  s.name = std::move(name);
  s.epochs = epochs;
  s.batch_size = batch;
  s.lr = 5e-3;
  s.seed = 3;
  s.records = std::move(recs);
  return s;
}

TEST(AdaptedForward, HandWorkedTwoByTwo) {
  MatD w0 = MatD::Identity(2, 2);
  MatD a(1, 2);
  a << 1, 0;
  MatD b(2, 1);
  b << 1, 0;
  MatD x(2, 1);
  x << 1, 1;
  const MatD h = adapted_forward(w0, a, b, 2.0, x);
  EXPECT_EQ(h(0, 0), 3.0);
  EXPECT_EQ(h(1, 0), 1.0);
  const MatD merged = merge(w0, a, b, 2.0);
  MatD expected(2, 2);
  expected << 3, 0, 0, 1;
  EXPECT_EQ(merged, expected);
  EXPECT_EQ(merged * x, h);
}

TEST(AdaptedForward, ZeroFactorsLeaveBaseProduct) {
  SplitMix64 rng(1);
  const MatD w0 = random_matrix(rng, 5, 7);
  const MatD x = random_matrix(rng, 7, 3);
  EXPECT_EQ(adapted_forward(w0, zeros(2, 7), random_matrix(rng, 5, 2), 2.0, x), w0 * x);
  EXPECT_EQ(merge(w0, random_matrix(rng, 2, 7), zeros(5, 2), 2.0), w0);
}

TEST(AdaptedForward, ShapeMismatch) {
  const MatD w0 = zeros(4, 3);
  EXPECT_GEOLM_ERROR(adapted_forward(w0, zeros(2, 4), zeros(4, 2), 1.0, zeros(3, 1)),
                     ErrorCode::kShapeMismatch);
  EXPECT_GEOLM_ERROR(adapted_forward(w0, zeros(2, 3), zeros(4, 2), 1.0, zeros(4, 1)),
                     ErrorCode::kShapeMismatch);
  EXPECT_GEOLM_ERROR(merge(w0, zeros(2, 3), zeros(4, 1), 1.0), ErrorCode::kShapeMismatch);
}

TEST(Merge, EquivalentToFactoredForwardOnRandomDraws) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = static_cast<Eigen::Index>(1 + rng.below(12));
    const auto k = static_cast<Eigen::Index>(1 + rng.below(12));
    const auto r = static_cast<Eigen::Index>(1 + rng.below(4));
    const MatD w0 = random_matrix(rng, d, k);
    const MatD a = random_matrix(rng, r, k);
    const MatD b = random_matrix(rng, d, r);
    const MatD x = random_matrix(rng, k, 1 + static_cast<Eigen::Index>(rng.below(4)));
    const double scale = rng.uniform(0.1, 4.0);
    const MatD dense = (w0 + scale * b * a) * x;
    ASSERT_LT(max_relative(adapted_forward(w0, a, b, scale, x), dense), 1e-6);
    const MatD merged = merge(w0, a, b, scale);
    ASSERT_LT(max_relative(merged * x, adapted_forward(w0, a, b, scale, x)), 1e-6);
    ASSERT_LT(max_relative(merged - scale * b * a, w0), 1e-6);
  }
}

TEST(Attach, ScaleShapesAndInitialization) {
  const auto ck = lm::init_checkpoint(small_model(), 1);
  LoraConfig cfg;
  cfg.r = 4;
  cfg.alpha = 8;
  const auto set = attach(ck, cfg);
  EXPECT_FLOAT_EQ(set.scale(), 2.0f);
  ASSERT_EQ(set.pairs.size(), 6u);
  const double bound = 1.0 / std::sqrt(16.0);
  for (const auto& p : set.pairs) {
    EXPECT_EQ(p.a.rows(), 4);
    EXPECT_EQ(p.a.cols(), 16);
    EXPECT_TRUE(p.b.isZero(0));
    EXPECT_LE(p.a.cwiseAbs().maxCoeff(), bound);
    EXPECT_TRUE(p.a.allFinite());
    EXPECT_GT(p.a.cwiseAbs().maxCoeff(), 0.0f);
  }
  EXPECT_NO_THROW(check_compatible(set, ck.config));
  EXPECT_EQ(LoraConfig{}.scale(), 2.0);
  EXPECT_EQ(adapter_tensor_name(0, lm::kQProj, 'A'), "layers.0.attn.q_proj.lora_A");
}

TEST(Attach, UnknownTargetAndBadConfig) {
  const auto ck = lm::init_checkpoint(small_model(), 1);
  LoraConfig cfg;
  cfg.r = 2;
  cfg.targets = {"q_proj", "z_proj"};
  EXPECT_GEOLM_ERROR(attach(ck, cfg), ErrorCode::kUnknownTarget);
  cfg.targets = {"q_proj"};
  cfg.alpha = 0;
  EXPECT_GEOLM_ERROR(attach(ck, cfg), ErrorCode::kInvalidArgument);
  cfg.alpha = 4;
  cfg.r = 0;
  EXPECT_GEOLM_ERROR(attach(ck, cfg), ErrorCode::kInvalidArgument);
}

TEST(Attach, IdentityIsBitExact) {
  const auto ck = lm::init_checkpoint(small_model(), 5);
  LoraConfig cfg;
  cfg.r = 3;
  cfg.targets = {"q_proj", "k_proj", "v_proj", "o_proj"};
  const auto set = attach(ck, cfg);
  SplitMix64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    lm::TokenSequence t;
    const auto n = 1 + rng.below(40);
    for (std::uint64_t i = 0; i < n; ++i) t.push_back(static_cast<lm::TokenId>(rng.below(268)));
    const auto plain = lm::Transformer<float>(ck.config, ck.params).logits(t);
    const auto adapted = lm::Transformer<float>(ck.config, ck.params, &set).logits(t);
    ASSERT_EQ(plain.size(), adapted.size());
    EXPECT_EQ(std::memcmp(plain.data(), adapted.data(), sizeof(float) * static_cast<std::size_t>(plain.size())), 0);
  }
}

TEST(Attach, DefaultTrainableCountOnDefaultModel) {
  const auto ck = lm::init_checkpoint(lm::ModelConfig{}, 1);
  const auto set = attach(ck, LoraConfig{});
  // Independent count from shapes: A is r x k, B is d x r.
  std::size_t expected = 0;
  for (int l = 0; l < 4; ++l) {
    for (int t = 0; t < 3; ++t) expected += 8 * 128 + 128 * 8;
  }
  EXPECT_EQ(set.parameter_count(), expected);
  EXPECT_EQ(set.parameter_count(), 24576u);
}

TEST(Attach, RankBoundHoldsForEveryLegalConfig) {
  for (int d : {4, 8, 16, 32, 64}) {
    lm::ModelConfig m;
    m.d_model = d;
    m.n_heads = 2;
    m.n_layers = 1;
    m.context_len = 8;
    const auto ck = lm::init_checkpoint(m, 1);
    for (int r = 1; r <= d; ++r) {
      LoraConfig cfg;
      cfg.r = r;
      cfg.targets = {"q_proj", "v_proj", "o_proj"};
      bool legal = true;
      try {
        validate_config(cfg, m);
      } catch (const Error&) {
        legal = false;
      }
      const std::size_t dense = 3u * static_cast<std::size_t>(d * d);
      const std::size_t factored = 3u * static_cast<std::size_t>(r * (d + d));
      EXPECT_EQ(legal, factored < dense) << "d=" << d << " r=" << r;
      if (legal) EXPECT_EQ(attach(ck, cfg).parameter_count(), factored);
    }
  }
}

TEST(MergeInto, MatchesAdaptedModel) {
  const auto ck = lm::init_checkpoint(small_model(), 8);
  LoraConfig cfg;
  cfg.r = 2;
  auto set = attach(ck, cfg);
  SplitMix64 rng(9);
  for (auto& p : set.pairs) {
    for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b.data()[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
  }
  const auto merged = merge_into(ck.config, ck.params, set);
  const lm::TokenSequence t = {265, 'q', 'u', 'a', 'r', 't', 'z'};
  const auto a = lm::Transformer<float>(ck.config, merged).logits(t);
  const auto b = lm::Transformer<float>(ck.config, ck.params, &set).logits(t);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-4f);
  EXPECT_NE(params_checksum(merged), params_checksum(ck.params));
}

TEST(Serialization, AdapterRoundTripAndCorruption) {
  const auto ck = lm::init_checkpoint(small_model(), 8);
  LoraConfig cfg;
  cfg.r = 2;
  cfg.alpha = 6;
  cfg.targets = {"v_proj", "q_proj"};
  cfg.seed = 77;
  auto set = attach(ck, cfg);
  set.pairs[1].b.setConstant(0.25f);
  const auto bytes = serialize_adapters(set);
  EXPECT_EQ(bytes.substr(0, 4), "TLA1");
  const auto back = deserialize_adapters(bytes);
  EXPECT_EQ(back.config, cfg);
  ASSERT_EQ(back.pairs.size(), set.pairs.size());
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    EXPECT_EQ(back.pairs[i].layer, set.pairs[i].layer);
    EXPECT_EQ(back.pairs[i].slot, set.pairs[i].slot);
    EXPECT_EQ(back.pairs[i].a, set.pairs[i].a);
    EXPECT_EQ(back.pairs[i].b, set.pairs[i].b);
  }
  EXPECT_EQ(serialize_adapters(back), bytes);
  std::string bad = bytes;
  bad[bad.size() / 2] = static_cast<char>(bad[bad.size() / 2] ^ 0x10);
  EXPECT_GEOLM_ERROR(deserialize_adapters(bad), ErrorCode::kFormat);

  testing::TempDir dir("tla");
  save_adapters(dir.file("x.tla"), set);
  EXPECT_EQ(serialize_adapters(load_adapters(dir.file("x.tla"))), bytes);

  lm::ModelConfig other = small_model();
  other.d_model = 32;
  EXPECT_GEOLM_ERROR(check_compatible(set, other), ErrorCode::kShapeMismatch);
}

TEST(Sft, PromptLayoutAndMasks) {
  EXPECT_EQ(format_sft_prompt("Do X.", "data"), "Instruction:\nDo X.\n\nInput:\ndata\n\nResponse:\n");
  EXPECT_EQ(format_sft_prompt("Do X.", ""), "Instruction:\nDo X.\n\nResponse:\n");

  signal::InstructionRecord r;
  r.instruction = "Do X.";
  r.output = "ok";
  const auto prompt = format_sft_prompt("Do X.", "");
  const auto out_only = make_sft_example(r, 100, LossMasking::kOutputOnly);
  ASSERT_EQ(out_only.tokens.size(), 1 + prompt.size() + 2 + 1);
  EXPECT_EQ(out_only.tokens.front(), lm::ByteTokenizer::kBos);
  EXPECT_EQ(out_only.tokens.back(), lm::ByteTokenizer::kEos);
  std::size_t marked = 0;
  for (auto m : out_only.mask) marked += m;
  EXPECT_EQ(marked, 3u);
  EXPECT_EQ(out_only.mask[out_only.mask.size() - 3], 1);
  EXPECT_EQ(out_only.mask[out_only.mask.size() - 4], 0);

  const auto full = make_sft_example(r, 100, LossMasking::kFull);
  EXPECT_EQ(full.mask[0], 0);
  for (std::size_t i = 1; i < full.mask.size(); ++i) EXPECT_EQ(full.mask[i], 1);

  const auto cut = make_sft_example(r, 10, LossMasking::kOutputOnly);
  EXPECT_EQ(cut.tokens.size(), 10u);
  EXPECT_EQ(cut.tokens.front(), lm::ByteTokenizer::kBos);
  EXPECT_EQ(cut.tokens[cut.tokens.size() - 3], 'o');
  r.output = std::string(20, 'z');
  EXPECT_GEOLM_ERROR(make_sft_example(r, 10, LossMasking::kOutputOnly), ErrorCode::kSequenceTooLong);
  EXPECT_EQ(parse_loss_masking(to_string(LossMasking::kFull)), LossMasking::kFull);
}

TEST(TuneStage, StepCountFrozenBaseAndEpochSink) {
  const auto ck = lm::init_checkpoint(small_model(), 11);
  const auto before = params_checksum(ck.params);
  const auto before_bytes = lm::serialize_checkpoint(ck);
  LoraConfig cfg;
  cfg.r = 2;
  auto set = attach(ck, cfg);
  const auto a_before = set.pairs[0].a;
  std::vector<int> epochs;
  const auto res = tune_stage(ck, set, stage("s", records(10)), [&](const std::string& name, int e, const auto&) {
    EXPECT_EQ(name, "s");
    epochs.push_back(e);
  });
  EXPECT_EQ(res.steps, 5u);
  EXPECT_EQ(res.log.size(), 5u);
  EXPECT_EQ(epochs, (std::vector<int>{1}));
  EXPECT_EQ(params_checksum(ck.params), before);
  EXPECT_EQ(lm::serialize_checkpoint(ck), before_bytes);
  EXPECT_NE(set.pairs[0].a, a_before);
  EXPECT_FALSE(set.pairs[0].b.isZero(0));

  std::size_t touched = 0;
  for (const auto& [k, n] : res.provenance_counts) touched += n;
  EXPECT_EQ(touched, 10u);

  auto s3 = stage("odd", records(7), 3, 3);
  const auto r3 = tune_stage(ck, set, s3, [&](const std::string&, int e, const auto&) { epochs.push_back(e); });
  EXPECT_EQ(r3.steps, 9u);
  EXPECT_EQ(epochs, (std::vector<int>{1, 1, 2, 3}));
}

TEST(TuneStage, LossDecreasesOnRepeatedData) {
  const auto ck = lm::init_checkpoint(small_model(), 12);
  LoraConfig cfg;
  cfg.r = 4;
  auto set = attach(ck, cfg);
  auto s = stage("fit", records(4), 30, 4);
  s.lr = 2e-2;
  const auto res = tune_stage(ck, set, s);
  // A random base leaves little for q/k/v adapters to steer; require a clear, monotone drop.
  EXPECT_LT(res.log.back().loss, res.log.front().loss - 0.1);
  for (std::size_t i = 4; i < res.log.size(); i += 4) EXPECT_LT(res.log[i].loss, res.log[i - 4].loss);
}

TEST(TuneStage, Errors) {
  const auto ck = lm::init_checkpoint(small_model(), 13);
  LoraConfig cfg;
  cfg.r = 2;
  auto set = attach(ck, cfg);
  EXPECT_GEOLM_ERROR(tune_stage(ck, set, stage("empty", {})), ErrorCode::kEmptyDataset);
  std::vector<lm::Example> masked = {{{265, 1, 2}, {0, 0, 0}}};
  EXPECT_GEOLM_ERROR(tune_examples(ck, set, masked, {"k"}, stage("m", {}, 1, 1)), ErrorCode::kAllMasked);
}

TEST(TuneStage, Deterministic) {
  const auto ck = lm::init_checkpoint(small_model(), 14);
  LoraConfig cfg;
  cfg.r = 2;
  auto a = attach(ck, cfg);
  auto b = attach(ck, cfg);
  tune_stage(ck, a, stage("s", records(6)));
  tune_stage(ck, b, stage("s", records(6)));
  EXPECT_EQ(serialize_adapters(a), serialize_adapters(b));
}

TEST(Recipe, ZeroStagesReturnsInitial) {
  const auto ck = lm::init_checkpoint(small_model(), 15);
  LoraConfig cfg;
  cfg.r = 2;
  const auto init = attach(ck, cfg);
  const auto res = run_recipe(ck, init, StagePlan{});
  EXPECT_EQ(serialize_adapters(res.adapters), serialize_adapters(init));
  EXPECT_TRUE(res.stages.empty());
}

TEST(Recipe, SequentialAndMixedTouchSameMultiset) {
  const auto ck = lm::init_checkpoint(small_model(), 16);
  LoraConfig cfg;
  cfg.r = 2;
  const auto init = attach(ck, cfg);
  StagePlan plan;
  plan.stages = {stage("general", records(6, 0), 2), stage("expert", records(5, 100), 1)};
  int hooks = 0;
  const auto seq = run_recipe(ck, init, plan, [&](const StageResult& r, const AdapterSet<float>&) {
    ++hooks;
    return Json{{"stage", r.name}};
  });
  EXPECT_EQ(hooks, 2);
  ASSERT_EQ(seq.stages.size(), 2u);
  EXPECT_EQ(seq.stages[1].eval.at("stage"), "expert");
  plan.mode = RecipeMode::kMixed;
  const auto mixed = run_recipe(ck, init, plan);
  EXPECT_EQ(seq.provenance_counts, mixed.provenance_counts);
  std::size_t total = 0;
  for (const auto& [k, n] : mixed.provenance_counts) total += n;
  EXPECT_EQ(total, 17u);
  EXPECT_NE(serialize_adapters(seq.adapters), serialize_adapters(mixed.adapters));
}

TEST(Recipe, SequentialResumesUnlessReinit) {
  const auto ck = lm::init_checkpoint(small_model(), 17);
  LoraConfig cfg;
  cfg.r = 2;
  const auto init = attach(ck, cfg);

  StagePlan only_second;
  only_second.stages = {stage("expert", records(4, 50))};
  StagePlan both;
  both.stages = {stage("general", records(4, 0)), stage("expert", records(4, 50))};
  const auto a = run_recipe(ck, init, only_second).adapters;
  const auto b = run_recipe(ck, init, both).adapters;
  EXPECT_NE(serialize_adapters(a), serialize_adapters(b));
  both.stages[1].reinit = true;
  const auto c = run_recipe(ck, init, both).adapters;
  EXPECT_EQ(serialize_adapters(a), serialize_adapters(c));
}

TEST(Recipe, PlanJsonRoundTrip) {
  StagePlan plan;
  plan.mode = RecipeMode::kMixed;
  plan.stages = {stage("general", {}, 2, 4), stage("expert", {}, 1, 8)};
  plan.stages[0].dataset = "general.jsonl";
  plan.stages[1].masking = LossMasking::kFull;
  plan.stages[1].reinit = true;
  const auto j = plan.to_json();
  const auto back = StagePlan::from_json(j);
  EXPECT_EQ(back.to_json(), j);
  EXPECT_EQ(back.mode, RecipeMode::kMixed);
  EXPECT_EQ(back.stages[0].dataset, "general.jsonl");
  EXPECT_EQ(back.stages[1].masking, LossMasking::kFull);
}

}  // namespace
}  // namespace geolm::lora
