#include <gtest/gtest.h>

#include <cmath>

#include "geolm/common/rng.hpp"
#include "geolm/lm/transformer.hpp"
#include "geolm/lora/adapter.hpp"
#include "test_util.hpp"

namespace geolm::lm {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.context_len = 16;
  return c;
}

// Larger-than-default weights so every gradient is comfortably above noise.
ParamSet<double> random_params(const ModelConfig& cfg, std::uint64_t seed) {
  auto p = init_params(cfg, seed).cast<double>();
  SplitMix64 rng(seed ^ 0xabcdefULL);
  for (auto& t : p.tensors) {
    const bool gain = t.name.find("weight") != std::string::npos && t.rank == 1;
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      t.value.data()[i] = (gain ? 1.0 : 0.0) + rng.uniform(-0.4, 0.4);
    }
  }
  return p;
}

TokenSequence random_tokens(SplitMix64& rng, int n) {
  TokenSequence t(static_cast<std::size_t>(n));
  for (auto& id : t) id = static_cast<TokenId>(rng.below(ByteTokenizer::kVocabSize));
  return t;
}

std::vector<std::uint8_t> all_targets(std::size_t n) { return std::vector<std::uint8_t>(n, 1); }

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / denom;
}

TEST(Forward, ShapeAndSoftmaxRowsSumToOne) {
  const auto cfg = tiny_config();
  const auto params = init_params(cfg, 3);
  Transformer<float> model(cfg, params);
  SplitMix64 rng(1);
  const auto tokens = random_tokens(rng, 12);
  const auto logits = model.logits(tokens);
  ASSERT_EQ(logits.rows(), 12);
  ASSERT_EQ(logits.cols(), 268);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto lp = log_softmax_row(logits.row(r).data(), static_cast<int>(logits.cols()));
    double sum = 0;
    for (double v : lp) {
      ASSERT_TRUE(std::isfinite(v));
      sum += std::exp(v);
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(Forward, AppendingTokenLeavesEarlierLogitsUnchanged) {
  const auto cfg = tiny_config();
  const auto params = init_params(cfg, 4);
  Transformer<float> model(cfg, params);
  SplitMix64 rng(2);
  auto tokens = random_tokens(rng, 9);
  const auto before = model.logits(tokens);
  tokens.push_back(42);
  const auto after = model.logits(tokens);
  EXPECT_EQ(before, after.topRows(9));
}

TEST(Forward, PerturbingTokenNeverChangesEarlierPositions) {
  const auto cfg = tiny_config();
  const auto params = random_params(cfg, 5);
  Transformer<double> model(cfg, params);
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto tokens = random_tokens(rng, 14);
    const auto base = model.logits(tokens);
    const int j = static_cast<int>(rng.below(14));
    tokens[static_cast<std::size_t>(j)] = (tokens[static_cast<std::size_t>(j)] + 1) % 268;
    const auto changed = model.logits(tokens);
    ASSERT_EQ(base.topRows(j), changed.topRows(j));
    EXPECT_NE(base.row(j), changed.row(j));
  }
}

TEST(Forward, ZeroModelGivesIdenticalRows) {
  const auto cfg = tiny_config();
  const auto params = init_params(cfg, 0, InitMode::kZero);
  Transformer<float> model(cfg, params);
  const auto logits = model.logits(TokenSequence{1, 2, 3, 4, 5});
  for (Eigen::Index r = 1; r < logits.rows(); ++r) EXPECT_EQ(logits.row(r), logits.row(0));
}

TEST(Forward, BitIdenticalAcrossRuns) {
  const auto cfg = tiny_config();
  const auto a = init_params(cfg, 77);
  const auto b = init_params(cfg, 77);
  EXPECT_EQ(params_checksum(a), params_checksum(b));
  const TokenSequence t = {5, 6, 7, 8, 265, 9};
  EXPECT_EQ(Transformer<float>(cfg, a).logits(t), Transformer<float>(cfg, b).logits(t));
}

TEST(Forward, Errors) {
  const auto cfg = tiny_config();
  const auto params = init_params(cfg, 1);
  Transformer<float> model(cfg, params);
  EXPECT_GEOLM_ERROR(model.logits(TokenSequence(17, 1)), ErrorCode::kSequenceTooLong);
  EXPECT_NO_THROW(model.logits(TokenSequence(16, 1)));
  EXPECT_GEOLM_ERROR(model.logits(TokenSequence{1, 268}), ErrorCode::kInvalidArgument);
  EXPECT_GEOLM_ERROR(model.logits(TokenSequence{-1}), ErrorCode::kInvalidArgument);
}

TEST(Loss, UniformLogitsGiveLogVocab) {
  const auto cfg = tiny_config();
  const auto params = init_params(cfg, 0, InitMode::kZero);
  const TokenSequence t = {1, 2, 3, 4, 5, 6};
  const auto l = Transformer<float>(cfg, params).loss(t, all_targets(t.size()), 1.0f, {});
  EXPECT_EQ(l.targets, 5u);
  EXPECT_NEAR(l.nll_sum / 5.0, std::log(268.0), 1e-6);
  EXPECT_NEAR(std::log(268.0), 5.5910, 1e-4);
}

TEST(Loss, SingleTargetEqualsThatPositionNll) {
  const auto cfg = tiny_config();
  const auto params = random_params(cfg, 8);
  Transformer<double> model(cfg, params);
  const TokenSequence t = {265, 10, 20, 30, 40};
  std::vector<std::uint8_t> mask(t.size(), 0);
  mask[3] = 1;
  const auto l = model.loss(t, mask, 1.0, {});
  const auto logits = model.logits(t);
  const auto lp = log_softmax_row(logits.row(2).data(), 268);
  EXPECT_EQ(l.targets, 1u);
  EXPECT_NEAR(l.nll_sum, -lp[30], 1e-12);
}

TEST(Loss, BatchMeanAndAllMasked) {
  const auto cfg = tiny_config();
  const auto params = random_params(cfg, 9);
  std::vector<Example> batch = {{{1, 2, 3}, {0, 1, 1}}, {{4, 5, 6, 7}, {0, 0, 0, 1}}};
  Transformer<double> model(cfg, params);
  double sum = 0;
  for (const auto& ex : batch) sum += model.loss(ex.tokens, ex.mask, 1.0, {}).nll_sum;
  const auto bl = batch_loss<double>(cfg, params, nullptr, batch, {});
  EXPECT_EQ(bl.targets, 3u);
  EXPECT_NEAR(bl.loss, sum / 3.0, 1e-12);

  std::vector<Example> masked = {{{1, 2, 3}, {1, 0, 0}}};
  EXPECT_GEOLM_ERROR(batch_loss<double>(cfg, params, nullptr, masked, {}), ErrorCode::kAllMasked);
  std::vector<Example> bad = {{{1, 2, 3}, {0, 1}}};
  EXPECT_GEOLM_ERROR(batch_loss<double>(cfg, params, nullptr, bad, {}), ErrorCode::kInvalidArgument);
}

// Derivative of f at *slot from central differences at h = 1e-3 and h/2,
// combined by Richardson extrapolation. The bare h = 1e-3 difference has
// O(h^2) error that can exceed the tolerance on gradients close to zero.
template <typename F>
double numeric_derivative(double* slot, F f) {
  const double h = 1e-3;
  const double orig = *slot;
  auto central = [&](double step) {
    *slot = orig + step;
    const double up = f();
    *slot = orig - step;
    const double down = f();
    *slot = orig;
    return (up - down) / (2 * step);
  };
  return (4 * central(h / 2) - central(h)) / 3;
}

TEST(Gradient, BaseParametersMatchFiniteDifferences) {
  const auto cfg = tiny_config();
  auto params = random_params(cfg, 11);
  SplitMix64 rng(12);
  const auto tokens = random_tokens(rng, 12);
  std::vector<std::uint8_t> mask = all_targets(tokens.size());
  mask[4] = 0;

  auto grads = params.zeros_like();
  Transformer<double>(cfg, params).loss(tokens, mask, 1.0, {&grads, nullptr});

  int checked = 0;
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    auto& value = params[ti].value;
    for (int s = 0; s < 4; ++s) {
      const auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(value.size())));
      const double numeric = numeric_derivative(value.data() + idx, [&] {
        return Transformer<double>(cfg, params).loss(tokens, mask, 1.0, {}).nll_sum;
      });
      const double analytic = grads[ti].value.data()[idx];
      EXPECT_LT(relative_error(analytic, numeric), 1e-3)
          << params[ti].name << "[" << idx << "] analytic " << analytic << " numeric " << numeric;
      ++checked;
    }
  }
  EXPECT_GE(checked, 100);
}

TEST(Gradient, LoraFactorsMatchFiniteDifferences) {
  const auto cfg = tiny_config();
  const auto params = random_params(cfg, 21);
  Checkpoint ck{cfg, params.cast<float>(), 0, 0};
  lora::LoraConfig lc;
  lc.r = 2;
  lc.targets = {"q_proj", "k_proj", "v_proj", "o_proj"};
  lc.seed = 4;
  auto adapters = lora::attach(ck, lc).cast<double>();
  SplitMix64 rng(22);
  for (auto& p : adapters.pairs) {
    for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b.data()[i] = rng.uniform(-0.2, 0.2);
  }
  const auto tokens = random_tokens(rng, 10);
  const auto mask = all_targets(tokens.size());

  auto base_grads = params.zeros_like();
  auto grads = adapters.zeros_like();
  Transformer<double>(cfg, params, &adapters).loss(tokens, mask, 1.0, {&base_grads, &grads});

  int checked = 0;
  for (std::size_t pi = 0; pi < adapters.pairs.size(); ++pi) {
    for (int which = 0; which < 2; ++which) {
      auto& value = which == 0 ? adapters.pairs[pi].a : adapters.pairs[pi].b;
      const auto& g = which == 0 ? grads.pairs[pi].a : grads.pairs[pi].b;
      for (int s = 0; s < 7; ++s) {
        const auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(value.size())));
        const double numeric = numeric_derivative(value.data() + idx, [&] {
          return Transformer<double>(cfg, params, &adapters).loss(tokens, mask, 1.0, {}).nll_sum;
        });
        EXPECT_LT(relative_error(g.data()[idx], numeric), 1e-3)
            << "pair " << pi << (which ? " B" : " A") << "[" << idx << "] analytic " << g.data()[idx] << " numeric "
            << numeric;
        ++checked;
      }
    }
  }
  EXPECT_GE(checked, 100);
}

TEST(Gradient, GradScaleIsLinear) {
  const auto cfg = tiny_config();
  const auto params = random_params(cfg, 31);
  const TokenSequence t = {265, 3, 4, 5, 6};
  auto g1 = params.zeros_like();
  auto g2 = params.zeros_like();
  Transformer<double> model(cfg, params);
  model.loss(t, all_targets(t.size()), 1.0, {&g1, nullptr});
  model.loss(t, all_targets(t.size()), 0.25, {&g2, nullptr});
  for (std::size_t i = 0; i < g1.size(); ++i) {
    EXPECT_TRUE(g2[i].value.isApprox(0.25 * g1[i].value, 1e-12)) << g1[i].name;
  }
}

}  // namespace
}  // namespace geolm::lm
