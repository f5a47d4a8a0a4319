#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "geolm/common/io.hpp"
#include "geolm/lm/checkpoint.hpp"
#include "geolm/lm/tokenizer.hpp"

namespace geolm::lm {

struct TrainSchedule {
  double learning_rate = 3e-4;
  int global_batch = 8;
  int micro_batch = 4;
  int total_steps = 120;
  int warmup_steps = -1;  // negative: total_steps / 30
  int checkpoint_every = 50;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;  // global-norm clip; 0 disables

  int effective_warmup() const { return warmup_steps < 0 ? total_steps / 30 : warmup_steps; }
  // Linear warmup to learning_rate over effective_warmup() steps, then constant.
  double lr_at(int step) const;
  // Steps (relative to the run start) at which checkpoints are emitted.
  std::vector<int> checkpoint_steps() const;

  void validate() const;
  Json to_json() const;
  static TrainSchedule from_json(const Json& j);
};

// Adam with betas (0.9, 0.999) and eps 1e-8 over an arbitrary list of tensors.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  void step(std::span<Matrix<float>* const> params, std::span<const Matrix<float>* const> grads, double lr);
  std::uint64_t steps_taken() const { return t_; }

 private:
  std::vector<Matrix<float>> m_;
  std::vector<Matrix<float>> v_;
  std::uint64_t t_ = 0;
};

// Scales every gradient so the global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_global_norm(std::span<Matrix<float>* const> grads, double max_norm);

// Splits a token stream at document-boundary IDs (dropping the newline that
// the corpus separator puts on either side), then cuts each document into
// pieces of at most context_len - 1 tokens, each prefixed with BOS.
std::vector<TokenSequence> documents_from_stream(std::span<const TokenId> stream, int context_len);

struct StepLog {
  std::uint64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::uint64_t tokens_seen = 0;
};

std::string loss_log_csv(const std::vector<StepLog>& log);

struct TrainResult {
  Checkpoint final;
  std::vector<StepLog> log;
  std::vector<std::uint64_t> checkpoint_steps;
};

// Receives every scheduled checkpoint as it is produced.
using CheckpointSink = std::function<void(const Checkpoint&)>;

// Next-token training over `sequences`, every token after the first a target.
// Step k draws global_batch sequences from a seeded per-epoch permutation and
// accumulates gradients micro_batch sequences at a time. Checkpoint steps are
// the start step plus the schedule's relative steps; rng_state records the
// data-order seed.
TrainResult train(const Checkpoint& start, std::span<const TokenSequence> sequences, const TrainSchedule& sched,
                  const CheckpointSink& sink = {});

}  // namespace geolm::lm
