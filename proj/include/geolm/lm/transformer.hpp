#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "geolm/lm/params.hpp"
#include "geolm/lm/tokenizer.hpp"
#include "geolm/lora/adapter.hpp"

namespace geolm::lm {

// Gradient sinks. A null member means that group is frozen and its gradient
// is never computed.
template <typename T>
struct Gradients {
  ParamSet<T>* base = nullptr;
  lora::AdapterSet<T>* adapters = nullptr;
};

struct SequenceLoss {
  double nll_sum = 0.0;  // summed over counted targets
  std::size_t targets = 0;
};

// Pre-norm causal decoder: learned absolute positions, multi-head attention,
// GELU MLP, final layer norm and an untied output head. Attention projections
// optionally carry LoRA pairs: out = x W0^T + scale * (x A^T) B^T.
template <typename T>
class Transformer {
 public:
  Transformer(const ModelConfig& cfg, const ParamSet<T>& params, const lora::AdapterSet<T>* adapters = nullptr);

  // positions x vocab. Throws kSequenceTooLong past context_len.
  Matrix<T> logits(std::span<const TokenId> tokens) const;

  // Cross-entropy over next-token targets. mask[j] != 0 makes token j a target
  // (predicted from position j - 1); mask[0] is ignored. If `grads` has any
  // sink, adds grad_scale * d(nll_sum)/d(theta) into it.
  SequenceLoss loss(std::span<const TokenId> tokens, std::span<const std::uint8_t> mask, T grad_scale,
                    const Gradients<T>& grads) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  struct Cache;
  Matrix<T> run_forward(std::span<const TokenId> tokens, Cache* cache) const;

  ModelConfig cfg_;
  const ParamSet<T>& params_;
  const lora::AdapterSet<T>* adapters_;
  std::vector<std::array<int, 4>> lookup_;
};

// One training example: tokens plus per-token target mask.
struct Example {
  TokenSequence tokens;
  std::vector<std::uint8_t> mask;
};

struct BatchLoss {
  double loss = 0.0;  // mean NLL over all targets in the batch
  std::size_t targets = 0;
};

// Mean NLL over every masked-in target of the batch, with gradients of that
// mean accumulated into `grads`. Throws kAllMasked when the batch has no
// target, kInvalidArgument when a mask length differs from its tokens.
template <typename T>
BatchLoss batch_loss(const ModelConfig& cfg, const ParamSet<T>& params, const lora::AdapterSet<T>* adapters,
                     std::span<const Example> batch, const Gradients<T>& grads);

// Row-wise log-softmax in double precision.
std::vector<double> log_softmax_row(const float* row, int n);
std::vector<double> log_softmax_row(const double* row, int n);

}  // namespace geolm::lm
