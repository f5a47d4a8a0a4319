#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "geolm/common/io.hpp"

namespace geolm::lm {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int context_len = 256;
  int vocab_size = 268;

  int head_dim() const { return d_model / n_heads; }
  int d_ff() const { return 4 * d_model; }

  // Throws kInvalidArgument unless all fields are positive and d_model % n_heads == 0.
  void validate() const;
  Json to_json() const;
  static ModelConfig from_json(const Json& j);
  bool operator==(const ModelConfig&) const = default;
};

// Per-layer tensor slots, in file order.
enum LayerSlot : int {
  kLn1Weight = 0,
  kLn1Bias,
  kQProj,
  kKProj,
  kVProj,
  kOProj,
  kLn2Weight,
  kLn2Bias,
  kMlpUp,
  kMlpUpBias,
  kMlpDown,
  kMlpDownBias,
  kLayerSlotCount,
};

// Name suffix used for the projection slots ("q_proj", ...), empty otherwise.
std::string_view projection_name(int slot);
// Inverse of projection_name; -1 when unknown.
int projection_slot(std::string_view name);

struct TensorSpec {
  std::string name;
  int rank;  // 1 or 2
  int rows;  // 1 for rank-1 tensors
  int cols;
};

// Canonical tensor order: tok_emb, pos_emb, then per layer the twelve slots,
// then ln_f.weight, ln_f.bias, lm_head.
std::vector<TensorSpec> parameter_layout(const ModelConfig& cfg);

inline int tensor_index(int layer, int slot) { return 2 + layer * kLayerSlotCount + slot; }
inline int ln_f_weight_index(const ModelConfig& cfg) { return 2 + cfg.n_layers * kLayerSlotCount; }
inline int ln_f_bias_index(const ModelConfig& cfg) { return ln_f_weight_index(cfg) + 1; }
inline int lm_head_index(const ModelConfig& cfg) { return ln_f_weight_index(cfg) + 2; }

template <typename T>
struct Tensor {
  std::string name;
  int rank = 2;
  Matrix<T> value;
};

template <typename T>
struct ParamSet {
  std::vector<Tensor<T>> tensors;

  Tensor<T>& operator[](std::size_t i) { return tensors[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors[i]; }
  std::size_t size() const { return tensors.size(); }

  // -1 when absent.
  int index_of(std::string_view name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (tensors[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
    return n;
  }

  // Same names and shapes, all zeros.
  ParamSet zeros_like() const {
    ParamSet out;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) {
      out.tensors.push_back({t.name, t.rank, Matrix<T>::Zero(t.value.rows(), t.value.cols())});
    }
    return out;
  }

  void set_zero() {
    for (auto& t : tensors) t.value.setZero();
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) out.tensors.push_back({t.name, t.rank, t.value.template cast<U>()});
    return out;
  }
};

enum class InitMode { kRandom, kZero };

// Small uniform init (std 0.02, residual output projections scaled by
// 1/sqrt(2 * n_layers)), unit norm gains, zero biases. kZero zeroes everything
// except the norm gains.
ParamSet<float> init_params(const ModelConfig& cfg, std::uint64_t seed, InitMode mode = InitMode::kRandom);

// Throws kShapeMismatch when names or shapes differ from parameter_layout(cfg).
template <typename T>
void check_layout(const ModelConfig& cfg, const ParamSet<T>& params);

// Bytewise checksum of every tensor (sha256 over the little-endian floats).
std::string params_checksum(const ParamSet<float>& params);

}  // namespace geolm::lm
