#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geolm/common/io.hpp"
#include "geolm/common/error.hpp"
#include "geolm/lm/checkpoint.hpp"
#include "geolm/lm/params.hpp"

namespace geolm::lora {

using lm::Matrix;

struct LoraConfig {
  int r = 8;
  double alpha = 16.0;
  std::vector<std::string> targets = {"q_proj", "k_proj", "v_proj"};
  std::uint64_t seed = 0;

  double scale() const { return alpha / static_cast<double>(r); }
  Json to_json() const;
  static LoraConfig from_json(const Json& j);
  bool operator==(const LoraConfig&) const = default;
};

// Low-rank pair for one projection W0 (d x k): A is r x k, B is d x r.
template <typename T>
struct AdapterPair {
  int layer = 0;
  int slot = 0;  // lm::LayerSlot of the targeted projection
  Matrix<T> a;
  Matrix<T> b;
};

template <typename T>
struct AdapterSet {
  LoraConfig config;
  std::vector<AdapterPair<T>> pairs;

  T scale() const { return static_cast<T>(config.scale()); }

  // Per layer, per projection slot (q,k,v,o), the pair index or -1.
  std::vector<std::array<int, 4>> lookup(int n_layers) const {
    std::vector<std::array<int, 4>> out(static_cast<std::size_t>(n_layers), {-1, -1, -1, -1});
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      out[static_cast<std::size_t>(pairs[i].layer)][static_cast<std::size_t>(pairs[i].slot - lm::kQProj)] =
          static_cast<int>(i);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : pairs) n += static_cast<std::size_t>(p.a.size() + p.b.size());
    return n;
  }

  AdapterSet zeros_like() const {
    AdapterSet out{config, {}};
    for (const auto& p : pairs) {
      out.pairs.push_back({p.layer, p.slot, Matrix<T>::Zero(p.a.rows(), p.a.cols()),
                           Matrix<T>::Zero(p.b.rows(), p.b.cols())});
    }
    return out;
  }

  void set_zero() {
    for (auto& p : pairs) {
      p.a.setZero();
      p.b.setZero();
    }
  }

  template <typename U>
  AdapterSet<U> cast() const {
    AdapterSet<U> out{config, {}};
    for (const auto& p : pairs) {
      out.pairs.push_back({p.layer, p.slot, p.a.template cast<U>(), p.b.template cast<U>()});
    }
    return out;
  }
};

// Tensor names used in adapter files, e.g. "layers.0.attn.q_proj.lora_A".
std::string adapter_tensor_name(int layer, int slot, char which);

// Rejects r <= 0, alpha <= 0, unknown targets (kUnknownTarget) and ranks that
// would not shrink a d x d projection.
void validate_config(const LoraConfig& cfg, const lm::ModelConfig& model);

// One pair per (layer, target), B = 0 and A ~ U(-1/sqrt(k), 1/sqrt(k)) seeded
// from cfg.seed and the tensor name.
AdapterSet<float> attach(const lm::Checkpoint& ckpt, const LoraConfig& cfg);

// Throws kShapeMismatch unless every pair fits the model's projections.
template <typename T>
void check_compatible(const AdapterSet<T>& adapters, const lm::ModelConfig& model);

// h = W0 x + scale * B (A x), with x holding one input per column. The dense
// update B A is never formed.
template <typename T>
Matrix<T> adapted_forward(const Matrix<T>& w0, const Matrix<T>& a, const Matrix<T>& b, T scale, const Matrix<T>& x) {
  if (a.cols() != w0.cols() || b.rows() != w0.rows() || b.cols() != a.rows() || x.rows() != w0.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "adapted_forward operands are not shape-compatible");
  }
  Matrix<T> h = w0 * x;
  h.noalias() += scale * (b * (a * x));
  return h;
}

// W' = W0 + scale * B A.
template <typename T>
Matrix<T> merge(const Matrix<T>& w0, const Matrix<T>& a, const Matrix<T>& b, T scale) {
  if (a.cols() != w0.cols() || b.rows() != w0.rows() || b.cols() != a.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "merge operands are not shape-compatible");
  }
  Matrix<T> w = w0;
  w.noalias() += scale * (b * a);
  return w;
}

// Copy of the base parameters with every adapter pair folded in.
lm::ParamSet<float> merge_into(const lm::ModelConfig& model, const lm::ParamSet<float>& base,
                               const AdapterSet<float>& adapters);

// TLA1 layout, little-endian:
//   "TLA1" | u32 r | f32 alpha | u32 n_targets | (u32 len, name) per target |
//   u64 seed | u32 pair count | A and B tensor records per pair | u32 crc32
std::string serialize_adapters(const AdapterSet<float>& adapters);
AdapterSet<float> deserialize_adapters(std::string_view bytes);
void save_adapters(const std::string& path, const AdapterSet<float>& adapters);
AdapterSet<float> load_adapters(const std::string& path);

}  // namespace geolm::lora
