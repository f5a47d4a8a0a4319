#include "geolm/lm/params.hpp"

#include <cmath>

#include "geolm/common/error.hpp"
#include "geolm/common/hash.hpp"
#include "geolm/common/rng.hpp"
#include "geolm/lm/tokenizer.hpp"

namespace geolm::lm {

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || context_len <= 0 || vocab_size <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "model config fields must be positive");
  }
  if (d_model % n_heads != 0) throw Error(ErrorCode::kInvalidArgument, "d_model must be divisible by n_heads");
  if (vocab_size != ByteTokenizer::kVocabSize) {
    throw Error(ErrorCode::kInvalidArgument, "vocab_size must be " + std::to_string(ByteTokenizer::kVocabSize));
  }
}

Json ModelConfig::to_json() const {
  return Json{{"d_model", d_model},
              {"n_layers", n_layers},
              {"n_heads", n_heads},
              {"context_len", context_len},
              {"vocab_size", vocab_size}};
}

ModelConfig ModelConfig::from_json(const Json& j) {
  ModelConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.context_len = j.value("context_len", c.context_len);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.validate();
  return c;
}

std::string_view projection_name(int slot) {
  switch (slot) {
    case kQProj: return "q_proj";
    case kKProj: return "k_proj";
    case kVProj: return "v_proj";
    case kOProj: return "o_proj";
    default: return {};
  }
}

int projection_slot(std::string_view name) {
  for (int s : {kQProj, kKProj, kVProj, kOProj}) {
    if (projection_name(s) == name) return s;
  }
  return -1;
}

std::vector<TensorSpec> parameter_layout(const ModelConfig& cfg) {
  const int d = cfg.d_model;
  const int ff = cfg.d_ff();
  std::vector<TensorSpec> out;
  out.push_back({"tok_emb", 2, cfg.vocab_size, d});
  out.push_back({"pos_emb", 2, cfg.context_len, d});
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    out.push_back({p + "ln1.weight", 1, 1, d});
    out.push_back({p + "ln1.bias", 1, 1, d});
    out.push_back({p + "attn.q_proj", 2, d, d});
    out.push_back({p + "attn.k_proj", 2, d, d});
    out.push_back({p + "attn.v_proj", 2, d, d});
    out.push_back({p + "attn.o_proj", 2, d, d});
    out.push_back({p + "ln2.weight", 1, 1, d});
    out.push_back({p + "ln2.bias", 1, 1, d});
    out.push_back({p + "mlp.up", 2, ff, d});
    out.push_back({p + "mlp.up_bias", 1, 1, ff});
    out.push_back({p + "mlp.down", 2, d, ff});
    out.push_back({p + "mlp.down_bias", 1, 1, d});
  }
  out.push_back({"ln_f.weight", 1, 1, d});
  out.push_back({"ln_f.bias", 1, 1, d});
  out.push_back({"lm_head", 2, cfg.vocab_size, d});
  return out;
}

ParamSet<float> init_params(const ModelConfig& cfg, std::uint64_t seed, InitMode mode) {
  cfg.validate();
  SplitMix64 rng(mix64(seed, 0x746c6d31ULL));
  const double base = 0.02 * std::sqrt(3.0);  // uniform half-width with std 0.02
  const double residual = base / std::sqrt(2.0 * cfg.n_layers);

  ParamSet<float> ps;
  for (const auto& spec : parameter_layout(cfg)) {
    Tensor<float> t{spec.name, spec.rank, Matrix<float>::Zero(spec.rows, spec.cols)};
    const bool is_gain = spec.name.ends_with("ln1.weight") || spec.name.ends_with("ln2.weight") ||
                         spec.name == "ln_f.weight";
    const bool is_bias = spec.rank == 1 && !is_gain;
    if (is_gain) {
      t.value.setOnes();
    } else if (!is_bias && mode == InitMode::kRandom) {
      const bool scaled = spec.name.ends_with("o_proj") || spec.name.ends_with("mlp.down");
      const double half = scaled ? residual : base;
      for (Eigen::Index i = 0; i < t.value.size(); ++i) {
        t.value.data()[i] = static_cast<float>(rng.uniform(-half, half));
      }
    }
    ps.tensors.push_back(std::move(t));
  }
  return ps;
}

template <typename T>
void check_layout(const ModelConfig& cfg, const ParamSet<T>& params) {
  const auto layout = parameter_layout(cfg);
  if (layout.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "expected " + std::to_string(layout.size()) + " tensors, got " +
                                               std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& spec = layout[i];
    const auto& t = params[i];
    if (t.name != spec.name || t.value.rows() != spec.rows || t.value.cols() != spec.cols) {
      throw Error(ErrorCode::kShapeMismatch, "tensor " + std::to_string(i) + " ('" + t.name +
                                                 "') does not match layout entry '" + spec.name + "'");
    }
  }
}

template void check_layout<float>(const ModelConfig&, const ParamSet<float>&);
template void check_layout<double>(const ModelConfig&, const ParamSet<double>&);

std::string params_checksum(const ParamSet<float>& params) {
  ByteWriter w;
  for (const auto& t : params.tensors) {
    w.bytes(t.name);
    for (Eigen::Index i = 0; i < t.value.size(); ++i) w.f32(t.value.data()[i]);
  }
  return sha256_hex(w.data());
}

}  // namespace geolm::lm
