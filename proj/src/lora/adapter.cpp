#include "geolm/lora/adapter.hpp"

#include <cmath>

#include "geolm/common/hash.hpp"
#include "geolm/common/rng.hpp"

namespace geolm::lora {

Json LoraConfig::to_json() const {
  return Json{{"r", r}, {"alpha", alpha}, {"targets", targets}, {"seed", seed}};
}

LoraConfig LoraConfig::from_json(const Json& j) {
  LoraConfig c;
  c.r = j.value("r", c.r);
  c.alpha = j.value("alpha", c.alpha);
  if (j.contains("targets")) c.targets = j.at("targets").get<std::vector<std::string>>();
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string adapter_tensor_name(int layer, int slot, char which) {
  return "layers." + std::to_string(layer) + ".attn." + std::string(lm::projection_name(slot)) + ".lora_" + which;
}

void validate_config(const LoraConfig& cfg, const lm::ModelConfig& model) {
  if (cfg.r <= 0) throw Error(ErrorCode::kInvalidArgument, "lora r must be positive");
  if (!(cfg.alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lora alpha must be positive");
  if (cfg.targets.empty()) throw Error(ErrorCode::kInvalidArgument, "lora needs at least one target");
  for (std::size_t i = 0; i < cfg.targets.size(); ++i) {
    if (lm::projection_slot(cfg.targets[i]) < 0) throw Error(ErrorCode::kUnknownTarget, cfg.targets[i]);
    for (std::size_t j = 0; j < i; ++j) {
      if (cfg.targets[j] == cfg.targets[i]) throw Error(ErrorCode::kInvalidArgument, "duplicate target " + cfg.targets[i]);
    }
  }
  const long d = model.d_model;
  if (static_cast<long>(cfg.r) * (d + d) >= d * d) {
    throw Error(ErrorCode::kInvalidArgument,
                "rank " + std::to_string(cfg.r) + " is not low-rank for " + std::to_string(d) + "x" + std::to_string(d));
  }
}

AdapterSet<float> attach(const lm::Checkpoint& ckpt, const LoraConfig& cfg) {
  validate_config(cfg, ckpt.config);
  AdapterSet<float> set{cfg, {}};
  for (int l = 0; l < ckpt.config.n_layers; ++l) {
    for (const auto& target : cfg.targets) {
      const int slot = lm::projection_slot(target);
      const auto& w0 = ckpt.params[static_cast<std::size_t>(lm::tensor_index(l, slot))].value;
      AdapterPair<float> pair{l, slot, Matrix<float>(cfg.r, w0.cols()), Matrix<float>::Zero(w0.rows(), cfg.r)};
      const double bound = 1.0 / std::sqrt(static_cast<double>(w0.cols()));
      SplitMix64 rng(mix64(cfg.seed, fnv1a64(adapter_tensor_name(l, slot, 'A'))));
      for (Eigen::Index i = 0; i < pair.a.size(); ++i) pair.a.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
      set.pairs.push_back(std::move(pair));
    }
  }
  return set;
}

template <typename T>
void check_compatible(const AdapterSet<T>& adapters, const lm::ModelConfig& model) {
  const Eigen::Index d = model.d_model;
  std::vector<std::array<bool, 4>> seen(static_cast<std::size_t>(model.n_layers), {false, false, false, false});
  for (const auto& p : adapters.pairs) {
    if (p.layer < 0 || p.layer >= model.n_layers || p.slot < lm::kQProj || p.slot > lm::kOProj) {
      throw Error(ErrorCode::kShapeMismatch, "adapter pair addresses a projection the model does not have");
    }
    auto& flag = seen[static_cast<std::size_t>(p.layer)][static_cast<std::size_t>(p.slot - lm::kQProj)];
    if (flag) throw Error(ErrorCode::kShapeMismatch, "two adapter pairs for one projection");
    flag = true;
    if (p.a.rows() != adapters.config.r || p.a.cols() != d || p.b.rows() != d || p.b.cols() != adapters.config.r) {
      throw Error(ErrorCode::kShapeMismatch, adapter_tensor_name(p.layer, p.slot, 'A') + " has the wrong shape");
    }
  }
}

template void check_compatible<float>(const AdapterSet<float>&, const lm::ModelConfig&);
template void check_compatible<double>(const AdapterSet<double>&, const lm::ModelConfig&);

lm::ParamSet<float> merge_into(const lm::ModelConfig& model, const lm::ParamSet<float>& base,
                               const AdapterSet<float>& adapters) {
  check_compatible(adapters, model);
  lm::ParamSet<float> out = base;
  for (const auto& p : adapters.pairs) {
    auto& w = out[static_cast<std::size_t>(lm::tensor_index(p.layer, p.slot))].value;
    w = merge(w, p.a, p.b, adapters.scale());
  }
  return out;
}

std::string serialize_adapters(const AdapterSet<float>& adapters) {
  ByteWriter w;
  w.bytes("TLA1");
  w.u32(static_cast<std::uint32_t>(adapters.config.r));
  w.f32(static_cast<float>(adapters.config.alpha));
  w.u32(static_cast<std::uint32_t>(adapters.config.targets.size()));
  for (const auto& t : adapters.config.targets) {
    w.u32(static_cast<std::uint32_t>(t.size()));
    w.bytes(t);
  }
  w.u64(adapters.config.seed);
  w.u32(static_cast<std::uint32_t>(adapters.pairs.size()));
  for (const auto& p : adapters.pairs) {
    lm::write_tensor_record(w, adapter_tensor_name(p.layer, p.slot, 'A'), 2, p.a);
    lm::write_tensor_record(w, adapter_tensor_name(p.layer, p.slot, 'B'), 2, p.b);
  }
  return lm::with_crc_trailer(w.data());
}

namespace {

// Parses "layers.{l}.attn.{proj}.lora_{A|B}".
void parse_adapter_name(const std::string& name, char which, int& layer, int& slot) {
  const std::string prefix = "layers.";
  const std::string suffix = std::string(".lora_") + which;
  const auto bad = [&] { return Error(ErrorCode::kFormat, "unexpected adapter tensor name '" + name + "'"); };
  if (!name.starts_with(prefix) || !name.ends_with(suffix)) throw bad();
  const auto dot = name.find('.', prefix.size());
  if (dot == std::string::npos) throw bad();
  try {
    layer = std::stoi(name.substr(prefix.size(), dot - prefix.size()));
  } catch (const std::exception&) {
    throw bad();
  }
  const std::string mid = name.substr(dot + 1, name.size() - suffix.size() - dot - 1);
  if (!mid.starts_with("attn.")) throw bad();
  slot = lm::projection_slot(mid.substr(5));
  if (slot < 0) throw bad();
}

}  // namespace

AdapterSet<float> deserialize_adapters(std::string_view bytes) {
  ByteReader r(lm::check_crc_trailer(bytes));
  if (r.bytes(4) != "TLA1") throw Error(ErrorCode::kFormat, "not a TLA1 adapter file");
  AdapterSet<float> set;
  set.config.r = static_cast<int>(r.u32());
  set.config.alpha = static_cast<double>(r.f32());
  const std::uint32_t n_targets = r.u32();
  if (n_targets > 4) throw Error(ErrorCode::kFormat, "too many adapter targets");
  set.config.targets.clear();
  for (std::uint32_t i = 0; i < n_targets; ++i) {
    const std::uint32_t len = r.u32();
    if (len > 64) throw Error(ErrorCode::kFormat, "adapter target name too long");
    set.config.targets.push_back(r.bytes(len));
  }
  set.config.seed = r.u64();
  const std::uint32_t n_pairs = r.u32();
  if (n_pairs > r.remaining()) throw Error(ErrorCode::kFormat, "adapter pair count out of range");
  for (std::uint32_t i = 0; i < n_pairs; ++i) {
    auto ta = lm::read_tensor_record(r);
    auto tb = lm::read_tensor_record(r);
    AdapterPair<float> p;
    int layer_b = 0;
    int slot_b = 0;
    parse_adapter_name(ta.name, 'A', p.layer, p.slot);
    parse_adapter_name(tb.name, 'B', layer_b, slot_b);
    if (layer_b != p.layer || slot_b != p.slot) throw Error(ErrorCode::kFormat, "adapter A/B records are not paired");
    p.a = std::move(ta.value);
    p.b = std::move(tb.value);
    set.pairs.push_back(std::move(p));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::kFormat, "trailing bytes after adapters");
  return set;
}

void save_adapters(const std::string& path, const AdapterSet<float>& adapters) {
  write_file_atomic(path, serialize_adapters(adapters));
}

AdapterSet<float> load_adapters(const std::string& path) { return deserialize_adapters(read_file(path)); }

}  // namespace geolm::lora
