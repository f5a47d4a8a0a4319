#include "geolm/lm/checkpoint.hpp"

#include "geolm/common/error.hpp"
#include "geolm/common/hash.hpp"

namespace geolm::lm {

namespace {

constexpr std::string_view kMagic = "TLM1";
constexpr std::uint32_t kMaxNameLen = 1u << 16;

std::uint32_t crc_of(std::string_view bytes) {
  return crc32({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

}  // namespace

Checkpoint init_checkpoint(const ModelConfig& cfg, std::uint64_t seed, InitMode mode) {
  Checkpoint c;
  c.config = cfg;
  c.params = init_params(cfg, seed, mode);
  c.rng_state = mix64(seed, 0x747261696eULL);
  return c;
}

void write_tensor_record(ByteWriter& w, const std::string& name, int rank, const Matrix<float>& m) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.u32(static_cast<std::uint32_t>(rank));
  if (rank == 1) {
    w.u32(static_cast<std::uint32_t>(m.size()));
  } else {
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
  }
  for (Eigen::Index i = 0; i < m.size(); ++i) w.f32(m.data()[i]);
}

Tensor<float> read_tensor_record(ByteReader& r) {
  const std::uint32_t name_len = r.u32();
  if (name_len > kMaxNameLen) throw Error(ErrorCode::kFormat, "tensor name length out of range");
  Tensor<float> t;
  t.name = r.bytes(name_len);
  const std::uint32_t rank = r.u32();
  std::uint64_t rows = 1;
  std::uint64_t cols = 0;
  if (rank == 1) {
    cols = r.u32();
  } else if (rank == 2) {
    rows = r.u32();
    cols = r.u32();
  } else {
    throw Error(ErrorCode::kFormat, "tensor '" + t.name + "' has unsupported rank " + std::to_string(rank));
  }
  if (rows * cols * 4 > r.remaining()) throw Error(ErrorCode::kFormat, "tensor '" + t.name + "' is truncated");
  t.rank = static_cast<int>(rank);
  t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = r.f32();
  return t;
}

std::string with_crc_trailer(std::string body) {
  ByteWriter w;
  w.u32(crc_of(body));
  body += w.data();
  return body;
}

std::string_view check_crc_trailer(std::string_view bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::kFormat, "file too short for checksum");
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  ByteReader tail(bytes.substr(bytes.size() - 4));
  if (tail.u32() != crc_of(body)) throw Error(ErrorCode::kFormat, "checksum mismatch");
  return body;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  check_layout(ckpt.config, ckpt.params);
  ByteWriter w;
  w.bytes(kMagic);
  w.i32(ckpt.config.d_model);
  w.i32(ckpt.config.n_layers);
  w.i32(ckpt.config.n_heads);
  w.i32(ckpt.config.context_len);
  w.i32(ckpt.config.vocab_size);
  w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& t : ckpt.params.tensors) write_tensor_record(w, t.name, t.rank, t.value);
  w.u64(ckpt.step);
  w.u64(ckpt.rng_state);
  return with_crc_trailer(w.data());
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  ByteReader r(check_crc_trailer(bytes));
  if (r.bytes(4) != kMagic) throw Error(ErrorCode::kFormat, "not a TLM1 checkpoint");
  Checkpoint c;
  c.config.d_model = r.i32();
  c.config.n_layers = r.i32();
  c.config.n_heads = r.i32();
  c.config.context_len = r.i32();
  c.config.vocab_size = r.i32();
  try {
    c.config.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("bad config: ") + e.what());
  }
  const std::uint32_t n = r.u32();
  if (n != parameter_layout(c.config).size()) throw Error(ErrorCode::kFormat, "tensor count does not match config");
  for (std::uint32_t i = 0; i < n; ++i) c.params.tensors.push_back(read_tensor_record(r));
  try {
    check_layout(c.config, c.params);
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, e.what());
  }
  c.step = r.u64();
  c.rng_state = r.u64();
  if (r.remaining() != 0) throw Error(ErrorCode::kFormat, "trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kFormat) throw;
    throw Error(ErrorCode::kFormat, path + ": " + e.what());
  }
}

}  // namespace geolm::lm
