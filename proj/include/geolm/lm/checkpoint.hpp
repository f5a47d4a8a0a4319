#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "geolm/common/io.hpp"
#include "geolm/lm/params.hpp"

namespace geolm::lm {

struct Checkpoint {
  ModelConfig config;
  ParamSet<float> params;
  std::uint64_t step = 0;
  std::uint64_t rng_state = 0;
};

// Fresh checkpoint at step 0.
Checkpoint init_checkpoint(const ModelConfig& cfg, std::uint64_t seed, InitMode mode = InitMode::kRandom);

// TLM1 layout, all little-endian:
//   "TLM1" | 5 x i32 config | u32 tensor count | tensor records | u64 step |
//   u64 rng_state | u32 crc32 of every preceding byte
// A tensor record is u32 name length, name, u32 rank, rank x u32 dims, f32 data.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Tensor record helpers shared with the adapter format.
void write_tensor_record(ByteWriter& w, const std::string& name, int rank, const Matrix<float>& m);
Tensor<float> read_tensor_record(ByteReader& r);

// Appends the CRC32 trailer / verifies and strips it. Throws kFormat on mismatch.
std::string with_crc_trailer(std::string body);
std::string_view check_crc_trailer(std::string_view bytes);

}  // namespace geolm::lm
