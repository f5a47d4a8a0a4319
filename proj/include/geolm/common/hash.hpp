#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace geolm {

// 64-bit FNV-1a. Used wherever a platform-independent hash of text is needed
// (template selection, dedup keys).
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

std::uint32_t crc32(std::span<const unsigned char> bytes);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

}  // namespace geolm
