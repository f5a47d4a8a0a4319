#pragma once

#include <array>
#include <span>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace geolm::lm {

using TokenId = int;
using TokenSequence = std::vector<TokenId>;

// Byte-level vocabulary: IDs 0..255 are raw bytes, followed by the eight
// document markers, the document boundary, then BOS, EOS and PAD.
class ByteTokenizer {
 public:
  static constexpr TokenId kFirstReserved = 256;
  static constexpr TokenId kDocBoundary = 264;
  static constexpr TokenId kBos = 265;
  static constexpr TokenId kEos = 266;
  static constexpr TokenId kPad = 267;
  static constexpr int kVocabSize = 268;

  // Textual forms of IDs 256..264, in ID order. BOS/EOS/PAD have none.
  static const std::array<std::string_view, 9>& reserved_strings();

  static TokenSequence encode(std::string_view text);
  // Control IDs (BOS/EOS/PAD) render as nothing.
  static std::string decode(std::span<const TokenId> tokens);
  static std::string decode(const TokenSequence& tokens) { return decode(std::span<const TokenId>(tokens)); }
  static std::size_t count(std::string_view text);
};

}  // namespace geolm::lm
