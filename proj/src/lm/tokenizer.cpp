#include "geolm/lm/tokenizer.hpp"

namespace geolm::lm {

const std::array<std::string_view, 9>& ByteTokenizer::reserved_strings() {
  static const std::array<std::string_view, 9> kStrings = {
      "[START_FIGURE]", "[END_FIGURE]",  "[START_TABLE]",   "[END_TABLE]", "[START_REF]",
      "[END_REF]",      "[START_FORMULA]", "[END_FORMULA]", "<|doc|>",
  };
  return kStrings;
}

namespace {

// Longest reserved literal starting at `pos`, or -1.
TokenId match_reserved(std::string_view text, std::size_t pos, std::size_t& len) {
  const char c = text[pos];
  if (c != '[' && c != '<') return -1;
  const auto& strings = ByteTokenizer::reserved_strings();
  TokenId best = -1;
  len = 0;
  for (std::size_t i = 0; i < strings.size(); ++i) {
    const auto s = strings[i];
    if (s.size() > len && text.substr(pos, s.size()) == s) {
      best = ByteTokenizer::kFirstReserved + static_cast<TokenId>(i);
      len = s.size();
    }
  }
  return best;
}

}  // namespace

TokenSequence ByteTokenizer::encode(std::string_view text) {
  TokenSequence out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 0;
    const TokenId id = match_reserved(text, pos, len);
    if (id >= 0) {
      out.push_back(id);
      pos += len;
    } else {
      out.push_back(static_cast<unsigned char>(text[pos]));
      ++pos;
    }
  }
  return out;
}

std::string ByteTokenizer::decode(std::span<const TokenId> tokens) {
  std::string out;
  out.reserve(tokens.size());
  const auto& strings = reserved_strings();
  for (TokenId t : tokens) {
    if (t >= 0 && t < 256) {
      out.push_back(static_cast<char>(t));
    } else if (t >= kFirstReserved && t <= kDocBoundary) {
      out += strings[static_cast<std::size_t>(t - kFirstReserved)];
    }
  }
  return out;
}

std::size_t ByteTokenizer::count(std::string_view text) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 0;
    pos += match_reserved(text, pos, len) >= 0 ? len : 1;
    ++n;
  }
  return n;
}

}  // namespace geolm::lm
