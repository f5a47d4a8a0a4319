#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "geolm/lm/checkpoint.hpp"
#include "geolm/lm/tokenizer.hpp"
#include "geolm/lora/adapter.hpp"

namespace geolm::lm {

struct GenerateOptions {
  enum class Mode { kGreedy, kSample };
  Mode mode = Mode::kGreedy;
  int max_new = 64;
  std::uint64_t seed = 0;
  double temperature = 1.0;
};

// Extends `prompt` (already including BOS) until EOS, max_new tokens, or the
// context is full. Returns only the new tokens, without the EOS. Greedy ties
// go to the lowest token id.
TokenSequence generate_tokens(const Checkpoint& ckpt, const lora::AdapterSet<float>* adapters,
                              const TokenSequence& prompt, const GenerateOptions& opts);

// BOS + prompt bytes, decoded continuation. Throws kSequenceTooLong when the
// prompt alone exceeds the context.
std::string generate(const Checkpoint& ckpt, const lora::AdapterSet<float>* adapters, std::string_view prompt,
                     const GenerateOptions& opts);

}  // namespace geolm::lm
