#pragma once

// Scorers with hand-rigged log-probabilities, used as oracles for the metric
// tests and as the backend of the remote-protocol tests.

#include <atomic>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "geolm/common/hash.hpp"
#include "geolm/eval/scorer.hpp"
#include "geolm/lm/tokenizer.hpp"

namespace geolm::testing {

class FakeScorer : public eval::Scorer {
 public:
  // Called once per continuation token with (text, continuation, token index).
  using TokenFn = std::function<double(std::string_view, std::string_view, std::size_t)>;

  explicit FakeScorer(TokenFn fn, std::string generated = "", std::string id = "fake")
      : fn_(std::move(fn)), generated_(std::move(generated)), id_(std::move(id)) {}

  std::vector<double> token_logprobs(std::string_view text, std::string_view continuation) override {
    ++calls;
    const auto tokens = lm::ByteTokenizer::encode(continuation);
    std::vector<double> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back(fn_(text, continuation, i));
    return out;
  }

  std::string generate(std::string_view, int max_new) override {
    return generated_.substr(0, static_cast<std::size_t>(std::max(max_new, 0)));
  }

  std::string id() const override { return id_; }

  std::atomic<int> calls{0};

 private:
  TokenFn fn_;
  std::string generated_;
  std::string id_;
};

inline FakeScorer uniform_scorer() {
  return FakeScorer([](std::string_view, std::string_view, std::size_t) { return -std::log(268.0); });
}

// Pseudo-random but deterministic label preference, keyed on the prompt.
inline FakeScorer hashed_scorer(std::uint64_t salt) {
  return FakeScorer([salt](std::string_view text, std::string_view cont, std::size_t) {
    const auto h = mix64(fnv1a64(text), mix64(salt, fnv1a64(cont)));
    return -1.0 - static_cast<double>(h % 1000003) / 1000003.0;
  });
}

}  // namespace geolm::testing
