#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geolm/lm/checkpoint.hpp"
#include "geolm/lora/adapter.hpp"

namespace geolm::eval {

// Anything that can score a continuation and generate text. Implementations
// must be safe to call from several threads at once.
class Scorer {
 public:
  virtual ~Scorer() = default;

  // Natural-log probability of each continuation token given everything
  // before it, where the context is BOS followed by `text`.
  virtual std::vector<double> token_logprobs(std::string_view text, std::string_view continuation) = 0;

  // Greedy continuation of BOS + prompt.
  virtual std::string generate(std::string_view prompt, int max_new) = 0;

  virtual std::string id() const = 0;
};

// Scores with a tiny_lm checkpoint and optional adapters. When the input
// exceeds the context, the oldest `text` tokens are dropped. Next-token
// distributions for single-token continuations are cached per prefix.
class LocalScorer : public Scorer {
 public:
  LocalScorer(lm::Checkpoint ckpt, std::optional<lora::AdapterSet<float>> adapters = std::nullopt,
              std::string id = "local");

  std::vector<double> token_logprobs(std::string_view text, std::string_view continuation) override;
  std::string generate(std::string_view prompt, int max_new) override;
  std::string id() const override { return id_; }

  const lm::Checkpoint& checkpoint() const { return ckpt_; }

 private:
  const lora::AdapterSet<float>* adapters() const { return adapters_ ? &*adapters_ : nullptr; }

  lm::Checkpoint ckpt_;
  std::optional<lora::AdapterSet<float>> adapters_;
  std::string id_;
  std::mutex mu_;
  std::map<std::vector<int>, std::vector<double>> next_cache_;
};

// Parses "local:ckpt.tlm[+adapters.tla]" into a LocalScorer. Remote specs are
// handled by make_scorer in remote.hpp.
std::unique_ptr<Scorer> make_local_scorer(std::string_view spec);

}  // namespace geolm::eval
