#include "geolm/lm/generate.hpp"

#include <cmath>

#include "geolm/common/error.hpp"
#include "geolm/common/rng.hpp"
#include "geolm/lm/transformer.hpp"

namespace geolm::lm {

TokenSequence generate_tokens(const Checkpoint& ckpt, const lora::AdapterSet<float>* adapters,
                              const TokenSequence& prompt, const GenerateOptions& opts) {
  const int ctx = ckpt.config.context_len;
  if (static_cast<int>(prompt.size()) > ctx) {
    throw Error(ErrorCode::kSequenceTooLong, "prompt of " + std::to_string(prompt.size()) +
                                                 " tokens exceeds context of " + std::to_string(ctx));
  }
  if (opts.mode == GenerateOptions::Mode::kSample && !(opts.temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  }
  const Transformer<float> model(ckpt.config, ckpt.params, adapters);
  SplitMix64 rng(opts.seed);
  TokenSequence seq = prompt;
  TokenSequence out;
  while (static_cast<int>(out.size()) < opts.max_new && static_cast<int>(seq.size()) < ctx && !seq.empty()) {
    const Matrix<float> logits = model.logits(seq);
    const auto lsm = log_softmax_row(logits.row(logits.rows() - 1).data(), ckpt.config.vocab_size);
    TokenId next = 0;
    if (opts.mode == GenerateOptions::Mode::kGreedy) {
      for (int t = 1; t < static_cast<int>(lsm.size()); ++t) {
        if (lsm[static_cast<std::size_t>(t)] > lsm[static_cast<std::size_t>(next)]) next = t;
      }
    } else {
      std::vector<double> w(lsm.size());
      double mx = -INFINITY;
      for (double v : lsm) mx = std::max(mx, v / opts.temperature);
      double sum = 0.0;
      for (std::size_t t = 0; t < lsm.size(); ++t) sum += (w[t] = std::exp(lsm[t] / opts.temperature - mx));
      double u = rng.uniform() * sum;
      next = static_cast<TokenId>(lsm.size()) - 1;
      for (std::size_t t = 0; t < w.size(); ++t) {
        if (u < w[t]) {
          next = static_cast<TokenId>(t);
          break;
        }
        u -= w[t];
      }
    }
    if (next == ByteTokenizer::kEos) break;
    seq.push_back(next);
    out.push_back(next);
  }
  return out;
}

std::string generate(const Checkpoint& ckpt, const lora::AdapterSet<float>* adapters, std::string_view prompt,
                     const GenerateOptions& opts) {
  TokenSequence seq{ByteTokenizer::kBos};
  const auto body = ByteTokenizer::encode(prompt);
  seq.insert(seq.end(), body.begin(), body.end());
  return ByteTokenizer::decode(generate_tokens(ckpt, adapters, seq, opts));
}

}  // namespace geolm::lm
