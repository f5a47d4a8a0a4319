#include "geolm/eval/scorer.hpp"

#include "geolm/common/error.hpp"
#include "geolm/lm/generate.hpp"
#include "geolm/lm/transformer.hpp"

namespace geolm::eval {

namespace {

constexpr std::size_t kMaxCacheEntries = 4096;

}  // namespace

LocalScorer::LocalScorer(lm::Checkpoint ckpt, std::optional<lora::AdapterSet<float>> adapters, std::string id)
    : ckpt_(std::move(ckpt)), adapters_(std::move(adapters)), id_(std::move(id)) {
  lm::check_layout(ckpt_.config, ckpt_.params);
  if (adapters_) lora::check_compatible(*adapters_, ckpt_.config);
}

std::vector<double> LocalScorer::token_logprobs(std::string_view text, std::string_view continuation) {
  using lm::ByteTokenizer;
  const auto prefix_body = ByteTokenizer::encode(text);
  const auto cont = ByteTokenizer::encode(continuation);
  if (cont.empty()) return {};
  const auto ctx = static_cast<std::size_t>(ckpt_.config.context_len);
  if (cont.size() + 1 > ctx) throw Error(ErrorCode::kSequenceTooLong, "continuation does not fit the context");
  const std::size_t keep = std::min(prefix_body.size(), ctx - 1 - cont.size());

  std::vector<int> tokens{ByteTokenizer::kBos};
  tokens.insert(tokens.end(), prefix_body.end() - static_cast<std::ptrdiff_t>(keep), prefix_body.end());
  const std::size_t first = tokens.size();
  const int vocab = ckpt_.config.vocab_size;

  if (cont.size() == 1) {
    {
      std::lock_guard lock(mu_);
      auto it = next_cache_.find(tokens);
      if (it != next_cache_.end()) return {it->second[static_cast<std::size_t>(cont[0])]};
    }
    const lm::Transformer<float> model(ckpt_.config, ckpt_.params, adapters());
    const auto logits = model.logits(tokens);
    auto lsm = lm::log_softmax_row(logits.row(logits.rows() - 1).data(), vocab);
    const double value = lsm[static_cast<std::size_t>(cont[0])];
    std::lock_guard lock(mu_);
    if (next_cache_.size() >= kMaxCacheEntries) next_cache_.clear();
    next_cache_.emplace(std::move(tokens), std::move(lsm));
    return {value};
  }

  tokens.insert(tokens.end(), cont.begin(), cont.end());
  const lm::Transformer<float> model(ckpt_.config, ckpt_.params, adapters());
  const auto logits = model.logits(tokens);
  std::vector<double> out;
  out.reserve(cont.size());
  for (std::size_t p = first; p < tokens.size(); ++p) {
    const auto lsm = lm::log_softmax_row(logits.row(static_cast<Eigen::Index>(p - 1)).data(), vocab);
    out.push_back(lsm[static_cast<std::size_t>(tokens[p])]);
  }
  return out;
}

std::string LocalScorer::generate(std::string_view prompt, int max_new) {
  lm::GenerateOptions opts;
  opts.max_new = max_new;
  using lm::ByteTokenizer;
  const auto body = ByteTokenizer::encode(prompt);
  const auto ctx = static_cast<std::size_t>(ckpt_.config.context_len);
  // Leave room for the continuation by dropping the oldest prompt bytes.
  const std::size_t room = ctx > static_cast<std::size_t>(max_new) + 1 ? ctx - 1 - static_cast<std::size_t>(max_new) : 1;
  const std::size_t keep = std::min(body.size(), room);
  lm::TokenSequence seq{ByteTokenizer::kBos};
  seq.insert(seq.end(), body.end() - static_cast<std::ptrdiff_t>(keep), body.end());
  return ByteTokenizer::decode(lm::generate_tokens(ckpt_, adapters(), seq, opts));
}

std::unique_ptr<Scorer> make_local_scorer(std::string_view spec) {
  if (!spec.starts_with("local:")) throw Error(ErrorCode::kInvalidArgument, "not a local scorer spec");
  const std::string rest(spec.substr(6));
  const auto plus = rest.find('+');
  const std::string ckpt_path = rest.substr(0, plus);
  std::optional<lora::AdapterSet<float>> adapters;
  if (plus != std::string::npos) adapters = lora::load_adapters(rest.substr(plus + 1));
  return std::make_unique<LocalScorer>(lm::load_checkpoint(ckpt_path), std::move(adapters), std::string(spec));
}

}  // namespace geolm::eval
