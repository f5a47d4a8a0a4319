#include "geolm/lm/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "geolm/common/error.hpp"
#include "geolm/common/hash.hpp"
#include "geolm/common/rng.hpp"
#include "geolm/lm/transformer.hpp"

namespace geolm::lm {

double TrainSchedule::lr_at(int step) const {
  const int w = effective_warmup();
  if (w <= 0 || step >= w) return learning_rate;
  return learning_rate * static_cast<double>(step) / static_cast<double>(w);
}

std::vector<int> TrainSchedule::checkpoint_steps() const {
  std::vector<int> out;
  if (checkpoint_every > 0) {
    for (int s = checkpoint_every; s < total_steps; s += checkpoint_every) out.push_back(s);
  }
  if (total_steps > 0) out.push_back(total_steps);
  return out;
}

void TrainSchedule::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning_rate must be positive");
  if (global_batch <= 0 || micro_batch <= 0) throw Error(ErrorCode::kInvalidArgument, "batch sizes must be positive");
  if (micro_batch > global_batch) throw Error(ErrorCode::kInvalidArgument, "micro_batch exceeds global_batch");
  if (total_steps < 0) throw Error(ErrorCode::kInvalidArgument, "total_steps must be >= 0");
  if (effective_warmup() > total_steps) throw Error(ErrorCode::kInvalidArgument, "warmup_steps exceeds total_steps");
  if (checkpoint_every < 0) throw Error(ErrorCode::kInvalidArgument, "checkpoint_every must be >= 0");
  if (grad_clip < 0.0) throw Error(ErrorCode::kInvalidArgument, "grad_clip must be >= 0");
}

Json TrainSchedule::to_json() const {
  return Json{{"learning_rate", learning_rate}, {"global_batch", global_batch},
              {"micro_batch", micro_batch},     {"total_steps", total_steps},
              {"warmup_steps", warmup_steps},   {"checkpoint_every", checkpoint_every},
              {"seed", seed},                   {"grad_clip", grad_clip}};
}

TrainSchedule TrainSchedule::from_json(const Json& j) {
  TrainSchedule s;
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.global_batch = j.value("global_batch", s.global_batch);
  s.micro_batch = j.value("micro_batch", std::min(s.micro_batch, s.global_batch));
  s.total_steps = j.value("total_steps", s.total_steps);
  s.warmup_steps = j.value("warmup_steps", s.warmup_steps);
  s.checkpoint_every = j.value("checkpoint_every", s.checkpoint_every);
  s.seed = j.value("seed", s.seed);
  s.grad_clip = j.value("grad_clip", s.grad_clip);
  s.validate();
  return s;
}

void Adam::step(std::span<Matrix<float>* const> params, std::span<const Matrix<float>* const> grads, double lr) {
  if (params.size() != grads.size()) throw Error(ErrorCode::kInvalidArgument, "parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix<float>::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix<float>::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) throw Error(ErrorCode::kInvalidArgument, "optimizer bound to a different tensor set");
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  const float step = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = m_[i];
    auto& v = v_[i];
    const auto& g = *grads[i];
    m = static_cast<float>(kBeta1) * m + static_cast<float>(1.0 - kBeta1) * g;
    v = static_cast<float>(kBeta2) * v + static_cast<float>(1.0 - kBeta2) * g.cwiseProduct(g);
    params[i]->array() -= step * m.array() / ((v.array() * inv_c2).sqrt() + static_cast<float>(kEps));
  }
}

double clip_global_norm(std::span<Matrix<float>* const> grads, double max_norm) {
  double sq = 0.0;
  for (const auto* g : grads) sq += g->template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float s = static_cast<float>(max_norm / norm);
    for (auto* g : grads) *g *= s;
  }
  return norm;
}

std::vector<TokenSequence> documents_from_stream(std::span<const TokenId> stream, int context_len) {
  if (context_len < 2) throw Error(ErrorCode::kInvalidArgument, "context_len must be >= 2");
  const std::size_t piece = static_cast<std::size_t>(context_len - 1);
  std::vector<TokenSequence> out;
  auto emit = [&](std::size_t begin, std::size_t end) {
    if (end > begin && stream[end - 1] == '\n') --end;
    if (end > begin && stream[begin] == '\n') ++begin;
    for (std::size_t p = begin; p < end; p += piece) {
      TokenSequence seq{ByteTokenizer::kBos};
      const std::size_t stop = std::min(end, p + piece);
      seq.insert(seq.end(), stream.begin() + static_cast<std::ptrdiff_t>(p),
                 stream.begin() + static_cast<std::ptrdiff_t>(stop));
      out.push_back(std::move(seq));
    }
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (stream[i] == ByteTokenizer::kDocBoundary) {
      emit(start, i);
      start = i + 1;
    }
  }
  emit(start, stream.size());
  return out;
}

std::string loss_log_csv(const std::vector<StepLog>& log) {
  std::ostringstream os;
  os.precision(9);
  os << "step,loss,lr,tokens_seen\n";
  for (const auto& row : log) os << row.step << ',' << row.loss << ',' << row.lr << ',' << row.tokens_seen << '\n';
  return os.str();
}

namespace {

// Seeded epoch permutations over the sequence list; the position of global
// draw g is fully determined by (seed, g).
class DataOrder {
 public:
  DataOrder(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::size_t at(std::uint64_t g) {
    const std::uint64_t epoch = g / n_;
    if (epoch != epoch_ || perm_.empty()) {
      perm_.resize(n_);
      std::iota(perm_.begin(), perm_.end(), std::size_t{0});
      SplitMix64 rng(mix64(seed_, epoch));
      seeded_shuffle(perm_, rng);
      epoch_ = epoch;
    }
    return perm_[static_cast<std::size_t>(g % n_)];
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> perm_;
};

}  // namespace

TrainResult train(const Checkpoint& start, std::span<const TokenSequence> sequences, const TrainSchedule& sched,
                  const CheckpointSink& sink) {
  sched.validate();
  std::vector<Example> data;
  for (const auto& s : sequences) {
    if (s.size() < 2) continue;
    if (static_cast<int>(s.size()) > start.config.context_len) {
      throw Error(ErrorCode::kSequenceTooLong, "training sequence longer than context");
    }
    data.push_back({s, std::vector<std::uint8_t>(s.size(), 1)});
  }
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "no training sequence with at least two tokens");

  TrainResult result;
  result.final = start;
  result.final.rng_state = sched.seed;
  Checkpoint& ck = result.final;
  ParamSet<float> grads = ck.params.zeros_like();
  std::vector<Matrix<float>*> param_ptrs;
  std::vector<Matrix<float>*> grad_ptrs;
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    param_ptrs.push_back(&ck.params[i].value);
    grad_ptrs.push_back(&grads[i].value);
  }
  std::vector<const Matrix<float>*> grad_cptrs(grad_ptrs.begin(), grad_ptrs.end());

  Adam adam;
  DataOrder order(data.size(), sched.seed);
  const auto ckpt_steps = sched.checkpoint_steps();
  std::uint64_t tokens_seen = 0;
  std::uint64_t draw = 0;
  const std::uint64_t step0 = start.step;

  for (int k = 1; k <= sched.total_steps; ++k) {
    std::vector<const Example*> batch;
    for (int i = 0; i < sched.global_batch; ++i) batch.push_back(&data[order.at(draw++)]);
    std::size_t targets = 0;
    for (const auto* ex : batch) targets += ex->tokens.size() - 1;

    grads.set_zero();
    const Transformer<float> model(ck.config, ck.params);
    const float scale = 1.0f / static_cast<float>(targets);
    double nll = 0.0;
    for (std::size_t mb = 0; mb < batch.size(); mb += static_cast<std::size_t>(sched.micro_batch)) {
      const std::size_t end = std::min(batch.size(), mb + static_cast<std::size_t>(sched.micro_batch));
      for (std::size_t i = mb; i < end; ++i) {
        nll += model.loss(batch[i]->tokens, batch[i]->mask, scale, Gradients<float>{&grads, nullptr}).nll_sum;
        tokens_seen += batch[i]->tokens.size();
      }
    }
    if (sched.grad_clip > 0.0) clip_global_norm(grad_ptrs, sched.grad_clip);
    const double lr = sched.lr_at(k);
    adam.step(param_ptrs, grad_cptrs, lr);
    ck.step = step0 + static_cast<std::uint64_t>(k);
    result.log.push_back({ck.step, nll / static_cast<double>(targets), lr, tokens_seen});

    if (std::find(ckpt_steps.begin(), ckpt_steps.end(), k) != ckpt_steps.end()) {
      result.checkpoint_steps.push_back(ck.step);
      if (sink) sink(ck);
    }
  }
  return result;
}

}  // namespace geolm::lm
