#include "geolm/lm/transformer.hpp"

#include <cmath>
#include <limits>

#include "geolm/common/error.hpp"

namespace geolm::lm {

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename T>
Matrix<T> layer_norm_forward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b, Matrix<T>& xhat,
                             std::vector<T>& rstd) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  xhat.resize(n, d);
  rstd.resize(static_cast<std::size_t>(n));
  Matrix<T> y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    const T var = (x.row(i).array() - mean).square().mean();
    const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    rstd[static_cast<std::size_t>(i)] = r;
    xhat.row(i) = (x.row(i).array() - mean) * r;
    y.row(i) = xhat.row(i).cwiseProduct(w.row(0)) + b.row(0);
  }
  return y;
}

// dw/db may be null when the norm parameters are frozen.
template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const Matrix<T>& xhat, const std::vector<T>& rstd,
                              const Matrix<T>& w, Matrix<T>* dw, Matrix<T>* db) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  if (dw) dw->row(0) += dy.cwiseProduct(xhat).colwise().sum();
  if (db) db->row(0) += dy.colwise().sum();
  Matrix<T> dx(n, d);
  const T inv_d = T(1) / static_cast<T>(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto dxhat = dy.row(i).cwiseProduct(w.row(0));
    const T mean_dxhat = dxhat.sum() * inv_d;
    const T mean_dxhat_xhat = dxhat.cwiseProduct(xhat.row(i)).sum() * inv_d;
    dx.row(i) = (dxhat.array() - mean_dxhat - xhat.row(i).array() * mean_dxhat_xhat) * rstd[static_cast<std::size_t>(i)];
  }
  return dx;
}

template <typename T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluK = static_cast<T>(0.044715);

template <typename T>
T gelu(T u) {
  return T(0.5) * u * (T(1) + std::tanh(kGeluC<T> * (u + kGeluK<T> * u * u * u)));
}

template <typename T>
T gelu_grad(T u) {
  const T t = std::tanh(kGeluC<T> * (u + kGeluK<T> * u * u * u));
  return T(0.5) * (T(1) + t) + T(0.5) * u * (T(1) - t * t) * kGeluC<T> * (T(1) + T(3) * kGeluK<T> * u * u);
}

template <typename Row>
std::vector<double> log_softmax_impl(const Row* row, int n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(row[i]));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(static_cast<double>(row[i]) - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(row[i]) - lse;
  return out;
}

}  // namespace

std::vector<double> log_softmax_row(const float* row, int n) { return log_softmax_impl(row, n); }
std::vector<double> log_softmax_row(const double* row, int n) { return log_softmax_impl(row, n); }

template <typename T>
struct Transformer<T>::Cache {
  struct Layer {
    Matrix<T> x_in;
    Matrix<T> xhat1;
    std::vector<T> rstd1;
    Matrix<T> h1;
    Matrix<T> q, k, v;
    std::array<Matrix<T>, 4> lora_u;  // x A^T per projection (q, k, v, o)
    std::vector<Matrix<T>> probs;     // per head, positions x positions
    Matrix<T> att;                    // concatenated head outputs, input of o_proj
    Matrix<T> x_mid;
    Matrix<T> xhat2;
    std::vector<T> rstd2;
    Matrix<T> h2;
    Matrix<T> up;
    Matrix<T> act;
  };
  std::vector<Layer> layers;
  Matrix<T> xhat_f;
  std::vector<T> rstd_f;
  Matrix<T> h_f;
};

template <typename T>
Transformer<T>::Transformer(const ModelConfig& cfg, const ParamSet<T>& params, const lora::AdapterSet<T>* adapters)
    : cfg_(cfg), params_(params), adapters_(adapters) {
  check_layout(cfg_, params_);
  if (adapters_) {
    lora::check_compatible(*adapters_, cfg_);
    lookup_ = adapters_->lookup(cfg_.n_layers);
  }
}

template <typename T>
Matrix<T> Transformer<T>::run_forward(std::span<const TokenId> tokens, Cache* cache) const {
  const int n = static_cast<int>(tokens.size());
  if (n > cfg_.context_len) {
    throw Error(ErrorCode::kSequenceTooLong,
                std::to_string(n) + " tokens exceed context of " + std::to_string(cfg_.context_len));
  }
  const int d = cfg_.d_model;
  const int heads = cfg_.n_heads;
  const int dh = cfg_.head_dim();
  const T att_scale = T(1) / std::sqrt(static_cast<T>(dh));
  const T lora_scale = adapters_ ? adapters_->scale() : T(0);

  Matrix<T> x(n, d);
  const auto& tok = params_[0].value;
  const auto& pos = params_[1].value;
  for (int i = 0; i < n; ++i) {
    const TokenId t = tokens[static_cast<std::size_t>(i)];
    if (t < 0 || t >= cfg_.vocab_size) throw Error(ErrorCode::kInvalidArgument, "token id out of range");
    x.row(i) = tok.row(t) + pos.row(i);
  }
  if (cache) cache->layers.resize(static_cast<std::size_t>(cfg_.n_layers));

  Matrix<T> xhat;
  std::vector<T> rstd;
  for (int l = 0; l < cfg_.n_layers; ++l) {
    auto P = [&](int slot) -> const Matrix<T>& { return params_[static_cast<std::size_t>(tensor_index(l, slot))].value; };
    typename Cache::Layer* lc = cache ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;

    auto project = [&](const Matrix<T>& in, int slot) {
      Matrix<T> y = in * P(slot).transpose();
      if (adapters_) {
        const int idx = lookup_[static_cast<std::size_t>(l)][static_cast<std::size_t>(slot - kQProj)];
        if (idx >= 0) {
          const auto& pair = adapters_->pairs[static_cast<std::size_t>(idx)];
          Matrix<T> u = in * pair.a.transpose();
          y.noalias() += lora_scale * (u * pair.b.transpose());
          if (lc) lc->lora_u[static_cast<std::size_t>(slot - kQProj)] = std::move(u);
        }
      }
      return y;
    };

    if (lc) lc->x_in = x;
    Matrix<T> h1 = layer_norm_forward(x, P(kLn1Weight), P(kLn1Bias), xhat, rstd);
    Matrix<T> q = project(h1, kQProj);
    Matrix<T> k = project(h1, kKProj);
    Matrix<T> v = project(h1, kVProj);

    Matrix<T> att(n, d);
    if (lc) lc->probs.assign(static_cast<std::size_t>(heads), Matrix<T>());
    for (int h = 0; h < heads; ++h) {
      Matrix<T> s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * att_scale;
      for (int i = 0; i < n; ++i) {
        T mx = s(i, 0);
        for (int j = 1; j <= i; ++j) mx = std::max(mx, s(i, j));
        T sum = 0;
        for (int j = 0; j <= i; ++j) {
          s(i, j) = std::exp(s(i, j) - mx);
          sum += s(i, j);
        }
        const T inv = T(1) / sum;
        for (int j = 0; j <= i; ++j) s(i, j) *= inv;
        for (int j = i + 1; j < n; ++j) s(i, j) = 0;
      }
      att.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
      if (lc) lc->probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    Matrix<T> o = project(att, kOProj);
    Matrix<T> x_mid = x + o;

    Matrix<T> xhat2;
    std::vector<T> rstd2;
    Matrix<T> h2 = layer_norm_forward(x_mid, P(kLn2Weight), P(kLn2Bias), xhat2, rstd2);
    Matrix<T> up = h2 * P(kMlpUp).transpose();
    up.rowwise() += P(kMlpUpBias).row(0);
    Matrix<T> act = up.unaryExpr([](T u) { return gelu(u); });
    Matrix<T> down = act * P(kMlpDown).transpose();
    down.rowwise() += P(kMlpDownBias).row(0);
    x = x_mid + down;

    if (lc) {
      lc->xhat1 = std::move(xhat);
      lc->rstd1 = std::move(rstd);
      lc->h1 = std::move(h1);
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->att = std::move(att);
      lc->x_mid = std::move(x_mid);
      lc->xhat2 = std::move(xhat2);
      lc->rstd2 = std::move(rstd2);
      lc->h2 = std::move(h2);
      lc->up = std::move(up);
      lc->act = std::move(act);
      xhat = Matrix<T>();
      rstd.clear();
    }
  }

  Matrix<T> xhat_f;
  std::vector<T> rstd_f;
  Matrix<T> h_f = layer_norm_forward(x, params_[static_cast<std::size_t>(ln_f_weight_index(cfg_))].value,
                                     params_[static_cast<std::size_t>(ln_f_bias_index(cfg_))].value, xhat_f, rstd_f);
  Matrix<T> logits = h_f * params_[static_cast<std::size_t>(lm_head_index(cfg_))].value.transpose();
  if (cache) {
    cache->xhat_f = std::move(xhat_f);
    cache->rstd_f = std::move(rstd_f);
    cache->h_f = std::move(h_f);
  }
  return logits;
}

template <typename T>
Matrix<T> Transformer<T>::logits(std::span<const TokenId> tokens) const {
  return run_forward(tokens, nullptr);
}

template <typename T>
SequenceLoss Transformer<T>::loss(std::span<const TokenId> tokens, std::span<const std::uint8_t> mask, T grad_scale,
                                  const Gradients<T>& grads) const {
  if (mask.size() != tokens.size()) throw Error(ErrorCode::kInvalidArgument, "mask length differs from tokens");
  const bool want_grad = grads.base || grads.adapters;
  Cache cache;
  const Matrix<T> logits = run_forward(tokens, want_grad ? &cache : nullptr);
  const int n = static_cast<int>(tokens.size());
  const int vocab = cfg_.vocab_size;

  SequenceLoss out;
  Matrix<T> dlogits;
  if (want_grad) dlogits = Matrix<T>::Zero(n, vocab);
  for (int i = 0; i + 1 < n; ++i) {
    if (!mask[static_cast<std::size_t>(i + 1)]) continue;
    const auto lsm = log_softmax_row(logits.row(i).data(), vocab);
    const int target = tokens[static_cast<std::size_t>(i + 1)];
    out.nll_sum -= lsm[static_cast<std::size_t>(target)];
    ++out.targets;
    if (want_grad) {
      for (int c = 0; c < vocab; ++c) dlogits(i, c) = static_cast<T>(std::exp(lsm[static_cast<std::size_t>(c)]));
      dlogits(i, target) -= T(1);
      dlogits.row(i) *= grad_scale;
    }
  }
  if (!want_grad || out.targets == 0) return out;

  ParamSet<T>* gb = grads.base;
  auto G = [&](int index) -> Matrix<T>* { return gb ? &(*gb)[static_cast<std::size_t>(index)].value : nullptr; };
  auto W = [&](int index) -> const Matrix<T>& { return params_[static_cast<std::size_t>(index)].value; };

  const int d = cfg_.d_model;
  const int heads = cfg_.n_heads;
  const int dh = cfg_.head_dim();
  const T att_scale = T(1) / std::sqrt(static_cast<T>(dh));
  const T lora_scale = adapters_ ? adapters_->scale() : T(0);

  // Output head and final norm.
  if (auto* g = G(lm_head_index(cfg_))) g->noalias() += dlogits.transpose() * cache.h_f;
  Matrix<T> dh_f = dlogits * W(lm_head_index(cfg_));
  Matrix<T> dx = layer_norm_backward(dh_f, cache.xhat_f, cache.rstd_f, W(ln_f_weight_index(cfg_)),
                                     G(ln_f_weight_index(cfg_)), G(ln_f_bias_index(cfg_)));

  for (int l = cfg_.n_layers - 1; l >= 0; --l) {
    const auto& lc = cache.layers[static_cast<std::size_t>(l)];
    auto idx = [&](int slot) { return tensor_index(l, slot); };

    // Backprop through a (possibly adapted) projection; returns d(input).
    auto project_back = [&](const Matrix<T>& dout, const Matrix<T>& in, int slot) {
      if (auto* g = G(idx(slot))) g->noalias() += dout.transpose() * in;
      Matrix<T> din = dout * W(idx(slot));
      if (adapters_) {
        const int pi = lookup_[static_cast<std::size_t>(l)][static_cast<std::size_t>(slot - kQProj)];
        if (pi >= 0) {
          const auto& pair = adapters_->pairs[static_cast<std::size_t>(pi)];
          const auto& u = lc.lora_u[static_cast<std::size_t>(slot - kQProj)];
          Matrix<T> du = lora_scale * (dout * pair.b);
          if (grads.adapters) {
            auto& gp = grads.adapters->pairs[static_cast<std::size_t>(pi)];
            gp.b.noalias() += lora_scale * (dout.transpose() * u);
            gp.a.noalias() += du.transpose() * in;
          }
          din.noalias() += du * pair.a;
        }
      }
      return din;
    };

    // MLP.
    if (auto* g = G(idx(kMlpDownBias))) g->row(0) += dx.colwise().sum();
    if (auto* g = G(idx(kMlpDown))) g->noalias() += dx.transpose() * lc.act;
    Matrix<T> dact = dx * W(idx(kMlpDown));
    Matrix<T> dup = dact.cwiseProduct(lc.up.unaryExpr([](T u) { return gelu_grad(u); }));
    if (auto* g = G(idx(kMlpUpBias))) g->row(0) += dup.colwise().sum();
    if (auto* g = G(idx(kMlpUp))) g->noalias() += dup.transpose() * lc.h2;
    Matrix<T> dh2 = dup * W(idx(kMlpUp));
    Matrix<T> dx_mid =
        dx + layer_norm_backward(dh2, lc.xhat2, lc.rstd2, W(idx(kLn2Weight)), G(idx(kLn2Weight)), G(idx(kLn2Bias)));

    // Attention.
    Matrix<T> datt = project_back(dx_mid, lc.att, kOProj);
    Matrix<T> dq(n, d), dk(n, d), dv(n, d);
    for (int h = 0; h < heads; ++h) {
      const auto& p = lc.probs[static_cast<std::size_t>(h)];
      const auto dout = datt.middleCols(h * dh, dh);
      Matrix<T> dp = dout * lc.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = p.transpose() * dout;
      Matrix<T> ds = Matrix<T>::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        T dot = 0;
        for (int j = 0; j <= i; ++j) dot += p(i, j) * dp(i, j);
        for (int j = 0; j <= i; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot) * att_scale;
      }
      dq.middleCols(h * dh, dh).noalias() = ds * lc.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * lc.q.middleCols(h * dh, dh);
    }
    Matrix<T> dh1 = project_back(dq, lc.h1, kQProj);
    dh1 += project_back(dk, lc.h1, kKProj);
    dh1 += project_back(dv, lc.h1, kVProj);
    dx = dx_mid +
         layer_norm_backward(dh1, lc.xhat1, lc.rstd1, W(idx(kLn1Weight)), G(idx(kLn1Weight)), G(idx(kLn1Bias)));
  }

  if (gb) {
    auto& gtok = (*gb)[0].value;
    auto& gpos = (*gb)[1].value;
    for (int i = 0; i < n; ++i) {
      gtok.row(tokens[static_cast<std::size_t>(i)]) += dx.row(i);
      gpos.row(i) += dx.row(i);
    }
  }
  return out;
}

template <typename T>
BatchLoss batch_loss(const ModelConfig& cfg, const ParamSet<T>& params, const lora::AdapterSet<T>* adapters,
                     std::span<const Example> batch, const Gradients<T>& grads) {
  std::size_t total = 0;
  for (const auto& ex : batch) {
    if (ex.mask.size() != ex.tokens.size()) throw Error(ErrorCode::kInvalidArgument, "mask length differs from tokens");
    for (std::size_t j = 1; j < ex.mask.size(); ++j) total += ex.mask[j] ? 1 : 0;
  }
  if (total == 0) throw Error(ErrorCode::kAllMasked, "batch has no unmasked target");
  const Transformer<T> model(cfg, params, adapters);
  const T scale = T(1) / static_cast<T>(total);
  double sum = 0.0;
  for (const auto& ex : batch) sum += model.loss(ex.tokens, ex.mask, scale, grads).nll_sum;
  return {sum / static_cast<double>(total), total};
}

template class Transformer<float>;
template class Transformer<double>;
template BatchLoss batch_loss<float>(const ModelConfig&, const ParamSet<float>&, const lora::AdapterSet<float>*,
                                     std::span<const Example>, const Gradients<float>&);
template BatchLoss batch_loss<double>(const ModelConfig&, const ParamSet<double>&, const lora::AdapterSet<double>*,
                                      std::span<const Example>, const Gradients<double>&);

}  // namespace geolm::lm
