#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "amlgraph/matrix.hpp"
#include "amlgraph/random.hpp"

namespace amlgraph::nn {

enum class Mode { Train, Eval };

/// A trainable tensor and its accumulated gradient.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
  void zero_grad() { grad.fill(0.0); }
};

using ParamRefs = std::vector<Param*>;
using ConstParamRefs = std::vector<const Param*>;

inline void zero_grads(const ParamRefs& ps) {
  for (auto* p : ps) p->zero_grad();
}

inline std::size_t count_parameters(const ConstParamRefs& ps) {
  std::size_t n = 0;
  for (const auto* p : ps) n += p->value.size();
  return n;
}
inline std::size_t count_parameters(const ParamRefs& ps) { return count_parameters(ConstParamRefs(ps.begin(), ps.end())); }

/// Glorot-uniform fill: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (auto& v : w.values()) v = rng.uniform(-a, a);
  return w;
}

/// y = x W + b. Caches its input for backward.
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, std::size_t in, std::size_t out, Rng& rng)
      : w_(name + "/kernel", glorot_uniform(in, out, rng)), b_(name + "/bias", Matrix(1, out)) {}

  std::size_t in_features() const noexcept { return w_.value.rows(); }
  std::size_t out_features() const noexcept { return w_.value.cols(); }

  Matrix forward(const Matrix& x) {
    require<ShapeError>(x.cols() == in_features(), w_.name + ": input width " + std::to_string(x.cols()) +
                                                       ", expected " + std::to_string(in_features()));
    input_ = x;
    return add_bias(matmul(x, w_.value), b_.value);
  }

  /// Forward pass without caching, for inference.
  Matrix apply(const Matrix& x) const {
    require<ShapeError>(x.cols() == in_features(), w_.name + ": input width " + std::to_string(x.cols()) +
                                                       ", expected " + std::to_string(in_features()));
    return add_bias(matmul(x, w_.value), b_.value);
  }

  /// Accumulates parameter gradients; returns dL/dx.
  Matrix backward(const Matrix& grad_out) {
    w_.grad += matmul_tn(input_, grad_out);
    b_.grad += column_sums(grad_out);
    return matmul_nt(grad_out, w_.value);
  }

  Param& weight() noexcept { return w_; }
  Param& bias() noexcept { return b_; }
  const Param& weight() const noexcept { return w_; }
  const Param& bias() const noexcept { return b_; }
  ParamRefs params() { return {&w_, &b_}; }
  ConstParamRefs params() const { return {&w_, &b_}; }

 private:
  Param w_;
  Param b_;
  Matrix input_;
};

/// Dense followed by ReLU.
class DenseRelu {
 public:
  DenseRelu() = default;
  DenseRelu(std::string name, std::size_t in, std::size_t out, Rng& rng) : dense_(std::move(name), in, out, rng) {}

  Matrix forward(const Matrix& x) {
    pre_ = dense_.forward(x);
    return relu(pre_);
  }
  Matrix apply(const Matrix& x) const { return relu(dense_.apply(x)); }
  Matrix backward(const Matrix& grad_out) { return dense_.backward(relu_backward(grad_out, pre_)); }

  Dense& dense() noexcept { return dense_; }
  const Dense& dense() const noexcept { return dense_; }
  ParamRefs params() { return dense_.params(); }
  ConstParamRefs params() const { return dense_.params(); }

 private:
  Dense dense_;
  Matrix pre_;
};

/// Inverted dropout. Eval mode (or rate 0) is the identity.
class Dropout {
 public:
  explicit Dropout(double rate = 0.0) : rate_(rate) {
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  }

  Matrix forward(const Matrix& x, Mode mode, Rng& rng) {
    active_ = mode == Mode::Train && rate_ > 0.0;
    if (!active_) return x;
    mask_ = Matrix(x.rows(), x.cols());
    const double keep = 1.0 / (1.0 - rate_);
    Matrix y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double m = rng.uniform() < rate_ ? 0.0 : keep;
      mask_.values()[i] = m;
      y.values()[i] *= m;
    }
    return y;
  }

  Matrix backward(const Matrix& grad_out) const {
    if (!active_) return grad_out;
    Matrix g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] *= mask_.values()[i];
    return g;
  }

  double rate() const noexcept { return rate_; }

 private:
  double rate_;
  bool active_ = false;
  Matrix mask_;
};

inline Matrix dropout(const Matrix& x, double rate, Mode mode, Rng& rng) {
  Dropout d(rate);
  return d.forward(x, mode, rng);
}

/// Batch normalisation over rows. Train mode normalises with batch
/// statistics and updates the running estimates used in eval mode.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(std::string name, std::size_t width, double momentum = 0.99, double eps = 1e-3)
      : gamma_(name + "/gamma", Matrix(1, width, 1.0)),
        beta_(name + "/beta", Matrix(1, width)),
        running_mean_(1, width),
        running_var_(1, width, 1.0),
        momentum_(momentum),
        eps_(eps) {}

  Matrix forward(const Matrix& x, Mode mode) {
    const std::size_t n = x.rows(), f = x.cols();
    require<ShapeError>(f == gamma_.value.cols(), gamma_.name + ": width mismatch");
    Matrix mean(1, f), var(1, f);
    if (mode == Mode::Train && n > 0) {
      mean = column_sums(x);
      mean *= 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) {
          const double d = x(i, j) - mean(0, j);
          var(0, j) += d * d;
        }
      var *= 1.0 / static_cast<double>(n);
      for (std::size_t j = 0; j < f; ++j) {
        running_mean_(0, j) = momentum_ * running_mean_(0, j) + (1.0 - momentum_) * mean(0, j);
        running_var_(0, j) = momentum_ * running_var_(0, j) + (1.0 - momentum_) * var(0, j);
      }
    } else {
      mean = running_mean_;
      var = running_var_;
    }
    inv_std_ = Matrix(1, f);
    for (std::size_t j = 0; j < f; ++j) inv_std_(0, j) = 1.0 / std::sqrt(var(0, j) + eps_);
    xhat_ = Matrix(n, f);
    Matrix y(n, f);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) {
        xhat_(i, j) = (x(i, j) - mean(0, j)) * inv_std_(0, j);
        y(i, j) = gamma_.value(0, j) * xhat_(i, j) + beta_.value(0, j);
      }
    train_stats_ = mode == Mode::Train;
    return y;
  }

  /// Eval-mode normalisation without touching cached state.
  Matrix apply(const Matrix& x) const {
    require<ShapeError>(x.cols() == gamma_.value.cols(), gamma_.name + ": width mismatch");
    Matrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j)
        y(i, j) = gamma_.value(0, j) * (x(i, j) - running_mean_(0, j)) / std::sqrt(running_var_(0, j) + eps_) +
                  beta_.value(0, j);
    return y;
  }

  Matrix backward(const Matrix& grad_out) {
    const std::size_t n = grad_out.rows(), f = grad_out.cols();
    Matrix dx(n, f);
    for (std::size_t j = 0; j < f; ++j) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum_dy += grad_out(i, j);
        sum_dy_xhat += grad_out(i, j) * xhat_(i, j);
      }
      gamma_.grad(0, j) += sum_dy_xhat;
      beta_.grad(0, j) += sum_dy;
      const double g = gamma_.value(0, j) * inv_std_(0, j);
      for (std::size_t i = 0; i < n; ++i) {
        dx(i, j) = train_stats_ ? g * (grad_out(i, j) - sum_dy / static_cast<double>(n) -
                                       xhat_(i, j) * sum_dy_xhat / static_cast<double>(n))
                                : g * grad_out(i, j);
      }
    }
    return dx;
  }

  ParamRefs params() { return {&gamma_, &beta_}; }
  ConstParamRefs params() const { return {&gamma_, &beta_}; }
  const Matrix& running_mean() const noexcept { return running_mean_; }
  const Matrix& running_var() const noexcept { return running_var_; }
  Matrix& running_mean() noexcept { return running_mean_; }
  Matrix& running_var() noexcept { return running_var_; }
  std::size_t non_trainable_count() const noexcept { return running_mean_.size() + running_var_.size(); }

 private:
  Param gamma_;
  Param beta_;
  Matrix running_mean_;
  Matrix running_var_;
  double momentum_ = 0.99;
  double eps_ = 1e-3;
  Matrix xhat_;
  Matrix inv_std_;
  bool train_stats_ = false;
};

/// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto row = p.row(i);
    double mx = row.empty() ? 0.0 : row[0];
    for (double v : row) mx = std::max(mx, v);
    double s = 0.0;
    for (auto& v : row) s += (v = std::exp(v - mx));
    for (auto& v : row) v /= s;
  }
  return p;
}

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Class-weighted mean negative log-likelihood of a softmax head.
///
/// Only `rows` contribute (all rows when empty); other rows get zero
/// gradient. `class_weights` has one entry per class, or is empty for
/// unit weights. loss = Σ w_{y_i}·(−log p_{i,y_i}) / Σ w_{y_i} and
/// grad_i = w_{y_i}·(p_i − onehot(y_i)) / Σ w_{y_i}.
inline LossAndGrad softmax_xent(const Matrix& logits, std::span<const int> labels,
                                std::span<const double> class_weights = {},
                                std::span<const std::size_t> rows = {}) {
  const std::size_t c = logits.cols();
  require(c >= 2, "softmax_xent: need at least two classes");
  require<ShapeError>(labels.size() == logits.rows(), "softmax_xent: label count does not match logits rows");
  require<ShapeError>(class_weights.empty() || class_weights.size() == c, "softmax_xent: one weight per class");
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(logits.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  LossAndGrad out{0.0, Matrix(logits.rows(), c)};
  double weight_sum = 0.0;
  for (auto i : rows) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw ArgumentError("softmax_xent: label " + std::to_string(y) + " out of range");
    weight_sum += class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y)];
  }
  if (rows.empty() || weight_sum <= 0.0) return out;
  for (auto i : rows) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const double w = class_weights.empty() ? 1.0 : class_weights[y];
    auto z = logits.row(i);
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    const double log_s = std::log(s);
    out.loss += w * (log_s - (z[y] - mx));
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < c; ++j) g[j] = w * (std::exp(z[j] - mx - log_s) - (j == y ? 1.0 : 0.0)) / weight_sum;
  }
  out.loss /= weight_sum;
  if (!std::isfinite(out.loss)) throw TrainingError("softmax_xent: non-finite loss");
  return out;
}

/// Rows of M gathered by index: out[e] = M[idx[e]].
inline Matrix gather_rows(const Matrix& m, std::span<const std::uint32_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t e = 0; e < idx.size(); ++e) {
    require(idx[e] < m.rows(), "gather_rows: index out of range");
    std::copy(m.row(idx[e]).begin(), m.row(idx[e]).end(), out.row(e).begin());
  }
  return out;
}

namespace detail {

/// Row positions grouped by segment (CSR layout), stable within a segment.
struct SegmentIndex {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> rows;
};

inline SegmentIndex group_by_segment(std::span<const std::uint32_t> ids, std::size_t n_segments, const char* op) {
  SegmentIndex ix;
  ix.offsets.assign(n_segments + 1, 0);
  for (auto id : ids) {
    if (id >= n_segments) throw ArgumentError(std::string(op) + ": segment id " + std::to_string(id) + " out of range");
    ++ix.offsets[id + 1];
  }
  std::partial_sum(ix.offsets.begin(), ix.offsets.end(), ix.offsets.begin());
  ix.rows.resize(ids.size());
  std::vector<std::size_t> cursor(ix.offsets.begin(), ix.offsets.end() - 1);
  for (std::size_t e = 0; e < ids.size(); ++e) ix.rows[cursor[ids[e]]++] = e;
  return ix;
}

}  // namespace detail

/// out[s] = Σ_{e : ids[e] = s} M[e]; empty segments are zero rows.
///
/// Within a segment, rows are added in lexicographic order of their
/// contents, so the result is bitwise independent of how rows and ids are
/// ordered.
inline Matrix segment_sum(const Matrix& m, std::span<const std::uint32_t> ids, std::size_t n_segments) {
  require<ShapeError>(ids.size() == m.rows(), "segment_sum: one id per row");
  const auto ix = detail::group_by_segment(ids, n_segments, "segment_sum");
  Matrix out(n_segments, m.cols());
  std::vector<std::size_t> members;
  for (std::size_t s = 0; s < n_segments; ++s) {
    members.assign(ix.rows.begin() + static_cast<std::ptrdiff_t>(ix.offsets[s]),
                   ix.rows.begin() + static_cast<std::ptrdiff_t>(ix.offsets[s + 1]));
    if (members.size() > 2) {
      std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        auto ra = m.row(a), rb = m.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
      });
    }
    auto dst = out.row(s);
    for (auto e : members) {
      auto src = m.row(e);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
  }
  return out;
}

/// Within each segment, softmax of the scores (max-subtracted). The
/// normaliser sums exponentials in ascending order, independent of input
/// order.
inline std::vector<double> segment_softmax(std::span<const double> scores, std::span<const std::uint32_t> ids,
                                           std::size_t n_segments) {
  require<ShapeError>(ids.size() == scores.size(), "segment_softmax: one id per score");
  const auto ix = detail::group_by_segment(ids, n_segments, "segment_softmax");
  std::vector<double> out(scores.size()), terms;
  for (std::size_t s = 0; s < n_segments; ++s) {
    const auto b = ix.offsets[s], e = ix.offsets[s + 1];
    if (b == e) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (auto k = b; k < e; ++k) mx = std::max(mx, scores[ix.rows[k]]);
    terms.clear();
    for (auto k = b; k < e; ++k) terms.push_back(out[ix.rows[k]] = std::exp(scores[ix.rows[k]] - mx));
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += t;
    for (auto k = b; k < e; ++k) out[ix.rows[k]] /= sum;
  }
  return out;
}

/// Backward of segment_softmax: dscore_e = α_e (dα_e − Σ_{f in seg(e)} α_f dα_f).
inline std::vector<double> segment_softmax_backward(std::span<const double> alpha, std::span<const double> grad_alpha,
                                                    std::span<const std::uint32_t> ids, std::size_t n_segments) {
  std::vector<double> dot(n_segments, 0.0), out(alpha.size());
  for (std::size_t e = 0; e < ids.size(); ++e) dot[ids[e]] += alpha[e] * grad_alpha[e];
  for (std::size_t e = 0; e < ids.size(); ++e) out[e] = alpha[e] * (grad_alpha[e] - dot[ids[e]]);
  return out;
}

struct RmsPropConfig {
  double lr = 1e-3;
  double rho = 0.9;
  double momentum = 0.9;
  double eps = 1e-8;
};

/// RMSprop with momentum:
///   v ← ρ v + (1 − ρ) g²
///   m ← μ m + lr · g / √(v + ε)
///   p ← p − m
class RmsProp {
 public:
  explicit RmsProp(RmsPropConfig cfg = {}) : cfg_(cfg) {
    require(cfg.lr > 0.0, "rmsprop: lr must be positive");
  }

  void step(const ParamRefs& params) {
    if (v_.empty()) {
      for (const auto* p : params) {
        v_.emplace_back(p->value.rows(), p->value.cols());
        m_.emplace_back(p->value.rows(), p->value.cols());
      }
    }
    require<ShapeError>(v_.size() == params.size(), "rmsprop: parameter set changed");
    for (std::size_t k = 0; k < params.size(); ++k) {
      Param& p = *params[k];
      require<ShapeError>(p.grad.same_shape(p.value) && v_[k].same_shape(p.value),
                          "rmsprop: shape mismatch for " + p.name);
      auto& v = v_[k].values();
      auto& m = m_[k].values();
      auto& w = p.value.values();
      const auto& g = p.grad.values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = cfg_.rho * v[i] + (1.0 - cfg_.rho) * g[i] * g[i];
        m[i] = cfg_.momentum * m[i] + cfg_.lr * g[i] / std::sqrt(v[i] + cfg_.eps);
        w[i] -= m[i];
      }
    }
  }

  const RmsPropConfig& config() const noexcept { return cfg_; }
  const std::vector<Matrix>& square_avg() const noexcept { return v_; }
  const std::vector<Matrix>& momentum_buffer() const noexcept { return m_; }

 private:
  RmsPropConfig cfg_;
  std::vector<Matrix> v_;
  std::vector<Matrix> m_;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "param[index]" of the worst entry
};

/// Relative error |a − n| / max(|a|, |n|, floor). The floor keeps entries
/// whose true gradient is zero from dividing finite-difference noise by ~0.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares analytic gradients against central differences.
///
/// `loss` evaluates the scalar objective at the current parameter values;
/// `backward` must leave dloss/dparam in each Param::grad (it is called once,
/// after zeroing). Parameters are restored exactly afterwards.
inline GradCheckResult grad_check(const std::function<double()>& loss, const std::function<void()>& backward,
                                  const ParamRefs& params, double h = 1e-5) {
  zero_grads(params);
  backward();
  std::vector<Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k]->value.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + h;
      const double fp = loss();
      w[i] = orig - h;
      const double fm = loss();
      w[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = relative_error(analytic[k].values()[i], numeric);
      if (err > res.max_rel_error || res.worst.empty()) {
        res.max_rel_error = err;
        res.worst = params[k]->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace amlgraph::nn
