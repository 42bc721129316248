#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "amlgraph/baselines/classifier.hpp"

namespace amlgraph {

struct LogRegConfig {
  double lr = 0.5;
  std::size_t epochs = 500;
  double l2 = 1e-4;
  std::vector<double> class_weights = {0.3, 0.7};  // licit, illicit
};

struct ObjectiveAndGrad {
  double value = 0.0;
  std::vector<double> grad;  // w[0..F) then bias
};

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Class-weighted mean log-loss plus (l2 / 2)·|w|² (bias unpenalised).
/// `params` holds F weights followed by the bias.
inline ObjectiveAndGrad logreg_objective(std::span<const double> params, const Matrix& x, std::span<const int> t,
                                         std::span<const double> class_weights, double l2) {
  const std::size_t f = x.cols();
  require<ShapeError>(params.size() == f + 1, "logreg_objective: parameter count mismatch");
  ObjectiveAndGrad out{0.0, std::vector<double>(f + 1, 0.0)};
  double wsum = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    double z = params[f];
    for (std::size_t j = 0; j < f; ++j) z += params[j] * row[j];
    const double c = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(t[i])];
    wsum += c;
    // log(1 + e^z) − t z, computed stably.
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    out.value += c * (softplus - t[i] * z);
    const double d = c * (sigmoid(z) - t[i]);
    for (std::size_t j = 0; j < f; ++j) out.grad[j] += d * row[j];
    out.grad[f] += d;
  }
  if (wsum > 0.0) {
    out.value /= wsum;
    for (auto& g : out.grad) g /= wsum;
  }
  for (std::size_t j = 0; j < f; ++j) {
    out.value += 0.5 * l2 * params[j] * params[j];
    out.grad[j] += l2 * params[j];
  }
  return out;
}

/// Sigmoid of a linear score on standardised features.
class LogisticRegressionClassifier final : public Classifier {
 public:
  LogisticRegressionClassifier(Standardizer scaler, std::vector<double> params)
      : scaler_(std::move(scaler)), params_(std::move(params)) {}

  std::string family() const override { return "logreg"; }

  std::vector<double> predict_score(const Matrix& x) const override {
    const Matrix z = scaler_.transform(x);
    const std::size_t f = z.cols();
    std::vector<double> s(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double v = params_[f];
      auto row = z.row(i);
      for (std::size_t j = 0; j < f; ++j) v += params_[j] * row[j];
      s[i] = sigmoid(v);
    }
    return s;
  }

  void save(Checkpoint& ck) const override {
    scaler_.save(ck, "logreg/scaler");
    ck.put_vector("logreg/params", params_);
  }

  static std::unique_ptr<LogisticRegressionClassifier> load(const Checkpoint& ck) {
    return std::make_unique<LogisticRegressionClassifier>(Standardizer::load(ck, "logreg/scaler"),
                                                          ck.get("logreg/params").values());
  }

  const std::vector<double>& params() const noexcept { return params_; }

 private:
  Standardizer scaler_;
  std::vector<double> params_;
};

/// Full-batch gradient descent from zero weights.
inline std::unique_ptr<LogisticRegressionClassifier> train_logreg(const Matrix& x, std::span<const Label> y,
                                                                  const LogRegConfig& cfg = {}) {
  require(x.rows() > 0, "logreg: empty input");
  require<ShapeError>(y.size() == x.rows(), "logreg: label count does not match rows");
  require(cfg.lr > 0.0, "logreg: lr must be positive");
  const auto t = binary_targets(y);
  auto scaler = Standardizer::fit(x);
  const Matrix z = scaler.transform(x);
  std::vector<double> params(z.cols() + 1, 0.0);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto og = logreg_objective(params, z, t, cfg.class_weights, cfg.l2);
    if (!std::isfinite(og.value)) throw TrainingError("logreg: non-finite loss at epoch " + std::to_string(e));
    for (std::size_t j = 0; j < params.size(); ++j) params[j] -= cfg.lr * og.grad[j];
  }
  return std::make_unique<LogisticRegressionClassifier>(std::move(scaler), std::move(params));
}

struct SvcConfig {
  double lambda = 1e-3;
  std::size_t epochs = 300;
  std::vector<double> class_weights = {0.3, 0.7};
};

/// λ/2·|w̃|² + Σ c_i max(0, 1 − y_i w̃·[x_i, 1]) / Σ c_i, y_i ∈ {−1, +1}.
/// The bias is the last entry of w̃ and is regularised with the weights.
inline double svc_objective(std::span<const double> w, const Matrix& x, std::span<const int> t,
                            std::span<const double> class_weights, double lambda) {
  const std::size_t f = x.cols();
  double reg = 0.0;
  for (double v : w) reg += v * v;
  double loss = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double m = w[f];
    auto row = x.row(i);
    for (std::size_t j = 0; j < f; ++j) m += w[j] * row[j];
    const double yi = t[i] ? 1.0 : -1.0;
    const double c = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(t[i])];
    loss += c * std::max(0.0, 1.0 - yi * m);
    wsum += c;
  }
  return 0.5 * lambda * reg + (wsum > 0.0 ? loss / wsum : 0.0);
}

/// Linear SVM; predicts illicit when the margin is positive.
class LinearSvcClassifier final : public Classifier {
 public:
  LinearSvcClassifier(Standardizer scaler, std::vector<double> w) : scaler_(std::move(scaler)), w_(std::move(w)) {}

  std::string family() const override { return "svc"; }

  /// Signed margin.
  std::vector<double> predict_score(const Matrix& x) const override {
    const Matrix z = scaler_.transform(x);
    const std::size_t f = z.cols();
    std::vector<double> s(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double m = w_[f];
      auto row = z.row(i);
      for (std::size_t j = 0; j < f; ++j) m += w_[j] * row[j];
      s[i] = m;
    }
    return s;
  }

  void save(Checkpoint& ck) const override {
    scaler_.save(ck, "svc/scaler");
    ck.put_vector("svc/weights", w_);
  }

  static std::unique_ptr<LinearSvcClassifier> load(const Checkpoint& ck) {
    return std::make_unique<LinearSvcClassifier>(Standardizer::load(ck, "svc/scaler"), ck.get("svc/weights").values());
  }

  const std::vector<double>& weights() const noexcept { return w_; }

 protected:
  double decision_threshold() const override { return 0.0; }

 private:
  Standardizer scaler_;
  std::vector<double> w_;
};

/// Deterministic full-batch Pegasos: step 1/(λ t), projection onto the
/// ball of radius 1/√λ, and the running average of iterates as the model.
/// When `objective_trace` is given it receives the averaged iterate's
/// objective after each epoch.
inline std::unique_ptr<LinearSvcClassifier> train_linear_svc(const Matrix& x, std::span<const Label> y,
                                                             const SvcConfig& cfg = {},
                                                             std::vector<double>* objective_trace = nullptr) {
  require(x.rows() > 0, "svc: empty input");
  require<ShapeError>(y.size() == x.rows(), "svc: label count does not match rows");
  require(cfg.lambda > 0.0, "svc: lambda must be positive");
  const auto t = binary_targets(y);
  auto scaler = Standardizer::fit(x);
  const Matrix z = scaler.transform(x);
  const std::size_t f = z.cols();
  std::vector<double> w(f + 1, 0.0), avg(f + 1, 0.0), g(f + 1);
  double wsum = 0.0;
  for (int ti : t) wsum += cfg.class_weights.empty() ? 1.0 : cfg.class_weights[static_cast<std::size_t>(ti)];
  const double radius = 1.0 / std::sqrt(cfg.lambda);
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    for (std::size_t j = 0; j <= f; ++j) g[j] = cfg.lambda * w[j];
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      double m = w[f];
      for (std::size_t j = 0; j < f; ++j) m += w[j] * row[j];
      const double yi = t[i] ? 1.0 : -1.0;
      if (yi * m >= 1.0) continue;
      const double c = (cfg.class_weights.empty() ? 1.0 : cfg.class_weights[static_cast<std::size_t>(t[i])]) / wsum;
      for (std::size_t j = 0; j < f; ++j) g[j] -= c * yi * row[j];
      g[f] -= c * yi;
    }
    const double eta = 1.0 / (cfg.lambda * static_cast<double>(e));
    double norm = 0.0;
    for (std::size_t j = 0; j <= f; ++j) {
      w[j] -= eta * g[j];
      norm += w[j] * w[j];
    }
    norm = std::sqrt(norm);
    if (norm > radius)
      for (auto& v : w) v *= radius / norm;
    for (std::size_t j = 0; j <= f; ++j) avg[j] += (w[j] - avg[j]) / static_cast<double>(e);
    if (!std::all_of(avg.begin(), avg.end(), [](double v) { return std::isfinite(v); }))
      throw TrainingError("svc: non-finite weights at epoch " + std::to_string(e));
    if (objective_trace) objective_trace->push_back(svc_objective(avg, z, t, cfg.class_weights, cfg.lambda));
  }
  return std::make_unique<LinearSvcClassifier>(std::move(scaler), std::move(avg));
}

}  // namespace amlgraph
