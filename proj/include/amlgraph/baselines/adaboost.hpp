#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "amlgraph/baselines/tree.hpp"

namespace amlgraph {

struct AdaBoostConfig {
  std::size_t rounds = 100;
  int stump_depth = 1;
};

/// Per-round record, filled when a trace is requested.
struct AdaBoostTrace {
  std::vector<double> errors;
  std::vector<double> alphas;
  std::vector<std::vector<double>> weights;  // sample weights after each round's update
};

/// Discrete AdaBoost over shallow trees; the decision is the sign of
/// Σ α_t h_t(x) with h_t ∈ {−1, +1} (+1 = illicit).
class AdaBoostClassifier final : public Classifier {
 public:
  AdaBoostClassifier(std::vector<DecisionTree> stumps, std::vector<double> alphas, AdaBoostConfig cfg, int fallback)
      : stumps_(std::move(stumps)), alphas_(std::move(alphas)), cfg_(cfg), fallback_(fallback) {}

  std::string family() const override { return "adaboost"; }

  /// (margin / Σα + 1) / 2, in [0, 1].
  std::vector<double> predict_score(const Matrix& x) const override {
    std::vector<double> s(x.rows());
    double total = 0.0;
    for (double a : alphas_) total += a;
    for (std::size_t i = 0; i < x.rows(); ++i)
      s[i] = stumps_.empty() ? static_cast<double>(fallback_) : (margin(x.row(i)) / total + 1.0) / 2.0;
    return s;
  }

  std::vector<Label> predict(const Matrix& x) const override {
    std::vector<Label> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const bool illicit = stumps_.empty() ? fallback_ == 1 : margin(x.row(i)) > 0.0;
      out[i] = illicit ? Label::Illicit : Label::Licit;
    }
    return out;
  }

  void save(Checkpoint& ck) const override {
    ck.put_scalar("adaboost/n_features", static_cast<double>(n_features_hint()));
    ck.put_scalar("adaboost/fallback", fallback_);
    ck.put_vector("adaboost/alphas", alphas_);
    for (std::size_t t = 0; t < stumps_.size(); ++t) ck.put("adaboost/stump_" + std::to_string(t), stumps_[t].to_matrix());
  }

  static std::unique_ptr<AdaBoostClassifier> load(const Checkpoint& ck) {
    const auto nf = static_cast<std::size_t>(ck.get_scalar("adaboost/n_features"));
    auto alphas = ck.get("adaboost/alphas").values();
    std::vector<DecisionTree> stumps;
    for (std::size_t t = 0; t < alphas.size(); ++t)
      stumps.push_back(DecisionTree::from_matrix(ck.get("adaboost/stump_" + std::to_string(t)), nf));
    return std::make_unique<AdaBoostClassifier>(std::move(stumps), std::move(alphas), AdaBoostConfig{},
                                                static_cast<int>(ck.get_scalar("adaboost/fallback")));
  }

  const std::vector<double>& alphas() const noexcept { return alphas_; }
  const std::vector<DecisionTree>& stumps() const noexcept { return stumps_; }

 private:
  std::size_t n_features_hint() const { return stumps_.empty() ? 0 : stumps_.front().n_features(); }

  double margin(std::span<const double> row) const {
    require<ShapeError>(row.size() == n_features_hint(), "adaboost: column count mismatch");
    double m = 0.0;
    for (std::size_t t = 0; t < stumps_.size(); ++t) m += alphas_[t] * (stumps_[t].predict_row(row) ? 1.0 : -1.0);
    return m;
  }

  std::vector<DecisionTree> stumps_;
  std::vector<double> alphas_;
  AdaBoostConfig cfg_;
  int fallback_;  // class predicted when no round was kept
};

/// Round t: fit a depth-`stump_depth` tree on weights w, ε_t = Σ w_i [h_t(x_i) ≠ y_i],
/// α_t = ½ ln((1 − ε_t) / ε_t), w_i ← w_i exp(−α_t y_i h_t(x_i)), renormalise.
/// Stops before keeping a round with ε_t ≥ 0.5; a round with ε_t = 0 is kept
/// with α_t = 1 and ends training.
inline std::unique_ptr<AdaBoostClassifier> train_adaboost(const Matrix& x, std::span<const Label> y,
                                                          const AdaBoostConfig& cfg = {},
                                                          AdaBoostTrace* trace = nullptr) {
  require(cfg.rounds >= 1, "adaboost: rounds must be >= 1");
  require(x.rows() > 0, "adaboost: empty input");
  require<ShapeError>(y.size() == x.rows(), "adaboost: label count does not match rows");
  const auto targets = binary_targets(y);
  const std::size_t n = x.rows();
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  TreeConfig tcfg;
  tcfg.max_depth = cfg.stump_depth;

  std::vector<DecisionTree> stumps;
  std::vector<double> alphas;
  double illicit_weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) illicit_weight += targets[i] * w[i];
  const int fallback = illicit_weight > 0.5 ? 1 : 0;

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    auto stump = DecisionTree::fit(x, targets, all, w, tcfg);
    std::vector<int> h(n);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = stump.predict_row(x.row(i));
      if (h[i] != targets[i]) err += w[i];
    }
    if (err >= 0.5) break;
    const bool perfect = err <= 0.0;
    const double alpha = perfect ? 1.0 : 0.5 * std::log((1.0 - err) / err);
    stumps.push_back(std::move(stump));
    alphas.push_back(alpha);
    if (trace) {
      trace->errors.push_back(err);
      trace->alphas.push_back(alpha);
    }
    if (perfect) {
      if (trace) trace->weights.push_back(w);
      break;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double yi = targets[i] ? 1.0 : -1.0, hi = h[i] ? 1.0 : -1.0;
      w[i] *= std::exp(-alpha * yi * hi);
      sum += w[i];
    }
    for (auto& wi : w) wi /= sum;
    if (trace) trace->weights.push_back(w);
  }
  return std::make_unique<AdaBoostClassifier>(std::move(stumps), std::move(alphas), cfg, fallback);
}

}  // namespace amlgraph
