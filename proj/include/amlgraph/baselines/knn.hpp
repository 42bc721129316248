#pragma once

#include <algorithm>
#include <memory>
#include <utility>
#include <vector>

#include "amlgraph/baselines/classifier.hpp"

namespace amlgraph {

struct KnnConfig {
  std::size_t k = 5;
};

/// k nearest neighbours by Euclidean distance on standardised features.
/// Equal distances prefer the lower training index; a tied vote goes to
/// licit.
class KnnClassifier final : public Classifier {
 public:
  KnnClassifier(Standardizer scaler, Matrix train, std::vector<int> targets, std::size_t k)
      : scaler_(std::move(scaler)), train_(std::move(train)), targets_(std::move(targets)), k_(k) {}

  std::string family() const override { return "knn"; }

  /// Fraction of the k neighbours that are illicit.
  std::vector<double> predict_score(const Matrix& x) const override {
    const auto votes = illicit_votes(x);
    std::vector<double> s(votes.size());
    for (std::size_t i = 0; i < votes.size(); ++i) s[i] = static_cast<double>(votes[i]) / static_cast<double>(k_);
    return s;
  }

  std::vector<Label> predict(const Matrix& x) const override {
    const auto votes = illicit_votes(x);
    std::vector<Label> out(votes.size());
    for (std::size_t i = 0; i < votes.size(); ++i) out[i] = 2 * votes[i] > k_ ? Label::Illicit : Label::Licit;
    return out;
  }

  /// Training indices of the k nearest neighbours of one standardised row,
  /// nearest first.
  std::vector<std::uint32_t> neighbors(std::span<const double> zrow) const {
    std::vector<std::pair<double, std::uint32_t>> d(train_.rows());
    for (std::size_t j = 0; j < train_.rows(); ++j) {
      auto tr = train_.row(j);
      double s = 0.0;
      for (std::size_t c = 0; c < tr.size(); ++c) {
        const double diff = zrow[c] - tr[c];
        s += diff * diff;
      }
      d[j] = {s, static_cast<std::uint32_t>(j)};
    }
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_ - 1), d.end());
    std::sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_));
    std::vector<std::uint32_t> out(k_);
    for (std::size_t i = 0; i < k_; ++i) out[i] = d[i].second;
    return out;
  }

  void save(Checkpoint& ck) const override {
    scaler_.save(ck, "knn/scaler");
    ck.put_scalar("knn/k", static_cast<double>(k_));
    ck.put("knn/train", train_);
    std::vector<double> t(targets_.begin(), targets_.end());
    ck.put_vector("knn/targets", t);
  }

  static std::unique_ptr<KnnClassifier> load(const Checkpoint& ck) {
    const auto& tv = ck.get("knn/targets").values();
    std::vector<int> targets(tv.begin(), tv.end());
    return std::make_unique<KnnClassifier>(Standardizer::load(ck, "knn/scaler"), ck.get("knn/train"),
                                           std::move(targets), static_cast<std::size_t>(ck.get_scalar("knn/k")));
  }

  const Standardizer& scaler() const noexcept { return scaler_; }

 private:
  std::vector<std::size_t> illicit_votes(const Matrix& x) const {
    const Matrix z = scaler_.transform(x);
    std::vector<std::size_t> votes(z.rows(), 0);
    detail::parallel_rows(z.rows(), train_.size(), [&](std::size_t r0, std::size_t r1) {
      for (std::size_t i = r0; i < r1; ++i)
        for (auto j : neighbors(z.row(i))) votes[i] += static_cast<std::size_t>(targets_[j]);
    });
    return votes;
  }

  Standardizer scaler_;
  Matrix train_;
  std::vector<int> targets_;
  std::size_t k_;
};

inline std::unique_ptr<KnnClassifier> train_knn(const Matrix& x, std::span<const Label> y, const KnnConfig& cfg = {}) {
  require<ShapeError>(y.size() == x.rows(), "knn: label count does not match rows");
  require(cfg.k >= 1 && cfg.k <= x.rows(), "knn: k must be in [1, n_train]");
  auto scaler = Standardizer::fit(x);
  Matrix z = scaler.transform(x);
  return std::make_unique<KnnClassifier>(std::move(scaler), std::move(z), binary_targets(y), cfg.k);
}

}  // namespace amlgraph
