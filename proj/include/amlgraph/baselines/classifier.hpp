#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "amlgraph/checkpoint.hpp"
#include "amlgraph/dataset.hpp"
#include "amlgraph/matrix.hpp"

namespace amlgraph {

/// Uniform contract for every trained model family. Implementations are
/// immutable after training; predict and predict_score are thread-safe.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string family() const = 0;

  /// Illicit-class probability or score per row; larger means more illicit.
  virtual std::vector<double> predict_score(const Matrix& x) const = 0;

  virtual std::vector<Label> predict(const Matrix& x) const {
    const auto scores = predict_score(x);
    std::vector<Label> out;
    out.reserve(scores.size());
    for (double s : scores) out.push_back(s > decision_threshold() ? Label::Illicit : Label::Licit);
    return out;
  }

  /// Writes parameters and hyperparameters under the family's name prefix.
  virtual void save(Checkpoint& ck) const = 0;

 protected:
  virtual double decision_threshold() const { return 0.5; }
};

/// Column-wise z-scoring fitted on training rows. Constant columns get
/// unit scale so they map to zero.
class Standardizer {
 public:
  Standardizer() = default;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const std::size_t n = x.rows(), f = x.cols();
    s.mean_.assign(f, 0.0);
    s.scale_.assign(f, 1.0);
    if (n == 0) return s;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) s.mean_[j] += x(i, j);
    for (auto& m : s.mean_) m /= static_cast<double>(n);
    std::vector<double> var(f, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) {
        const double d = x(i, j) - s.mean_[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < f; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(n));
      s.scale_[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  Matrix transform(const Matrix& x) const {
    require<ShapeError>(x.cols() == mean_.size(), "Standardizer: expected " + std::to_string(mean_.size()) +
                                                      " columns, got " + std::to_string(x.cols()));
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      auto row = out.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean_[j]) / scale_[j];
    }
    return out;
  }

  void save(Checkpoint& ck, const std::string& prefix) const {
    ck.put_vector(prefix + "/mean", mean_);
    ck.put_vector(prefix + "/scale", scale_);
  }

  static Standardizer load(const Checkpoint& ck, const std::string& prefix) {
    Standardizer s;
    s.mean_ = ck.get(prefix + "/mean").values();
    s.scale_ = ck.get(prefix + "/scale").values();
    return s;
  }

  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& scale() const noexcept { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

/// 0/1 class targets from labels; unknown labels are rejected.
inline std::vector<int> binary_targets(std::span<const Label> y) {
  std::vector<int> t;
  t.reserve(y.size());
  for (Label l : y) {
    require(l != Label::Unknown, "training labels must be licit or illicit");
    t.push_back(class_index(l));
  }
  return t;
}

}  // namespace amlgraph
