#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "amlgraph/baselines/tree.hpp"

namespace amlgraph {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_features = 0;  // 0 = round(sqrt(F))
  bool bootstrap = true;
  int max_depth = 0;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;  // 0 = hardware concurrency
};

/// Majority vote of bagged trees; score is the illicit vote fraction.
class RandomForestClassifier final : public Classifier {
 public:
  RandomForestClassifier(std::vector<DecisionTree> trees, ForestConfig cfg)
      : trees_(std::move(trees)), cfg_(cfg) {}

  std::string family() const override { return "random_forest"; }

  std::vector<double> predict_score(const Matrix& x) const override {
    std::vector<double> s(x.rows(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) s[i] = static_cast<double>(votes(x.row(i))) / trees_.size();
    return s;
  }

  std::vector<Label> predict(const Matrix& x) const override {
    std::vector<Label> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
      out[i] = 2 * votes(x.row(i)) > trees_.size() ? Label::Illicit : Label::Licit;
    return out;
  }

  void save(Checkpoint& ck) const override {
    ck.put_scalar("random_forest/n_trees", static_cast<double>(trees_.size()));
    ck.put_scalar("random_forest/n_features", static_cast<double>(trees_.front().n_features()));
    for (std::size_t t = 0; t < trees_.size(); ++t) ck.put("random_forest/tree_" + std::to_string(t), trees_[t].to_matrix());
  }

  static std::unique_ptr<RandomForestClassifier> load(const Checkpoint& ck) {
    const auto n = static_cast<std::size_t>(ck.get_scalar("random_forest/n_trees"));
    const auto nf = static_cast<std::size_t>(ck.get_scalar("random_forest/n_features"));
    std::vector<DecisionTree> trees;
    for (std::size_t t = 0; t < n; ++t)
      trees.push_back(DecisionTree::from_matrix(ck.get("random_forest/tree_" + std::to_string(t)), nf));
    ForestConfig cfg;
    cfg.n_trees = n;
    return std::make_unique<RandomForestClassifier>(std::move(trees), cfg);
  }

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

 private:
  std::size_t votes(std::span<const double> row) const {
    require<ShapeError>(row.size() == trees_.front().n_features(), "random_forest: column count mismatch");
    std::size_t v = 0;
    for (const auto& t : trees_) v += static_cast<std::size_t>(t.predict_row(row));
    return v;
  }

  std::vector<DecisionTree> trees_;
  ForestConfig cfg_;
};

/// Each tree draws its bootstrap sample and split features from its own
/// stream derived from (seed, tree index), so the forest does not depend on
/// how trees are scheduled across threads.
inline std::unique_ptr<RandomForestClassifier> train_random_forest(const Matrix& x, std::span<const Label> y,
                                                                   const ForestConfig& cfg = {}) {
  require(cfg.n_trees >= 1, "random_forest: n_trees must be >= 1");
  require(x.rows() > 0, "random_forest: empty input");
  require<ShapeError>(y.size() == x.rows(), "random_forest: label count does not match rows");
  const auto targets = binary_targets(y);
  TreeConfig tcfg;
  tcfg.max_depth = cfg.max_depth;
  tcfg.min_leaf = cfg.min_leaf;
  tcfg.max_features = cfg.max_features
                          ? cfg.max_features
                          : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(x.cols()))));
  std::vector<DecisionTree> trees(cfg.n_trees);
  auto grow = [&](std::size_t t) {
    Rng rng(derive_seed(cfg.seed, t));
    std::vector<std::uint32_t> sample(x.rows());
    if (cfg.bootstrap) {
      for (auto& s : sample) s = static_cast<std::uint32_t>(rng.below(x.rows()));
    } else {
      std::iota(sample.begin(), sample.end(), 0u);
    }
    trees[t] = DecisionTree::fit(x, targets, std::move(sample), {}, tcfg, &rng);
  };
  const std::size_t jobs =
      std::min<std::size_t>(cfg.n_trees, cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency()));
  if (jobs <= 1) {
    for (std::size_t t = 0; t < cfg.n_trees; ++t) grow(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (std::size_t j = 0; j < jobs; ++j) {
      pool.emplace_back([&] {
        for (std::size_t t; (t = next.fetch_add(1)) < cfg.n_trees;) {
          try {
            grow(t);
          } catch (...) {
            std::lock_guard lk(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }
  return std::make_unique<RandomForestClassifier>(std::move(trees), cfg);
}

}  // namespace amlgraph
