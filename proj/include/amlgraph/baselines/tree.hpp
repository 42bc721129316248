#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "amlgraph/baselines/classifier.hpp"
#include "amlgraph/random.hpp"

namespace amlgraph {

/// Shannon entropy in bits of a (possibly weighted) class histogram.
inline double entropy(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) {
    require(c >= 0.0, "entropy: negative count");
    total += c;
  }
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : counts) {
    if (c <= 0.0) continue;
    const double p = c / total;
    h -= p * std::log2(p);
  }
  return h;
}

inline double entropy(std::initializer_list<double> counts) {
  return entropy(std::span<const double>(counts.begin(), counts.size()));
}

/// H(parent) − Σ (|child| / |parent|) H(child).
inline double info_gain(std::span<const double> parent, std::span<const double> left, std::span<const double> right) {
  require(parent.size() == left.size() && left.size() == right.size(), "info_gain: histogram sizes differ");
  double n = 0.0, nl = 0.0, nr = 0.0;
  for (std::size_t c = 0; c < parent.size(); ++c) {
    require(left[c] >= 0.0 && right[c] >= 0.0, "info_gain: negative count");
    n += parent[c];
    nl += left[c];
    nr += right[c];
  }
  if (n <= 0.0) return 0.0;
  return entropy(parent) - (nl / n) * entropy(left) - (nr / n) * entropy(right);
}

struct TreeNode {
  bool leaf = true;
  std::int32_t feature = -1;
  double threshold = 0.0;  // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double count[2] = {0.0, 0.0};  // class weight reaching the node
  double gain = 0.0;              // information gain of the split; not serialized

  double illicit_fraction() const noexcept {
    const double t = count[0] + count[1];
    return t > 0.0 ? count[1] / t : 0.0;
  }
};

struct TreeConfig {
  int max_depth = 0;  // 0 = unlimited
  std::size_t min_leaf = 1;
  std::size_t max_features = 0;  // 0 = all features per split
};

struct SplitChoice {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double gain = -1.0;
};

/// Greedy entropy-gain CART over binary labels.
class DecisionTree {
 public:
  DecisionTree() = default;

  /// `samples` may contain repeats (bootstrap). `weights` is per sample
  /// position (empty = unit weights). `rng` is required when
  /// cfg.max_features selects a subset.
  static DecisionTree fit(const Matrix& x, std::span<const int> y, std::vector<std::uint32_t> samples,
                          std::span<const double> weights, const TreeConfig& cfg, Rng* rng = nullptr) {
    require(!samples.empty(), "decision tree: no training samples");
    require(y.size() == x.rows(), "decision tree: label count does not match rows");
    require(weights.empty() || weights.size() == samples.size(), "decision tree: one weight per sample");
    require(cfg.min_leaf >= 1, "decision tree: min_leaf must be >= 1");
    DecisionTree t;
    t.n_features_ = x.cols();
    Builder b{x, y, weights, cfg, rng, t.nodes_, {}, {}, {}};
    b.run(std::move(samples));
    return t;
  }

  static DecisionTree fit(const Matrix& x, std::span<const int> y, const TreeConfig& cfg) {
    std::vector<std::uint32_t> all(x.rows());
    std::iota(all.begin(), all.end(), 0u);
    return fit(x, y, std::move(all), {}, cfg);
  }

  const TreeNode& leaf_for(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes_[i].leaf)
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold
                                       ? nodes_[i].left
                                       : nodes_[i].right);
    return nodes_[i];
  }

  /// Majority class of the leaf; ties go to licit.
  int predict_row(std::span<const double> row) const {
    const auto& l = leaf_for(row);
    return l.count[1] > l.count[0] ? 1 : 0;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t n_features() const noexcept { return n_features_; }

  int depth() const {
    int best = 0;
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes_[i].leaf) {
        stack.emplace_back(static_cast<std::size_t>(nodes_[i].left), d + 1);
        stack.emplace_back(static_cast<std::size_t>(nodes_[i].right), d + 1);
      }
    }
    return best;
  }

  /// Preorder rows [is_leaf, feature, threshold, count_licit, count_illicit].
  Matrix to_matrix() const {
    Matrix m(nodes_.size(), 5);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      m(i, 0) = n.leaf ? 1.0 : 0.0;
      m(i, 1) = n.feature;
      m(i, 2) = n.threshold;
      m(i, 3) = n.count[0];
      m(i, 4) = n.count[1];
    }
    return m;
  }

  static DecisionTree from_matrix(const Matrix& m, std::size_t n_features) {
    require<IoError>(m.cols() == 5 && m.rows() > 0, "decision tree: bad serialized shape");
    DecisionTree t;
    t.n_features_ = n_features;
    t.nodes_.resize(m.rows());
    std::size_t next = 0;
    // Preorder: a split's left child follows it immediately, its right child
    // follows the left subtree.
    auto parse = [&](auto&& self) -> std::int32_t {
      require<IoError>(next < m.rows(), "decision tree: truncated preorder list");
      const auto i = next++;
      auto& n = t.nodes_[i];
      n.leaf = m(i, 0) != 0.0;
      n.feature = static_cast<std::int32_t>(m(i, 1));
      n.threshold = m(i, 2);
      n.count[0] = m(i, 3);
      n.count[1] = m(i, 4);
      if (!n.leaf) {
        require<IoError>(n.feature >= 0 && static_cast<std::size_t>(n.feature) < n_features,
                         "decision tree: bad split feature");
        const auto l = self(self);
        const auto r = self(self);
        t.nodes_[i].left = l;
        t.nodes_[i].right = r;
      }
      return static_cast<std::int32_t>(i);
    };
    parse(parse);
    require<IoError>(next == m.rows(), "decision tree: trailing nodes in preorder list");
    return t;
  }

 private:
  struct Builder {
    const Matrix& x;
    std::span<const int> y;
    std::span<const double> weights;
    const TreeConfig& cfg;
    Rng* rng;
    std::vector<TreeNode>& nodes;

    struct Task {
      std::vector<std::uint32_t> pos;  // positions into the sample arrays
      int depth;
      std::int32_t parent;
      bool is_left;
    };

    std::vector<std::uint32_t> samples;
    std::vector<std::pair<double, std::uint32_t>> buf;
    std::vector<std::uint32_t> feature_pool;

    double weight(std::uint32_t p) const { return weights.empty() ? 1.0 : weights[p]; }

    void run(std::vector<std::uint32_t> s) {
      samples = std::move(s);
      feature_pool.resize(x.cols());
      std::iota(feature_pool.begin(), feature_pool.end(), 0u);
      std::vector<std::uint32_t> root(samples.size());
      std::iota(root.begin(), root.end(), 0u);
      std::vector<Task> stack;
      stack.push_back({std::move(root), 0, -1, false});
      while (!stack.empty()) {
        Task task = std::move(stack.back());
        stack.pop_back();
        const auto id = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        if (task.parent >= 0) (task.is_left ? nodes[task.parent].left : nodes[task.parent].right) = id;
        TreeNode& node = nodes.back();
        for (auto p : task.pos) node.count[y[samples[p]]] += weight(p);

        const bool pure = node.count[0] <= 0.0 || node.count[1] <= 0.0;
        const bool depth_cap = cfg.max_depth > 0 && task.depth >= cfg.max_depth;
        if (pure || depth_cap || task.pos.size() < 2 * cfg.min_leaf) continue;

        const auto split = best_split(task.pos, node.count);
        if (split.feature < 0) continue;
        node.leaf = false;
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.gain = split.gain;
        std::vector<std::uint32_t> left, right;
        for (auto p : task.pos)
          (x(samples[p], static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(p);
        // Right pushed first so the left subtree is emitted first (preorder).
        stack.push_back({std::move(right), task.depth + 1, id, false});
        stack.push_back({std::move(left), task.depth + 1, id, true});
      }
    }

    SplitChoice best_split(const std::vector<std::uint32_t>& pos, const double (&parent)[2]) {
      std::vector<std::uint32_t> features;
      if (cfg.max_features == 0 || cfg.max_features >= x.cols()) {
        features = feature_pool;
      } else {
        require(rng != nullptr, "decision tree: feature subsampling needs an rng");
        for (std::size_t k = 0; k < cfg.max_features; ++k) {
          const auto j = k + rng->below(feature_pool.size() - k);
          std::swap(feature_pool[k], feature_pool[j]);
        }
        features.assign(feature_pool.begin(), feature_pool.begin() + static_cast<std::ptrdiff_t>(cfg.max_features));
        std::sort(features.begin(), features.end());
      }
      SplitChoice best;
      const std::size_t n = pos.size();
      for (auto f : features) {
        buf.clear();
        for (auto p : pos) buf.emplace_back(x(samples[p], f), p);
        std::sort(buf.begin(), buf.end());
        if (buf.front().first == buf.back().first) continue;
        double left[2] = {0.0, 0.0};
        for (std::size_t k = 0; k + 1 < n; ++k) {
          const auto p = buf[k].second;
          left[y[samples[p]]] += weight(p);
          if (buf[k].first == buf[k + 1].first) continue;
          if (k + 1 < cfg.min_leaf || n - (k + 1) < cfg.min_leaf) continue;
          const double right[2] = {std::max(parent[0] - left[0], 0.0), std::max(parent[1] - left[1], 0.0)};
          const double gain = amlgraph::info_gain(std::span<const double>(parent), std::span<const double>(left),
                                                  std::span<const double>(right));
          if (gain > best.gain) {
            best.gain = gain;
            best.feature = static_cast<std::int32_t>(f);
            best.threshold = midpoint(buf[k].first, buf[k + 1].first);
          }
        }
      }
      return best;
    }

    // Falls back to `lo` when the midpoint rounds onto `hi`, so the split
    // always separates the two values.
    static double midpoint(double lo, double hi) {
      const double m = lo + (hi - lo) / 2.0;
      return m < hi ? m : lo;
    }
  };

  std::vector<TreeNode> nodes_;
  std::size_t n_features_ = 0;
};

/// Root split a fitted tree would choose, for inspection and oracle tests.
inline SplitChoice root_split(const DecisionTree& t) {
  const auto& r = t.nodes().front();
  if (r.leaf) return {};
  return {r.feature, r.threshold, r.gain};
}

class DecisionTreeClassifier final : public Classifier {
 public:
  DecisionTreeClassifier(DecisionTree tree, TreeConfig cfg) : tree_(std::move(tree)), cfg_(cfg) {}

  std::string family() const override { return "decision_tree"; }

  std::vector<double> predict_score(const Matrix& x) const override {
    check_width(x);
    std::vector<double> s(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) s[i] = tree_.leaf_for(x.row(i)).illicit_fraction();
    return s;
  }

  std::vector<Label> predict(const Matrix& x) const override {
    check_width(x);
    std::vector<Label> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = static_cast<Label>(tree_.predict_row(x.row(i)));
    return out;
  }

  void save(Checkpoint& ck) const override {
    ck.put_scalar("decision_tree/n_features", static_cast<double>(tree_.n_features()));
    ck.put_scalar("decision_tree/max_depth", cfg_.max_depth);
    ck.put_scalar("decision_tree/min_leaf", static_cast<double>(cfg_.min_leaf));
    ck.put("decision_tree/nodes", tree_.to_matrix());
  }

  static std::unique_ptr<DecisionTreeClassifier> load(const Checkpoint& ck) {
    const auto nf = static_cast<std::size_t>(ck.get_scalar("decision_tree/n_features"));
    TreeConfig cfg;
    cfg.max_depth = static_cast<int>(ck.get_scalar("decision_tree/max_depth"));
    cfg.min_leaf = static_cast<std::size_t>(ck.get_scalar("decision_tree/min_leaf"));
    return std::make_unique<DecisionTreeClassifier>(DecisionTree::from_matrix(ck.get("decision_tree/nodes"), nf), cfg);
  }

  const DecisionTree& tree() const noexcept { return tree_; }

 private:
  void check_width(const Matrix& x) const {
    require<ShapeError>(x.cols() == tree_.n_features(), "decision_tree: expected " +
                                                            std::to_string(tree_.n_features()) + " columns");
  }
  DecisionTree tree_;
  TreeConfig cfg_;
};

inline std::unique_ptr<DecisionTreeClassifier> train_decision_tree(const Matrix& x, std::span<const Label> y,
                                                                   const TreeConfig& cfg = {}) {
  require(x.rows() > 0, "train_decision_tree: empty input");
  require<ShapeError>(y.size() == x.rows(), "train_decision_tree: label count does not match rows");
  const auto t = binary_targets(y);
  return std::make_unique<DecisionTreeClassifier>(DecisionTree::fit(x, t, cfg), cfg);
}

}  // namespace amlgraph
