#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "amlgraph/baselines/knn.hpp"
#include "amlgraph/baselines/tree.hpp"
#include "amlgraph/gnn.hpp"
#include "amlgraph/metrics.hpp"

namespace amlgraph::selftest {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Options {
  bool inject_fault = false;  // corrupt one analytic gradient entry
};

namespace detail {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

inline TxGraph random_graph(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t e = 0; e < m; ++e) {
    const auto u = static_cast<std::uint32_t>(rng.below(n)), v = static_cast<std::uint32_t>(rng.below(n));
    if (u != v) edges.emplace_back(u, v);
  }
  return TxGraph(n, edges);
}

inline std::vector<int> random_targets(std::size_t n, Rng& rng) {
  std::vector<int> t(n);
  for (auto& v : t) v = static_cast<int>(rng.below(2));
  return t;
}

inline Check grad_case(const std::string& name, const std::function<double()>& loss,
                       const std::function<void()>& backward, const nn::ParamRefs& params, bool inject) {
  auto bw = [&] {
    backward();
    if (inject) params.front()->grad.values()[0] += 0.5;
  };
  const auto r = nn::grad_check(loss, bw, params);
  return {name, r.max_rel_error < 1e-4, "max rel err " + std::to_string(r.max_rel_error) + " at " + r.worst};
}

// Loss Σ R ⊙ out for a fixed random R, so dL/d(out) = R.
inline double weighted_sum(const Matrix& out, const Matrix& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.values()[i] * r.values()[i];
  return s;
}

}  // namespace detail

inline std::vector<Check> run(const Options& opt = {}) {
  using namespace detail;
  std::vector<Check> out;
  Rng rng(20240611);

  {
    nn::DenseRelu layer("dense", 5, 4, rng);
    nn::Dense head("head", 4, 2, rng);
    const Matrix x = random_matrix(8, 5, rng);
    const auto t = random_targets(8, rng);
    const std::vector<double> cw = {0.3, 0.7};
    auto loss = [&] { return nn::softmax_xent(head.forward(layer.forward(x)), t, cw).loss; };
    auto backward = [&] { layer.backward(head.backward(nn::softmax_xent(head.forward(layer.forward(x)), t, cw).grad)); };
    auto ps = layer.params();
    for (auto* p : head.params()) ps.push_back(p);
    out.push_back(grad_case("gradient: dense + relu + softmax cross-entropy", loss, backward, ps, opt.inject_fault));
  }
  {
    const auto g = random_graph(10, 18, rng);
    const auto edges = message_edges(g, true, false);
    nn::GraphConvLayer conv("conv", 4, rng);
    const Matrix x = random_matrix(10, 4, rng), r = random_matrix(10, 4, rng);
    Rng drop(1);
    auto loss = [&] { return weighted_sum(conv.forward(x, edges, nn::Mode::Train, drop), r); };
    auto backward = [&] {
      conv.forward(x, edges, nn::Mode::Train, drop);
      conv.backward(r);
    };
    out.push_back(grad_case("gradient: graph convolution", loss, backward, conv.params(), false));
  }
  {
    const auto g = random_graph(10, 18, rng);
    const auto edges = message_edges(g, true, true);
    nn::AttentionHead head("head", 4, 3, rng);
    const Matrix x = random_matrix(10, 4, rng), r = random_matrix(10, 3, rng);
    auto loss = [&] { return weighted_sum(head.forward(x, edges), r); };
    auto backward = [&] {
      head.forward(x, edges);
      head.backward(r);
    };
    out.push_back(grad_case("gradient: attention head", loss, backward, head.params(), false));
  }
  {
    const std::size_t e = 50, n = 7, f = 3;
    const Matrix m = random_matrix(e, f, rng);
    std::vector<std::uint32_t> ids(e);
    for (auto& id : ids) id = static_cast<std::uint32_t>(rng.below(n));
    const Matrix got = nn::segment_sum(m, ids, n);
    double err = 0.0;
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t j = 0; j < f; ++j) {
        double want = 0.0;
        for (std::size_t k = 0; k < e; ++k)
          if (ids[k] == s) want += m(k, j);
        err = std::max(err, std::abs(want - got(s, j)));
      }
    out.push_back({"segment sum vs naive loop", err <= 1e-12, "max abs diff " + std::to_string(err)});

    std::vector<double> scores(e);
    for (auto& v : scores) v = rng.uniform(-5.0, 5.0);
    const auto alpha = nn::segment_softmax(scores, ids, n);
    std::vector<double> sums(n, 0.0);
    std::vector<bool> used(n, false);
    for (std::size_t k = 0; k < e; ++k) {
      sums[ids[k]] += alpha[k];
      used[ids[k]] = true;
    }
    double dev = 0.0;
    for (std::size_t s = 0; s < n; ++s)
      if (used[s]) dev = std::max(dev, std::abs(sums[s] - 1.0));
    out.push_back({"segment softmax sums to one", dev <= 1e-12, "max deviation " + std::to_string(dev)});
  }
  {
    const double a = f1(0.906, 0.790), b = f1(0.981, 0.651);
    // Reference F1 values come from unrounded precision and recall, so
    // agreement is to within one unit of the third decimal.
    out.push_back({"F1(0.906, 0.790) = 0.844", std::abs(a - 0.844) < 1e-3, "got " + std::to_string(a)});
    out.push_back({"F1(0.981, 0.651) = 0.782", std::abs(b - 0.782) < 1e-3, "got " + std::to_string(b)});
  }
  {
    bool ok = true;
    std::size_t cases = 0;
    for (std::size_t len = 1; len <= 8 && ok; ++len)
      for (std::uint32_t pm = 0; pm < (1u << len) && ok; ++pm)
        for (std::uint32_t tm = 0; tm < (1u << len) && ok; ++tm) {
          std::vector<Label> p(len), t(len);
          std::size_t hit = 0;
          for (std::size_t i = 0; i < len; ++i) {
            p[i] = (pm >> i) & 1u ? Label::Illicit : Label::Licit;
            t[i] = (tm >> i) & 1u ? Label::Illicit : Label::Licit;
            hit += p[i] == t[i];
          }
          ok = std::abs(micro_f1(p, t) - static_cast<double>(hit) / static_cast<double>(len)) <= 1e-12;
          ++cases;
        }
    out.push_back({"micro F1 equals accuracy (all binary vectors, length <= 8)", ok, std::to_string(cases) + " cases"});
  }
  {
    bool ok = true;
    std::string why;
    for (int trial = 0; trial < 50 && ok; ++trial) {
      const std::size_t n = 10 + rng.below(60), f = 1 + rng.below(4);
      Matrix x(n, f);
      for (auto& v : x.values()) v = static_cast<double>(rng.below(8));
      const auto y = random_targets(n, rng);
      const auto tree = DecisionTree::fit(x, y, TreeConfig{.max_depth = 1});
      double c[2] = {0, 0};
      for (int t : y) c[t] += 1;
      double best = 0.0;
      bool any = false;
      for (std::size_t j = 0; j < f; ++j)
        for (double thr = 0.5; thr < 7.0; thr += 1.0) {
          double l[2] = {0, 0}, r[2] = {0, 0};
          for (std::size_t i = 0; i < n; ++i) (x(i, j) <= thr ? l : r)[y[i]] += 1;
          if (l[0] + l[1] == 0 || r[0] + r[1] == 0) continue;
          const double g = info_gain(c, l, r);
          if (!any || g > best) best = g;
          any = true;
        }
      const auto rs = root_split(tree);
      const double got = rs.feature < 0 ? 0.0 : rs.gain;
      if (std::abs(got - (any ? best : 0.0)) > 1e-12 && !(c[0] == 0 || c[1] == 0)) {
        ok = false;
        why = "trial " + std::to_string(trial) + ": gain " + std::to_string(got) + " vs " + std::to_string(best);
      }
    }
    out.push_back({"tree root split vs exhaustive search", ok, ok ? "50 instances" : why});
  }
  {
    bool ok = true;
    for (int trial = 0; trial < 20 && ok; ++trial) {
      const std::size_t n = 30 + rng.below(40), f = 3, k = 5;
      const Matrix x = random_matrix(n, f, rng), q = random_matrix(10, f, rng);
      std::vector<Label> y(n);
      for (auto& l : y) l = rng.bernoulli(0.4) ? Label::Illicit : Label::Licit;
      const auto model = train_knn(x, y, {.k = k});
      const auto pred = model->predict(q);
      const auto scaler = Standardizer::fit(x);
      const Matrix zx = scaler.transform(x), zq = scaler.transform(q);
      for (std::size_t i = 0; i < q.rows() && ok; ++i) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t t = 0; t < n; ++t) {
          double s = 0.0;
          for (std::size_t j = 0; j < f; ++j) s += (zq(i, j) - zx(t, j)) * (zq(i, j) - zx(t, j));
          d.emplace_back(s, t);
        }
        std::sort(d.begin(), d.end());
        std::size_t votes = 0;
        for (std::size_t j = 0; j < k; ++j) votes += y[d[j].second] == Label::Illicit;
        ok = pred[i] == (2 * votes > k ? Label::Illicit : Label::Licit);
      }
    }
    out.push_back({"k-NN vs brute force", ok, "20 instances"});
  }
  return out;
}

}  // namespace amlgraph::selftest
