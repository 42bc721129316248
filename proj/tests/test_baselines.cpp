#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "amlgraph/baselines/adaboost.hpp"
#include "amlgraph/baselines/forest.hpp"
#include "amlgraph/baselines/knn.hpp"
#include "amlgraph/baselines/linear.hpp"
#include "amlgraph/baselines/mlp.hpp"
#include "amlgraph/baselines/tree.hpp"
#include "amlgraph/metrics.hpp"
#include "oracles.hpp"
#include "synth_data.hpp"

using namespace amlgraph;

namespace {

std::vector<Label> labels_of(const std::vector<int>& t) {
  std::vector<Label> out;
  for (int v : t) out.push_back(v ? Label::Illicit : Label::Licit);
  return out;
}

double illicit_f1(const std::vector<Label>& pred, const std::vector<Label>& truth) {
  return full_report(pred, truth).illicit.f1;
}

double train_accuracy(const Classifier& m, const Matrix& x, const std::vector<Label>& y) {
  return accuracy(m.predict(x), y);
}

// Random instance whose columns alternate between continuous and
// small-integer values, so the split search sees repeated values and ties.
std::pair<Matrix, std::vector<int>> random_instance(Rng& rng, std::size_t n, std::size_t f) {
  Matrix x(n, f);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j)
      x(i, j) = j % 2 == 0 ? rng.uniform(-2.0, 2.0) : static_cast<double>(rng.below(4));
    y[i] = rng.bernoulli(x(i, 0) > 0.5 ? 0.8 : 0.25) ? 1 : 0;
  }
  return {x, y};
}

// Weighted one-split stump chosen by information gain, majority leaves
// (ties licit), for a single feature column.
struct StumpOracle {
  double threshold;
  int left_class, right_class;  // -1 when there is no split
};

StumpOracle weighted_stump(const std::vector<double>& x, const std::vector<int>& y, const std::vector<double>& w) {
  double p0 = 0, p1 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) (y[i] ? p1 : p0) += w[i];
  const double total = p0 + p1;
  std::set<double> vals(x.begin(), x.end());
  std::vector<double> v(vals.begin(), vals.end());
  double best_gain = -1;
  StumpOracle best{0, -1, -1};
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    const double thr = 0.5 * (v[k] + v[k + 1]);
    double l0 = 0, l1 = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] <= thr) (y[i] ? l1 : l0) += w[i];
    const double r0 = p0 - l0, r1 = p1 - l1;
    const double g = oracle::entropy2(p0, p1) - (l0 + l1) / total * oracle::entropy2(l0, l1) -
                     (r0 + r1) / total * oracle::entropy2(r0, r1);
    if (g > best_gain + 1e-12) {
      best_gain = g;
      best = {thr, l1 > l0 ? 1 : 0, r1 > r0 ? 1 : 0};
    }
  }
  return best;
}

}  // namespace

TEST(Entropy, Examples) {
  EXPECT_DOUBLE_EQ(entropy({5.0, 5.0}), 1.0);
  EXPECT_EQ(entropy({10.0, 0.0}), 0.0);
  EXPECT_EQ(entropy({0.0, 0.0}), 0.0);
  const double parent[2] = {4, 4}, left[2] = {4, 0}, right[2] = {0, 4};
  EXPECT_DOUBLE_EQ(info_gain(parent, left, right), 1.0);
  EXPECT_THROW(entropy({-1.0, 2.0}), ArgumentError);
}

TEST(DecisionTree, PureDataIsSingleLeaf) {
  Rng rng(1);
  const Matrix x = oracle::random_matrix(20, 3, rng);
  const std::vector<Label> y(20, Label::Licit);
  const auto m = train_decision_tree(x, y);
  EXPECT_EQ(m->tree().nodes().size(), 1u);
  EXPECT_EQ(train_accuracy(*m, x, y), 1.0);
}

TEST(DecisionTree, XorAtDepthTwo) {
  const Matrix x{{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}};
  const std::vector<Label> y = {Label::Licit, Label::Illicit, Label::Illicit, Label::Licit};
  TreeConfig cfg;
  cfg.max_depth = 2;
  const auto m = train_decision_tree(x, y, cfg);
  EXPECT_EQ(train_accuracy(*m, x, y), 1.0);
  EXPECT_LE(m->tree().depth(), 2);
}

TEST(DecisionTree, RootSplitMatchesExhaustiveSearch) {
  Rng rng(2);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 10 + rng.below(191), f = 1 + rng.below(6);
    const auto [x, y] = random_instance(rng, n, f);
    const auto expect = oracle::best_root_split(x, y);
    const auto tree = DecisionTree::fit(x, y, TreeConfig{});
    const auto got = root_split(tree);
    if (expect.gain <= 0.0 || expect.feature < 0) continue;
    ASSERT_NEAR(got.gain, expect.gain, 1e-12) << "instance " << inst;
    EXPECT_EQ(got.feature, expect.feature) << "instance " << inst;
    EXPECT_DOUBLE_EQ(got.threshold, expect.threshold) << "instance " << inst;
  }
}

TEST(DecisionTree, UnlimitedTreeFitsTrainingSet) {
  Rng rng(3);
  for (int inst = 0; inst < 10; ++inst) {
    const Matrix x = oracle::random_matrix(150, 4, rng);
    std::vector<Label> y(150);
    for (auto& l : y) l = rng.bernoulli(0.3) ? Label::Illicit : Label::Licit;
    EXPECT_EQ(train_accuracy(*train_decision_tree(x, y), x, y), 1.0);
  }
}

TEST(DecisionTree, DepthAndMinLeafAreRespected) {
  Rng rng(4);
  const Matrix x = oracle::random_matrix(200, 3, rng);
  std::vector<Label> y(200);
  for (auto& l : y) l = rng.bernoulli(0.4) ? Label::Illicit : Label::Licit;
  TreeConfig cfg;
  cfg.max_depth = 3;
  cfg.min_leaf = 7;
  const auto m = train_decision_tree(x, y, cfg);
  EXPECT_LE(m->tree().depth(), 3);
  for (const auto& node : m->tree().nodes())
    if (node.leaf) {
      EXPECT_GE(node.count[0] + node.count[1], 7.0);
    }
}

TEST(DecisionTree, EmptyInputThrows) {
  EXPECT_THROW(train_decision_tree(Matrix(0, 2), {}), ArgumentError);
}

TEST(RandomForest, SingleUnbaggedTreeEqualsPlainTree) {
  const auto& s = test_util::synth_split();
  ForestConfig fc;
  fc.n_trees = 1;
  fc.bootstrap = false;
  fc.max_features = s.x_train.cols();
  const auto forest = train_random_forest(s.x_train, s.y_train, fc);
  const auto tree = train_decision_tree(s.x_train, s.y_train);
  EXPECT_EQ(forest->predict(s.x_test), tree->predict(s.x_test));
}

TEST(RandomForest, DeterministicForSeedAndJobs) {
  const auto& s = test_util::synth_split();
  ForestConfig fc;
  fc.n_trees = 20;
  fc.seed = 9;
  fc.jobs = 1;
  const auto a = train_random_forest(s.x_train, s.y_train, fc);
  fc.jobs = 4;
  const auto b = train_random_forest(s.x_train, s.y_train, fc);
  EXPECT_EQ(a->predict_score(s.x_test), b->predict_score(s.x_test));
  fc.seed = 10;
  const auto c = train_random_forest(s.x_train, s.y_train, fc);
  EXPECT_NE(a->predict_score(s.x_test), c->predict_score(s.x_test));
}

TEST(RandomForest, NotWorseThanSingleTree) {
  const auto& s = test_util::synth_split();
  const auto forest = train_random_forest(s.x_train, s.y_train, ForestConfig{});
  const auto tree = train_decision_tree(s.x_train, s.y_train);
  const double ff = illicit_f1(forest->predict(s.x_test), s.y_test);
  const double tf = illicit_f1(tree->predict(s.x_test), s.y_test);
  EXPECT_GE(ff, tf - 0.02) << "forest " << ff << " tree " << tf;
}

TEST(AdaBoost, StopsAfterPerfectStump) {
  const Matrix x{{1.0}, {2.0}, {3.0}, {4.0}};
  const std::vector<Label> y = {Label::Licit, Label::Licit, Label::Illicit, Label::Illicit};
  AdaBoostTrace trace;
  const auto m = train_adaboost(x, y, {}, &trace);
  ASSERT_EQ(trace.errors.size(), 1u);
  EXPECT_EQ(trace.errors[0], 0.0);
  EXPECT_EQ(m->stumps().size(), 1u);
  EXPECT_EQ(m->predict(x), y);
}

TEST(AdaBoost, WeightsStayADistribution) {
  const auto& s = test_util::synth_split();
  AdaBoostConfig cfg;
  cfg.rounds = 30;
  AdaBoostTrace trace;
  train_adaboost(s.x_train, s.y_train, cfg, &trace);
  ASSERT_FALSE(trace.weights.empty());
  for (const auto& w : trace.weights) {
    double sum = 0;
    for (double v : w) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(AdaBoost, ThreeRoundsMatchHandSimulation) {
  Rng rng(5);
  std::vector<double> xs(20);
  std::vector<int> t(20);
  for (std::size_t i = 0; i < 20; ++i) {
    xs[i] = static_cast<double>(i) + rng.uniform(0.0, 0.5);
    t[i] = (i >= 6 && i < 13) || i == 2 || i == 17 ? 1 : 0;
  }
  Matrix x(20, 1);
  for (std::size_t i = 0; i < 20; ++i) x(i, 0) = xs[i];

  std::vector<double> w(20, 1.0 / 20.0), alphas;
  for (int round = 0; round < 3; ++round) {
    const auto st = weighted_stump(xs, t, w);
    ASSERT_GE(st.left_class, 0);
    std::vector<int> h(20);
    double err = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      h[i] = xs[i] <= st.threshold ? st.left_class : st.right_class;
      if (h[i] != t[i]) err += w[i];
    }
    ASSERT_GT(err, 0.0);
    ASSERT_LT(err, 0.5);
    const double a = 0.5 * std::log((1 - err) / err);
    alphas.push_back(a);
    double sum = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      w[i] *= std::exp(-a * (t[i] ? 1.0 : -1.0) * (h[i] ? 1.0 : -1.0));
      sum += w[i];
    }
    for (auto& v : w) v /= sum;
  }

  AdaBoostConfig cfg;
  cfg.rounds = 3;
  AdaBoostTrace trace;
  const auto m = train_adaboost(x, labels_of(t), cfg, &trace);
  ASSERT_EQ(m->alphas().size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(m->alphas()[r], alphas[r], 1e-12) << "round " << r;
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(trace.weights.back()[i], w[i], 1e-12);
}

TEST(AdaBoost, InvalidRoundsThrow) {
  AdaBoostConfig cfg;
  cfg.rounds = 0;
  const std::vector<Label> y = {Label::Licit, Label::Illicit};
  EXPECT_THROW(train_adaboost(Matrix(2, 1), y, cfg), ArgumentError);
}

TEST(LogReg, ZeroWeightsGiveOneHalf) {
  const LogisticRegressionClassifier m(Standardizer::fit(Matrix{{0.0}, {1.0}}), {0.0, 0.0});
  for (double p : m.predict_score(Matrix{{-3.0}, {0.5}, {9.0}})) EXPECT_EQ(p, 0.5);
}

TEST(LogReg, SeparatesTwoPoints) {
  const Matrix x{{-1.0, 0.0}, {1.0, 0.0}};
  const std::vector<Label> y = {Label::Licit, Label::Illicit};
  const auto m = train_logreg(x, y);
  EXPECT_EQ(m->predict(x), y);
  const auto p = m->predict_score(x);
  EXPECT_LT(p[0], 0.1);
  EXPECT_GT(p[1], 0.9);
}

TEST(LogReg, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  const Matrix x = oracle::random_matrix(40, 5, rng, -2, 2);
  std::vector<int> t(40);
  for (auto& v : t) v = rng.bernoulli(0.3) ? 1 : 0;
  std::vector<double> p(6);
  for (auto& v : p) v = rng.uniform(-1, 1);
  const std::vector<double> cw = {0.3, 0.7};
  const auto og = logreg_objective(p, x, t, cw, 0.01);
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double h = 1e-6;
    auto up = p, dn = p;
    up[j] += h;
    dn[j] -= h;
    const double fd = (logreg_objective(up, x, t, cw, 0.01).value - logreg_objective(dn, x, t, cw, 0.01).value) / (2 * h);
    EXPECT_LT(std::abs(fd - og.grad[j]) / std::max(1e-8, std::abs(fd) + std::abs(og.grad[j])), 1e-5) << j;
  }
}

TEST(Svc, PointsOnOppositeAxes) {
  const Matrix x{{-1.0, 0.0}, {1.0, 0.0}};
  const std::vector<Label> y = {Label::Licit, Label::Illicit};
  const auto m = train_linear_svc(x, y);
  EXPECT_EQ(m->predict(x), y);
  const auto s = m->predict_score(x);
  EXPECT_LT(s[0], 0.0);
  EXPECT_GT(s[1], 0.0);
}

TEST(Svc, AveragedObjectiveIsNonincreasing) {
  Rng rng(7);
  Matrix x(60, 2);
  std::vector<Label> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    const bool ill = i % 3 == 0;
    x(i, 0) = rng.normal() + (ill ? 2.0 : -2.0);
    x(i, 1) = rng.normal();
    y[i] = ill ? Label::Illicit : Label::Licit;
  }
  SvcConfig cfg;
  cfg.lambda = 0.1;
  cfg.epochs = 200;
  std::vector<double> trace;
  train_linear_svc(x, y, cfg, &trace);
  ASSERT_EQ(trace.size(), 200u);
  for (std::size_t e = 1; e < trace.size(); ++e) EXPECT_LE(trace[e], trace[e - 1] + 1e-12) << "epoch " << e;
}

TEST(Svc, ScalingTheMarginKeepsPredictions) {
  const auto& s = test_util::synth_split();
  const auto m = train_linear_svc(s.x_train, s.y_train);
  Checkpoint ck;
  m->save(ck);
  auto w = m->weights();
  for (auto& v : w) v *= 3.7;
  ck.put_vector("svc/weights", w);
  EXPECT_EQ(LinearSvcClassifier::load(ck)->predict(s.x_test), m->predict(s.x_test));
}

TEST(Knn, KOneReturnsTrainingLabel) {
  Rng rng(8);
  const Matrix x = oracle::random_matrix(30, 3, rng);
  std::vector<Label> y(30);
  for (auto& l : y) l = rng.bernoulli(0.5) ? Label::Illicit : Label::Licit;
  EXPECT_EQ(train_knn(x, y, {1})->predict(x), y);
}

TEST(Knn, KEqualsNVotesMajority) {
  Rng rng(9);
  const Matrix x = oracle::random_matrix(50, 3, rng);
  std::vector<Label> y(50, Label::Licit);
  for (std::size_t i = 0; i < 5; ++i) y[i * 10] = Label::Illicit;
  for (auto l : train_knn(x, y, {50})->predict(oracle::random_matrix(20, 3, rng))) EXPECT_EQ(l, Label::Licit);
}

TEST(Knn, TiedVoteGoesToLicit) {
  const Matrix x{{0.0}, {1.0}, {10.0}};
  const std::vector<Label> y = {Label::Illicit, Label::Licit, Label::Illicit};
  EXPECT_EQ(train_knn(x, y, {2})->predict(Matrix{{0.4}})[0], Label::Licit);
}

TEST(Knn, MatchesBruteForce) {
  Rng rng(10);
  for (std::size_t n : {30u, 200u, 1000u}) {
    const Matrix x = oracle::random_matrix(n, 4, rng, -3, 3);
    std::vector<Label> y(n);
    for (auto& l : y) l = rng.bernoulli(0.3) ? Label::Illicit : Label::Licit;
    const Matrix q = oracle::random_matrix(40, 4, rng, -3, 3);
    for (std::size_t k : {1u, 4u, 5u}) EXPECT_EQ(train_knn(x, y, {k})->predict(q), oracle::knn(x, y, q, k)) << n << " " << k;
  }
}

TEST(Knn, InvalidKThrows) {
  const Matrix x{{0.0}, {1.0}};
  const std::vector<Label> y = {Label::Licit, Label::Illicit};
  EXPECT_THROW(train_knn(x, y, {0}), ArgumentError);
  EXPECT_THROW(train_knn(x, y, {3}), ArgumentError);
}

TEST(Mlp, ZeroHeadGivesUniformProbabilities) {
  const auto& s = test_util::synth_split();
  MlpConfig cfg;
  cfg.epochs = 0;
  cfg.zero_init_head = true;
  for (double p : train_mlp(s.x_train, s.y_train, cfg)->predict_score(s.x_test)) EXPECT_DOUBLE_EQ(p, 0.5);
}

TEST(Mlp, LearnsSyntheticPattern) {
  const auto& s = test_util::synth_split();
  const auto m = train_mlp(s.x_train, s.y_train);
  const auto pred = m->predict(s.x_test);
  EXPECT_EQ(pred.size(), s.x_test.rows());
  EXPECT_GE(illicit_f1(pred, s.y_test), 0.9);
}

TEST(Mlp, LossCurveIsReproducible) {
  const auto& s = test_util::synth_split();
  MlpConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 3;
  const auto a = train_mlp(s.x_train, s.y_train, cfg), b = train_mlp(s.x_train, s.y_train, cfg);
  EXPECT_EQ(a->loss_curve(), b->loss_curve());
  EXPECT_EQ(a->loss_curve().size(), 30u);
  cfg.seed = 4;
  EXPECT_NE(train_mlp(s.x_train, s.y_train, cfg)->loss_curve(), a->loss_curve());
}

TEST(Baselines, PredictLengthAndRetrainDeterminism) {
  const auto& s = test_util::synth_split(FeatureMode::TxAgg);
  ForestConfig fc;
  fc.n_trees = 10;
  fc.seed = 1;
  AdaBoostConfig ac;
  ac.rounds = 10;
  MlpConfig mc;
  mc.epochs = 20;
  auto fit_all = [&] {
    std::vector<std::unique_ptr<Classifier>> v;
    v.push_back(train_decision_tree(s.x_train, s.y_train));
    v.push_back(train_random_forest(s.x_train, s.y_train, fc));
    v.push_back(train_adaboost(s.x_train, s.y_train, ac));
    v.push_back(train_logreg(s.x_train, s.y_train));
    v.push_back(train_linear_svc(s.x_train, s.y_train));
    v.push_back(train_knn(s.x_train, s.y_train));
    v.push_back(train_mlp(s.x_train, s.y_train, mc));
    return v;
  };
  const auto a = fit_all(), b = fit_all();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto pa = a[i]->predict(s.x_test);
    EXPECT_EQ(pa.size(), s.x_test.rows()) << a[i]->family();
    EXPECT_EQ(pa, b[i]->predict(s.x_test)) << a[i]->family();
    for (double v : a[i]->predict_score(s.x_test)) ASSERT_TRUE(std::isfinite(v)) << a[i]->family();
  }
}

TEST(Baselines, CheckpointRoundTripPreservesScores) {
  const auto& s = test_util::synth_split();
  ForestConfig fc;
  fc.n_trees = 5;
  AdaBoostConfig ac;
  ac.rounds = 5;
  MlpConfig mc;
  mc.epochs = 5;
  std::vector<std::unique_ptr<Classifier>> models;
  models.push_back(train_decision_tree(s.x_train, s.y_train));
  models.push_back(train_random_forest(s.x_train, s.y_train, fc));
  models.push_back(train_adaboost(s.x_train, s.y_train, ac));
  models.push_back(train_logreg(s.x_train, s.y_train));
  models.push_back(train_linear_svc(s.x_train, s.y_train));
  models.push_back(train_knn(s.x_train, s.y_train));
  models.push_back(train_mlp(s.x_train, s.y_train, mc));
  for (const auto& m : models) {
    Checkpoint ck;
    m->save(ck);
    const auto bytes = ck.serialize();
    const auto back = Checkpoint::deserialize(std::string(bytes.begin(), bytes.end()));
    std::unique_ptr<Classifier> r;
    const auto f = m->family();
    if (f == "decision_tree") r = DecisionTreeClassifier::load(back);
    else if (f == "random_forest") r = RandomForestClassifier::load(back);
    else if (f == "adaboost") r = AdaBoostClassifier::load(back);
    else if (f == "logreg") r = LogisticRegressionClassifier::load(back);
    else if (f == "svc") r = LinearSvcClassifier::load(back);
    else if (f == "knn") r = KnnClassifier::load(back);
    else r = MlpClassifier::load(back);
    EXPECT_EQ(r->predict_score(s.x_test), m->predict_score(s.x_test)) << f;
  }
}
