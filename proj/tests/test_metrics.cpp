#include <gtest/gtest.h>

#include <algorithm>

#include "amlgraph/metrics.hpp"
#include "oracles.hpp"

using namespace amlgraph;

namespace {

std::vector<Label> from_bits(unsigned bits, int n) {
  std::vector<Label> v(n);
  for (int i = 0; i < n; ++i) v[i] = (bits >> i) & 1u ? Label::Illicit : Label::Licit;
  return v;
}

double plain_accuracy(const std::vector<Label>& p, const std::vector<Label>& t) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == t[i];
  return static_cast<double>(hit) / static_cast<double>(p.size());
}

}  // namespace

TEST(Metrics, TrivialPrecisionAndRecall) {
  EXPECT_EQ(precision({2, 0, 0, 0}), 1.0);
  EXPECT_EQ(recall({0, 0, 5, 0}), 0.0);
}

TEST(Metrics, DirectArithmeticExample) {
  const ConfusionMatrix cm{79, 8, 21, 0};
  EXPECT_NEAR(precision(cm), 79.0 / 87.0, 1e-15);
  EXPECT_NEAR(precision(cm), 0.908, 5e-4);
  EXPECT_DOUBLE_EQ(recall(cm), 0.79);
}

TEST(Metrics, F1OfReferenceRows) {
  EXPECT_EQ(format3(f1(0.906, 0.790)), "0.844");
  EXPECT_NEAR(f1(0.906, 0.790), 0.844, 5e-4);
  // 0.78264 when computed from the rounded inputs.
  EXPECT_NEAR(f1(0.981, 0.651), 0.782, 1e-3);
  EXPECT_EQ(f1(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f1(0.37, 0.37), 0.37);
}

TEST(Metrics, F1Bounds) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double p = rng.uniform(0.0, 1.0), r = rng.uniform(0.0, 1.0), f = f1(p, r);
    EXPECT_GE(f, std::min(p, r) - 1e-15);
    EXPECT_LE(f, std::max(p, r) + 1e-15);
    EXPECT_LE(f, 0.5 * (p + r) + 1e-15);
  }
}

TEST(Metrics, ConfusionMatchesBruteCount) {
  Rng rng(2);
  std::vector<Label> p(200), t(200);
  for (std::size_t i = 0; i < 200; ++i) {
    p[i] = rng.bernoulli(0.3) ? Label::Illicit : Label::Licit;
    t[i] = rng.bernoulli(0.2) ? Label::Illicit : Label::Licit;
  }
  const auto cm = confusion(p, t, Label::Illicit);
  const auto o = oracle::count(p, t, Label::Illicit);
  EXPECT_EQ(cm, (ConfusionMatrix{o.tp, o.fp, o.fn, o.tn}));
  EXPECT_EQ(cm.total(), 200u);
}

TEST(Metrics, SwappingPositiveClassCommutes) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Label> p(30), t(30);
    for (std::size_t i = 0; i < 30; ++i) {
      p[i] = rng.bernoulli(0.5) ? Label::Illicit : Label::Licit;
      t[i] = rng.bernoulli(0.5) ? Label::Illicit : Label::Licit;
    }
    const auto ill = confusion(p, t, Label::Illicit), lic = confusion(p, t, Label::Licit);
    EXPECT_EQ(ill.swapped(), lic);
    EXPECT_EQ(lic.swapped(), ill);
    EXPECT_EQ(precision(ill.swapped()), precision(lic));
    EXPECT_EQ(recall(ill.swapped()), recall(lic));
  }
}

TEST(Metrics, MicroF1EqualsAccuracyExhaustively) {
  for (int n = 1; n <= 8; ++n)
    for (unsigned pb = 0; pb < (1u << n); ++pb)
      for (unsigned tb = 0; tb < (1u << n); ++tb) {
        const auto p = from_bits(pb, n), t = from_bits(tb, n);
        ASSERT_NEAR(micro_f1(p, t), plain_accuracy(p, t), 1e-12) << n << " " << pb << " " << tb;
      }
}

TEST(Metrics, MicroF1OnRandomVector) {
  Rng rng(4);
  std::vector<Label> p(100), t(100);
  for (std::size_t i = 0; i < 100; ++i) {
    p[i] = rng.bernoulli(0.4) ? Label::Illicit : Label::Licit;
    t[i] = rng.bernoulli(0.4) ? Label::Illicit : Label::Licit;
  }
  EXPECT_NEAR(micro_f1(p, t), plain_accuracy(p, t), 1e-12);
  std::vector<Label> nine(10, Label::Licit), truth(10, Label::Licit);
  truth[3] = Label::Illicit;
  EXPECT_NEAR(micro_f1(nine, truth), 0.9, 1e-12);
  EXPECT_EQ(micro_f1(truth, truth), 1.0);
}

TEST(Metrics, LengthMismatchThrows) {
  const std::vector<Label> a(3, Label::Licit), b(4, Label::Licit);
  EXPECT_THROW(micro_f1(a, b), ArgumentError);
  EXPECT_THROW(confusion(a, b, Label::Illicit), ArgumentError);
  EXPECT_THROW(full_report(a, b), ArgumentError);
  EXPECT_THROW(full_report({}, {}), ArgumentError);
}

TEST(FullReport, PerfectPredictions) {
  const std::vector<Label> t = {Label::Licit, Label::Illicit, Label::Licit};
  const auto r = full_report(t, t);
  for (const auto* m : {&r.illicit, &r.licit}) {
    EXPECT_EQ(m->precision, 1.0);
    EXPECT_EQ(m->recall, 1.0);
    EXPECT_EQ(m->f1, 1.0);
  }
  EXPECT_EQ(r.micro_f1, 1.0);
  EXPECT_EQ(r.n_samples, 3u);
}

TEST(FullReport, AllLicitOnImbalancedData) {
  std::vector<Label> truth(110, Label::Licit);
  std::fill(truth.begin(), truth.begin() + 10, Label::Illicit);
  const std::vector<Label> preds(110, Label::Licit);
  const auto r = full_report(preds, truth);
  EXPECT_EQ(r.licit.recall, 1.0);
  EXPECT_EQ(r.illicit.recall, 0.0);
  EXPECT_NEAR(r.micro_f1, 100.0 / 110.0, 1e-12);
  EXPECT_EQ(format3(r.micro_f1), "0.909");
  EXPECT_TRUE(r.illicit.precision_undefined);
  EXPECT_EQ(r.illicit.precision, 0.0);
  EXPECT_FALSE(r.illicit.recall_undefined);
  EXPECT_FALSE(r.licit.precision_undefined);
  EXPECT_EQ(r.illicit.cm.total(), 110u);
}

TEST(FullReport, CsvRowFollowsHeader) {
  std::vector<Label> truth = {Label::Licit, Label::Illicit, Label::Illicit, Label::Licit};
  std::vector<Label> preds = {Label::Licit, Label::Illicit, Label::Licit, Label::Licit};
  const auto r = full_report(preds, truth, {"GCN", "tx", 7});
  EXPECT_EQ(std::string(kReportCsvHeader),
            "model,features,precision_illicit,recall_illicit,f1_illicit,precision_licit,recall_licit,f1_licit,"
            "micro_f1,seed");
  const auto row = report_csv_row(r);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 9);
  EXPECT_EQ(row.rfind("GCN,tx,1,0.5,", 0), 0u);
  EXPECT_EQ(row.substr(row.size() - 2), ",7");
  const std::vector<EvalReport> rows = {r, r};
  const auto csv = reports_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(FullReport, MarkdownOrderAndBoldMaxima) {
  std::vector<Label> truth = {Label::Licit, Label::Illicit, Label::Illicit, Label::Licit};
  const auto a = full_report(truth, truth, {"A", "tx", 0});
  const auto b = full_report(std::vector<Label>(4, Label::Licit), truth, {"B", "tx", 0});
  const std::vector<EvalReport> rows = {a, b};
  const auto md = markdown_table(rows, Label::Illicit);
  EXPECT_EQ(md.rfind("| Model | Precision | Recall | F1 Score | M.A. F1 |\n", 0), 0u);
  EXPECT_NE(md.find("| A (tx) | **1.000** | **1.000** | **1.000** | **1.000** |"), std::string::npos);
  EXPECT_NE(md.find("| B (tx) | 0.000 | 0.000 | 0.000 | 0.500 |"), std::string::npos);
  const auto lic = markdown_table(rows, Label::Licit, [](const EvalReport& r) { return r.meta.model; });
  EXPECT_NE(lic.find("| B | 0.500 | **1.000** | 0.667 | 0.500 |"), std::string::npos);
}
