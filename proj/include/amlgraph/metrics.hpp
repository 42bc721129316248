#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "amlgraph/dataset.hpp"
#include "amlgraph/error.hpp"

namespace amlgraph {

/// Counts for one designated positive class.
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  /// The same counts seen from the other class.
  ConfusionMatrix swapped() const noexcept { return {tn, fn, fp, tp}; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const Label> preds, std::span<const Label> truth, Label positive) {
  require(preds.size() == truth.size(), "confusion: length mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive, t = truth[i] == positive;
    if (p && t) ++cm.tp;
    else if (p) ++cm.fp;
    else if (t) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

// Zero denominators yield 0; callers that care check the *_defined helpers.
inline bool precision_defined(const ConfusionMatrix& cm) noexcept { return cm.tp + cm.fp > 0; }
inline bool recall_defined(const ConfusionMatrix& cm) noexcept { return cm.tp + cm.fn > 0; }

inline double precision(const ConfusionMatrix& cm) noexcept {
  return precision_defined(cm) ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp) : 0.0;
}

inline double recall(const ConfusionMatrix& cm) noexcept {
  return recall_defined(cm) ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn) : 0.0;
}

/// Harmonic mean; 0 when p + r = 0.
inline double f1(double p, double r) noexcept { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline double accuracy(std::span<const Label> preds, std::span<const Label> truth) {
  require(preds.size() == truth.size(), "accuracy: length mismatch");
  if (preds.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

/// F1 over TP/FP/FN pooled across the licit and illicit classes.
inline double micro_f1(std::span<const Label> preds, std::span<const Label> truth) {
  require(preds.size() == truth.size(), "micro_f1: length mismatch (" + std::to_string(preds.size()) + " vs " +
                                            std::to_string(truth.size()) + ")");
  ConfusionMatrix pooled;
  for (Label c : {Label::Licit, Label::Illicit}) {
    const auto cm = confusion(preds, truth, c);
    pooled.tp += cm.tp;
    pooled.fp += cm.fp;
    pooled.fn += cm.fn;
  }
  return f1(precision(pooled), recall(pooled));
}

struct ClassMetrics {
  ConfusionMatrix cm;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;

  static ClassMetrics from(const ConfusionMatrix& cm) {
    ClassMetrics m;
    m.cm = cm;
    m.precision = amlgraph::precision(cm);
    m.recall = amlgraph::recall(cm);
    m.f1 = amlgraph::f1(m.precision, m.recall);
    m.precision_undefined = !precision_defined(cm);
    m.recall_undefined = !recall_defined(cm);
    return m;
  }
};

struct ReportMeta {
  std::string model;
  std::string features;
  std::uint64_t seed = 0;
};

struct EvalReport {
  ReportMeta meta;
  std::size_t n_samples = 0;
  ClassMetrics illicit;
  ClassMetrics licit;
  double micro_f1 = 0.0;
};

inline EvalReport full_report(std::span<const Label> preds, std::span<const Label> truth, ReportMeta meta = {}) {
  require(!truth.empty(), "full_report: no samples");
  require(preds.size() == truth.size(), "full_report: length mismatch");
  EvalReport r;
  r.meta = std::move(meta);
  r.n_samples = truth.size();
  r.illicit = ClassMetrics::from(confusion(preds, truth, Label::Illicit));
  r.licit = ClassMetrics::from(confusion(preds, truth, Label::Licit));
  r.micro_f1 = amlgraph::micro_f1(preds, truth);
  return r;
}

inline const char* kReportCsvHeader =
    "model,features,precision_illicit,recall_illicit,f1_illicit,precision_licit,recall_licit,f1_licit,micro_f1,seed";

namespace detail {
inline std::string full_precision(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}
}  // namespace detail

inline std::string report_csv_row(const EvalReport& r) {
  using detail::full_precision;
  return r.meta.model + "," + r.meta.features + "," + full_precision(r.illicit.precision) + "," +
         full_precision(r.illicit.recall) + "," + full_precision(r.illicit.f1) + "," +
         full_precision(r.licit.precision) + "," + full_precision(r.licit.recall) + "," +
         full_precision(r.licit.f1) + "," + full_precision(r.micro_f1) + "," + std::to_string(r.meta.seed);
}

inline std::string reports_csv(std::span<const EvalReport> rows) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& r : rows) out += report_csv_row(r) + "\n";
  return out;
}

inline std::string format3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

/// Markdown table "Model | Precision | Recall | F1 Score | M.A. F1" for the
/// given class, column maxima in bold. Maxima compare the 3-decimal values.
/// `row_label` names each row; the default is "model (features)".
inline std::string markdown_table(std::span<const EvalReport> rows, Label positive,
                                  const std::function<std::string(const EvalReport&)>& row_label = {}) {
  auto metrics = [&](const EvalReport& r) -> const ClassMetrics& {
    return positive == Label::Illicit ? r.illicit : r.licit;
  };
  auto cell = [&](const EvalReport& r, int col) {
    const auto& m = metrics(r);
    switch (col) {
      case 0: return m.precision;
      case 1: return m.recall;
      case 2: return m.f1;
      default: return r.micro_f1;
    }
  };
  std::string best[4];
  for (int c = 0; c < 4; ++c) {
    double mx = -1.0;
    for (const auto& r : rows) mx = std::max(mx, std::stod(format3(cell(r, c))));
    best[c] = format3(mx);
  }
  std::string out = "| Model | Precision | Recall | F1 Score | M.A. F1 |\n|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += "| " + (row_label ? row_label(r) : r.meta.model + " (" + r.meta.features + ")");
    for (int c = 0; c < 4; ++c) {
      const auto s = format3(cell(r, c));
      out += " | " + (s == best[c] ? "**" + s + "**" : s);
    }
    out += " |\n";
  }
  return out;
}

}  // namespace amlgraph
