#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "amlgraph/models.hpp"

namespace amlgraph {

struct BenchCell {
  std::string family;
  FeatureMode mode = FeatureMode::Tx;
};

/// Every results-table row: baselines in both feature modes, then the
/// graph models on local features.
inline std::vector<BenchCell> default_bench_cells() {
  std::vector<BenchCell> cells;
  for (const auto& f : baseline_families()) {
    cells.push_back({f, FeatureMode::Tx});
    cells.push_back({f, FeatureMode::TxAgg});
  }
  for (const auto& f : graph_families()) cells.push_back({f, FeatureMode::Tx});
  return cells;
}

struct BenchOptions {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::size_t repeats = 1;
  std::vector<BenchCell> cells = default_bench_cells();
  std::function<void(const std::string&)> log;  // progress lines, serialized
};

struct CellResult {
  BenchCell cell;
  std::vector<EvalReport> runs;  // one per repeat
  EvalReport mean;               // metric means over runs; counts from the first run
  EvalReport sd;                 // sample standard deviations (0 for one run)
  double seconds = 0.0;
  std::string error;

  bool ok() const noexcept { return error.empty(); }
};

struct BenchResult {
  std::vector<CellResult> cells;

  bool ok() const {
    for (const auto& c : cells)
      if (!c.ok()) return false;
    return true;
  }
  std::vector<EvalReport> reports() const {
    std::vector<EvalReport> r;
    for (const auto& c : cells)
      if (c.ok()) r.push_back(c.mean);
    return r;
  }
};

/// Seed of repeat `r`; the first repeat uses the master seed itself.
inline std::uint64_t repeat_seed(std::uint64_t master, std::size_t r) {
  return r == 0 ? master : derive_seed(master, "repeat:" + std::to_string(r));
}

namespace detail {

inline void summarize_runs(CellResult& c) {
  auto fields = [](EvalReport& r) {
    return std::array<double*, 7>{&r.illicit.precision, &r.illicit.recall, &r.illicit.f1, &r.licit.precision,
                                  &r.licit.recall,      &r.licit.f1,       &r.micro_f1};
  };
  c.mean = c.runs.front();
  c.sd = c.runs.front();
  auto mean_f = fields(c.mean), sd_f = fields(c.sd);
  const double n = static_cast<double>(c.runs.size());
  for (std::size_t k = 0; k < mean_f.size(); ++k) {
    double s = 0.0;
    for (auto& r : c.runs) s += *fields(r)[k];
    const double m = s / n;
    double ss = 0.0;
    for (auto& r : c.runs) ss += (*fields(r)[k] - m) * (*fields(r)[k] - m);
    *mean_f[k] = m;
    *sd_f[k] = c.runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
}

}  // namespace detail

/// Trains and evaluates every cell on the test split. A failing cell is
/// recorded and the run continues. Results are ordered as `opts.cells`
/// regardless of `jobs`.
inline BenchResult run_bench(const PreprocessedDataset& ds, const Split& split, const TxGraph& g,
                             const BenchOptions& opts) {
  require(opts.repeats >= 1, "bench: repeats must be at least 1");
  require(opts.jobs >= 1, "bench: jobs must be at least 1");
  BenchResult res;
  res.cells.resize(opts.cells.size());
  std::mutex log_mu;
  auto log = [&](const std::string& line) {
    if (!opts.log) return;
    std::lock_guard lk(log_mu);
    opts.log(line);
  };

  auto run_cell = [&](std::size_t i) {
    auto& c = res.cells[i];
    c.cell = opts.cells[i];
    const std::string tag = c.cell.family + " (" + feature_mode_name(c.cell.mode) + ")";
    const auto t0 = std::chrono::steady_clock::now();
    try {
      for (std::size_t r = 0; r < opts.repeats; ++r) {
        const auto seed = repeat_seed(opts.seed, r);
        auto trained = train_model(c.cell.family, ds, c.cell.mode, split, &g, opts.config, seed);
        c.runs.push_back(evaluate_model(*trained.model, ds, c.cell.mode, split.test, seed));
      }
      detail::summarize_runs(c);
      c.mean.meta.seed = opts.seed;
    } catch (const std::exception& e) {
      c.error = e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log(c.ok() ? tag + ": illicit F1 " + format3(c.mean.illicit.f1) + " (" + format3(c.seconds) + " s)"
               : tag + ": FAILED: " + c.error);
  };

  const std::size_t workers = std::min(opts.jobs, opts.cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < opts.cells.size(); ++i) run_cell(i);
    return res;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < opts.cells.size(); i = next++) run_cell(i);
    });
  pool.clear();
  return res;
}

/// Illicit-class and licit-class tables in Markdown, plus standard
/// deviations when there was more than one repeat.
inline std::string bench_markdown(const BenchResult& res) {
  const auto reports = res.reports();
  std::string out = "## Illicit transaction classification\n\n" +
                    markdown_table(reports, Label::Illicit, display_row) +
                    "\n## Licit transaction classification\n\n" + markdown_table(reports, Label::Licit, display_row);
  bool multi = false;
  for (const auto& c : res.cells) multi = multi || c.runs.size() > 1;
  if (multi) {
    out += "\n## Spread over repeats (mean ± sd)\n\n| Model | Illicit F1 | Licit F1 | M.A. F1 |\n|---|---|---|---|\n";
    for (const auto& c : res.cells) {
      if (!c.ok()) continue;
      out += "| " + display_row(c.mean) + " | " + format3(c.mean.illicit.f1) + " ± " + format3(c.sd.illicit.f1) +
             " | " + format3(c.mean.licit.f1) + " ± " + format3(c.sd.licit.f1) + " | " + format3(c.mean.micro_f1) +
             " ± " + format3(c.sd.micro_f1) + " |\n";
    }
  }
  std::string failed;
  for (const auto& c : res.cells)
    if (!c.ok()) failed += "- " + c.cell.family + " (" + feature_mode_name(c.cell.mode) + "): " + c.error + "\n";
  if (!failed.empty()) out += "\n## Failed cells\n\n" + failed;
  return out;
}

inline std::string bench_timings_csv(const BenchResult& res) {
  std::string out = "model,features,seconds,status\n";
  for (const auto& c : res.cells)
    out += c.cell.family + "," + feature_mode_name(c.cell.mode) + "," + detail::full_precision(c.seconds) + "," +
           (c.ok() ? "ok" : "failed") + "\n";
  return out;
}

}  // namespace amlgraph
