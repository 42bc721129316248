#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "amlgraph/error.hpp"
#include "amlgraph/matrix.hpp"

namespace amlgraph {

/// Node class. The integer values are the stable encoding used in bundles,
/// checkpoints and as class indices for the two-class models.
enum class Label : std::uint8_t { Licit = 0, Illicit = 1, Unknown = 2 };

inline constexpr int class_index(Label l) noexcept { return static_cast<int>(l); }

inline constexpr std::string_view label_name(Label l) noexcept {
  switch (l) {
    case Label::Licit: return "licit";
    case Label::Illicit: return "illicit";
    default: return "unknown";
  }
}

/// Maps the Elliptic class column ("1", "2", "unknown").
inline std::optional<Label> parse_class_token(std::string_view s) {
  if (s == "1") return Label::Illicit;
  if (s == "2") return Label::Licit;
  if (s == "unknown") return Label::Unknown;
  return std::nullopt;
}

inline constexpr std::string_view class_token(Label l) noexcept {
  switch (l) {
    case Label::Illicit: return "1";
    case Label::Licit: return "2";
    default: return "unknown";
  }
}

/// How the feature columns (after tx_id and time_step) split into
/// transaction-local and neighbour-aggregated blocks.
struct ColumnLayout {
  std::size_t n_local = 0;
  std::size_t n_agg = 0;

  std::size_t total() const noexcept { return n_local + n_agg; }
  friend bool operator==(const ColumnLayout&, const ColumnLayout&) = default;

  /// Public Elliptic CSV: 93 local and 72 aggregated columns follow the
  /// time step. Other widths are treated as all-local unless overridden.
  static ColumnLayout detect(std::size_t n_feature_cols, std::optional<std::size_t> n_local = std::nullopt) {
    if (n_local) {
      require(*n_local <= n_feature_cols, "column layout: n_local exceeds feature column count");
      return {*n_local, n_feature_cols - *n_local};
    }
    if (n_feature_cols == 165) return {93, 72};
    return {n_feature_cols, 0};
  }
};

struct LabelCounts {
  std::size_t illicit = 0;
  std::size_t licit = 0;
  std::size_t unknown = 0;
  std::size_t total() const noexcept { return illicit + licit + unknown; }
  friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

inline LabelCounts count_labels(const std::vector<Label>& labels) {
  LabelCounts c;
  for (Label l : labels) {
    if (l == Label::Illicit) ++c.illicit;
    else if (l == Label::Licit) ++c.licit;
    else ++c.unknown;
  }
  return c;
}

using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// Parsed Elliptic tables. Rows are in file order; `labels` is aligned to
/// feature rows and edges are resolved to row indices.
struct RawTables {
  std::vector<std::string> tx_ids;
  std::vector<int> time_steps;
  Matrix features;  // rows × layout.total()
  std::vector<Label> labels;
  std::vector<Edge> edges;
  ColumnLayout layout;

  std::size_t n_nodes() const noexcept { return tx_ids.size(); }
  friend bool operator==(const RawTables&, const RawTables&) = default;
};

struct PreprocessedDataset {
  std::vector<std::string> tx_ids;  // node index -> original id, ascending id order
  Matrix X;
  std::vector<Label> y;  // Licit or Illicit only
  std::vector<int> time_steps;
  std::vector<Edge> edges;
  ColumnLayout layout;

  std::size_t n_nodes() const noexcept { return tx_ids.size(); }
  int max_time_step() const noexcept {
    return time_steps.empty() ? 0 : *std::max_element(time_steps.begin(), time_steps.end());
  }
  friend bool operator==(const PreprocessedDataset&, const PreprocessedDataset&) = default;
};

namespace detail {

inline std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  if (s.empty()) return std::nullopt;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Permutation that orders transaction ids ascending: numerically when every
/// id is an unsigned integer, lexicographically otherwise.
inline std::vector<std::size_t> sorted_id_order(const std::vector<std::string>& ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::uint64_t> numeric;
  numeric.reserve(ids.size());
  for (const auto& s : ids) {
    auto v = detail::parse_u64(s);
    if (!v) {
      numeric.clear();
      break;
    }
    numeric.push_back(*v);
  }
  if (numeric.size() == ids.size()) {
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return numeric[a] < numeric[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
  }
  return order;
}

/// Merge features with classes, encode labels, reindex by sorted id, keep
/// the labelled nodes and drop every edge touching an unknown node.
inline PreprocessedDataset preprocess(const RawTables& raw) {
  const std::size_t n = raw.n_nodes();
  require<StructuralError>(raw.labels.size() == n && raw.time_steps.size() == n && raw.features.rows() == n,
                           "preprocess: raw tables are not row-aligned");
  const auto order = sorted_id_order(raw.tx_ids);

  constexpr std::uint32_t dropped = UINT32_MAX;
  std::vector<std::uint32_t> new_index(n, dropped);
  std::vector<std::size_t> kept;
  kept.reserve(n);
  for (std::size_t row : order) {
    if (raw.labels[row] == Label::Unknown) continue;
    new_index[row] = static_cast<std::uint32_t>(kept.size());
    kept.push_back(row);
  }

  PreprocessedDataset ds;
  ds.layout = raw.layout;
  ds.X = select_rows(raw.features, kept);
  ds.tx_ids.reserve(kept.size());
  ds.y.reserve(kept.size());
  ds.time_steps.reserve(kept.size());
  for (std::size_t row : kept) {
    ds.tx_ids.push_back(raw.tx_ids[row]);
    ds.y.push_back(raw.labels[row]);
    ds.time_steps.push_back(raw.time_steps[row]);
  }
  if (kept.empty()) ds.X = Matrix(0, raw.layout.total());
  for (const auto& [u, v] : raw.edges) {
    require<StructuralError>(u < n && v < n, "preprocess: edge endpoint out of range");
    if (new_index[u] == dropped || new_index[v] == dropped) continue;
    ds.edges.emplace_back(new_index[u], new_index[v]);
  }
  return ds;
}

/// Re-expresses a clean dataset as raw tables (rows already sorted, no
/// unknown labels).
inline RawTables to_raw(const PreprocessedDataset& ds) {
  return RawTables{ds.tx_ids, ds.time_steps, ds.X, ds.y, ds.edges, ds.layout};
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline constexpr int kDefaultSplitBoundary = 34;

/// Train = nodes with time_step <= boundary, test = the rest.
inline Split temporal_split(const PreprocessedDataset& ds, int boundary = kDefaultSplitBoundary) {
  const int max_step = ds.max_time_step();
  require(boundary >= 1 && boundary < max_step,
          "temporal_split: boundary " + std::to_string(boundary) + " outside [1, " + std::to_string(max_step) + ")");
  Split s;
  for (std::size_t i = 0; i < ds.n_nodes(); ++i) (ds.time_steps[i] <= boundary ? s.train : s.test).push_back(i);
  return s;
}

enum class FeatureMode { Tx, TxAgg };

inline std::string feature_mode_name(FeatureMode m) { return m == FeatureMode::Tx ? "tx" : "tx_agg"; }

inline FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "tx") return FeatureMode::Tx;
  if (s == "tx_agg" || s == "tx+agg" || s == "txagg") return FeatureMode::TxAgg;
  throw ArgumentError("unknown feature mode '" + std::string(s) + "' (expected tx or tx_agg)");
}

/// Column view for a feature mode. With include_time_step the time step is
/// prepended as column 0.
inline Matrix feature_view(const PreprocessedDataset& ds, FeatureMode mode, bool include_time_step = false) {
  require(ds.n_nodes() > 0, "feature_view: empty dataset");
  const std::size_t width = mode == FeatureMode::Tx ? ds.layout.n_local : ds.layout.total();
  Matrix cols = column_slice(ds.X, 0, width);
  if (!include_time_step) return cols;
  Matrix ts(ds.n_nodes(), 1);
  for (std::size_t i = 0; i < ds.n_nodes(); ++i) ts(i, 0) = ds.time_steps[i];
  return hconcat(ts, cols);
}

/// Class indices (0 licit, 1 illicit) for the given nodes.
inline std::vector<int> class_indices(const std::vector<Label>& y, std::span<const std::size_t> nodes) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (auto i : nodes) out.push_back(class_index(y[i]));
  return out;
}

}  // namespace amlgraph
