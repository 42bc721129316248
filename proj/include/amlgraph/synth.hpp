#pragma once

#include <unordered_set>

#include "amlgraph/dataset.hpp"
#include "amlgraph/random.hpp"
#include "amlgraph/txgraph.hpp"

namespace amlgraph {

struct MotifConfig {
  std::size_t fan_in = 5;        // in-edges planted on every illicit hub
  double hub_fraction = 0.25;    // share of illicit nodes that become hubs
  double avg_out_degree = 1.0;   // background edges per node, same time step
  double feature_offset = 2.0;   // added to the signal columns of illicit nodes
  std::size_t signal_features = 8;
};

struct SynthConfig {
  std::size_t n_nodes = 2000;
  int n_steps = 49;
  double illicit_rate = 0.1;
  double unknown_rate = 0.0;
  std::size_t n_local = 16;
  std::size_t n_agg = 8;
  MotifConfig motif;
  std::uint64_t seed = 42;
};

/// Elliptic-schema tables with a planted illicit pattern: illicit rows are
/// shifted on the signal columns, and illicit hubs receive `fan_in` edges.
/// Aggregated columns are one-hop in/out means of the local columns. Rows
/// are emitted in shuffled order with non-contiguous ids.
inline RawTables synth_dataset(const SynthConfig& cfg) {
  require(cfg.n_nodes > 0, "synth_dataset: n_nodes must be positive");
  require(cfg.n_steps >= 1, "synth_dataset: n_steps must be positive");
  require(cfg.illicit_rate > 0.0 && cfg.illicit_rate < 1.0, "synth_dataset: illicit_rate must be in (0, 1)");
  require(cfg.unknown_rate >= 0.0 && cfg.unknown_rate < 1.0, "synth_dataset: unknown_rate must be in [0, 1)");
  require(cfg.n_local >= 1, "synth_dataset: need at least one local column");
  require(cfg.n_agg <= 2 * cfg.n_local, "synth_dataset: n_agg may not exceed 2 * n_local");
  require(cfg.motif.signal_features <= cfg.n_local, "synth_dataset: more signal columns than local columns");

  const std::size_t n = cfg.n_nodes;
  Rng rng(cfg.seed);

  std::vector<int> step(n);
  std::vector<std::vector<std::uint32_t>> by_step(static_cast<std::size_t>(cfg.n_steps) + 1);
  for (std::size_t i = 0; i < n; ++i) {
    step[i] = 1 + static_cast<int>(i * static_cast<std::size_t>(cfg.n_steps) / n);
    by_step[static_cast<std::size_t>(step[i])].push_back(static_cast<std::uint32_t>(i));
  }

  std::vector<Label> label(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(cfg.illicit_rate)) label[i] = Label::Illicit;
    else label[i] = rng.bernoulli(cfg.unknown_rate) ? Label::Unknown : Label::Licit;
  }

  Matrix local(n, cfg.n_local);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = local.row(i);
    for (auto& v : row) v = rng.normal();
    if (label[i] == Label::Illicit)
      for (std::size_t j = 0; j < cfg.motif.signal_features; ++j) row[j] += cfg.motif.feature_offset;
  }

  std::vector<Edge> edges;
  std::unordered_set<std::uint64_t> seen;
  auto add_edge = [&](std::uint32_t u, std::uint32_t v) {
    if (u == v) return false;
    if (!seen.insert((static_cast<std::uint64_t>(u) << 32) | v).second) return false;
    edges.emplace_back(u, v);
    return true;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto& peers = by_step[static_cast<std::size_t>(step[i])];
    if (peers.size() < 2) continue;
    const auto k = rng.below(static_cast<std::uint64_t>(2.0 * cfg.motif.avg_out_degree) + 1);
    for (std::uint64_t e = 0; e < k; ++e) add_edge(static_cast<std::uint32_t>(i), peers[rng.below(peers.size())]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != Label::Illicit || !rng.bernoulli(cfg.motif.hub_fraction)) continue;
    const auto& peers = by_step[static_cast<std::size_t>(step[i])];
    std::size_t in_deg = 0;
    for (const auto& e : edges) in_deg += e.second == i;
    // Bounded by the number of distinct peers in the same step.
    const std::size_t target = std::min(cfg.motif.fan_in, peers.size() - 1);
    std::vector<std::uint32_t> candidates;
    for (auto p : peers)
      if (p != i) candidates.push_back(p);
    rng.shuffle(candidates);
    for (std::size_t c = 0; c < candidates.size() && in_deg < target; ++c)
      if (add_edge(candidates[c], static_cast<std::uint32_t>(i))) ++in_deg;
  }

  Matrix features = local;
  if (cfg.n_agg > 0) {
    const TxGraph g(n, edges);
    features = hconcat(local, column_slice(aggregate_one_hop(g, local), 0, cfg.n_agg));
  }

  std::unordered_set<std::uint64_t> used_ids;
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t id = 0;
    do id = 1000000 + rng.below(900000000); while (!used_ids.insert(id).second);
    ids[i] = std::to_string(id);
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  rng.shuffle(order);
  std::vector<std::uint32_t> row_of(n);
  RawTables raw;
  raw.layout = {cfg.n_local, cfg.n_agg};
  raw.features = Matrix(n, cfg.n_local + cfg.n_agg);
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = order[r];
    row_of[i] = static_cast<std::uint32_t>(r);
    raw.tx_ids.push_back(ids[i]);
    raw.time_steps.push_back(step[i]);
    raw.labels.push_back(label[i]);
    std::copy(features.row(i).begin(), features.row(i).end(), raw.features.row(r).begin());
  }
  for (const auto& [u, v] : edges) raw.edges.emplace_back(row_of[u], row_of[v]);
  return raw;
}

}  // namespace amlgraph
