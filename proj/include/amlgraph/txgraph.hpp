#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "amlgraph/dataset.hpp"
#include "amlgraph/matrix.hpp"

namespace amlgraph {

/// Immutable directed graph in CSR form with a reverse (in-edge) index.
/// Neighbour lists are sorted by node index; duplicate and self edges are
/// kept as given.
class TxGraph {
 public:
  TxGraph() : out_offsets_(1, 0), in_offsets_(1, 0) {}

  TxGraph(std::size_t n_nodes, std::span<const Edge> edges) : n_(n_nodes) {
    for (const auto& [u, v] : edges) {
      if (u >= n_nodes || v >= n_nodes)
        throw StructuralError("build_graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") out of range for " + std::to_string(n_nodes) + " nodes");
    }
    build_csr(edges, /*reverse=*/false, out_offsets_, out_targets_);
    build_csr(edges, /*reverse=*/true, in_offsets_, in_sources_);
  }

  std::size_t n_nodes() const noexcept { return n_; }
  std::size_t n_edges() const noexcept { return out_targets_.size(); }

  std::span<const std::uint32_t> out_neighbors(std::size_t v) const noexcept {
    return {out_targets_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
  }
  std::span<const std::uint32_t> in_neighbors(std::size_t v) const noexcept {
    return {in_sources_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
  }
  std::size_t out_degree(std::size_t v) const noexcept { return out_offsets_[v + 1] - out_offsets_[v]; }
  std::size_t in_degree(std::size_t v) const noexcept { return in_offsets_[v + 1] - in_offsets_[v]; }

  const std::vector<std::size_t>& out_offsets() const noexcept { return out_offsets_; }
  const std::vector<std::uint32_t>& out_targets() const noexcept { return out_targets_; }
  const std::vector<std::size_t>& in_offsets() const noexcept { return in_offsets_; }
  const std::vector<std::uint32_t>& in_sources() const noexcept { return in_sources_; }

  /// Edges in CSR order (by source, then target).
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(n_edges());
    for (std::size_t u = 0; u < n_; ++u)
      for (auto v : out_neighbors(u)) out.emplace_back(static_cast<std::uint32_t>(u), v);
    return out;
  }

 private:
  void build_csr(std::span<const Edge> edges, bool reverse, std::vector<std::size_t>& offsets,
                 std::vector<std::uint32_t>& adj) const {
    offsets.assign(n_ + 1, 0);
    for (const auto& e : edges) ++offsets[(reverse ? e.second : e.first) + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    adj.resize(edges.size());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& e : edges) {
      const auto from = reverse ? e.second : e.first;
      adj[cursor[from]++] = reverse ? e.first : e.second;
    }
    for (std::size_t v = 0; v < n_; ++v)
      std::sort(adj.begin() + static_cast<std::ptrdiff_t>(offsets[v]),
                adj.begin() + static_cast<std::ptrdiff_t>(offsets[v + 1]));
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> out_offsets_;
  std::vector<std::uint32_t> out_targets_;
  std::vector<std::size_t> in_offsets_;
  std::vector<std::uint32_t> in_sources_;
};

inline TxGraph build_graph(const PreprocessedDataset& ds) { return TxGraph(ds.n_nodes(), ds.edges); }

/// Graph over every raw row, unknown-labelled nodes included.
inline TxGraph build_full_graph(const RawTables& raw) { return TxGraph(raw.n_nodes(), raw.edges); }

struct EgoSubgraph {
  std::uint32_t center = 0;
  int depth = 0;
  std::vector<std::uint32_t> members;  // ascending
  std::vector<int> hops;               // aligned with members
  std::vector<Edge> edges;             // induced, CSR order, global indices

  bool contains(std::uint32_t v) const { return std::binary_search(members.begin(), members.end(), v); }
};

/// Breadth-first search over the undirected view, up to `depth` hops.
inline EgoSubgraph ego_subgraph(const TxGraph& g, std::size_t center, int depth) {
  require(center < g.n_nodes(), "ego_subgraph: center " + std::to_string(center) + " out of range");
  require(depth >= 0, "ego_subgraph: negative depth");
  std::vector<int> dist(g.n_nodes(), -1);
  std::vector<std::uint32_t> frontier{static_cast<std::uint32_t>(center)}, next, visited = frontier;
  dist[center] = 0;
  for (int d = 1; d <= depth && !frontier.empty(); ++d) {
    next.clear();
    for (auto u : frontier) {
      for (auto nb : {g.out_neighbors(u), g.in_neighbors(u)}) {
        for (auto v : nb) {
          if (dist[v] >= 0) continue;
          dist[v] = d;
          next.push_back(v);
          visited.push_back(v);
        }
      }
    }
    std::swap(frontier, next);
  }
  EgoSubgraph sub;
  sub.center = static_cast<std::uint32_t>(center);
  sub.depth = depth;
  sub.members = std::move(visited);
  std::sort(sub.members.begin(), sub.members.end());
  sub.hops.reserve(sub.members.size());
  for (auto v : sub.members) sub.hops.push_back(dist[v]);
  for (auto u : sub.members)
    for (auto v : g.out_neighbors(u))
      if (dist[v] >= 0) sub.edges.emplace_back(u, v);
  return sub;
}

/// Per node: [mean of in-neighbour rows | mean of out-neighbour rows], with a
/// zero block when a side has no neighbours. Output is N × 2F.
inline Matrix aggregate_one_hop(const TxGraph& g, const Matrix& x) {
  require<ShapeError>(x.rows() == g.n_nodes(), "aggregate_one_hop: X has " + std::to_string(x.rows()) +
                                                   " rows, graph has " + std::to_string(g.n_nodes()) + " nodes");
  const std::size_t f = x.cols();
  Matrix out(g.n_nodes(), 2 * f);
  for (std::size_t v = 0; v < g.n_nodes(); ++v) {
    auto row = out.row(v);
    auto accumulate = [&](std::span<const std::uint32_t> nb, std::size_t offset) {
      if (nb.empty()) return;
      for (auto u : nb) {
        auto src = x.row(u);
        for (std::size_t j = 0; j < f; ++j) row[offset + j] += src[j];
      }
      const double inv = 1.0 / static_cast<double>(nb.size());
      for (std::size_t j = 0; j < f; ++j) row[offset + j] *= inv;
    };
    accumulate(g.in_neighbors(v), 0);
    accumulate(g.out_neighbors(v), f);
  }
  return out;
}

/// Undirected connected components. Ids are dense from 0 and ordered by
/// each component's smallest member.
inline std::vector<std::uint32_t> connected_components(const TxGraph& g) {
  constexpr auto unset = UINT32_MAX;
  std::vector<std::uint32_t> comp(g.n_nodes(), unset);
  std::vector<std::uint32_t> stack;
  std::uint32_t next_id = 0;
  for (std::size_t s = 0; s < g.n_nodes(); ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next_id;
    stack.push_back(static_cast<std::uint32_t>(s));
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto nb : {g.out_neighbors(u), g.in_neighbors(u)}) {
        for (auto v : nb) {
          if (comp[v] != unset) continue;
          comp[v] = next_id;
          stack.push_back(v);
        }
      }
    }
    ++next_id;
  }
  return comp;
}

/// Per-node attributes for graph export. Vectors are indexed by global node
/// id; entries beyond a vector's size are treated as absent.
struct NodeAnnotations {
  std::vector<std::string> names;
  std::vector<Label> labels;
  std::vector<Label> predictions;
  std::vector<int> time_steps;

  std::string name(std::uint32_t v) const { return v < names.size() ? names[v] : std::to_string(v); }
  Label label(std::uint32_t v) const { return v < labels.size() ? labels[v] : Label::Unknown; }
  Label prediction(std::uint32_t v) const { return v < predictions.size() ? predictions[v] : Label::Unknown; }
};

inline constexpr std::string_view fill_color(Label l) noexcept {
  switch (l) {
    case Label::Illicit: return "red";
    case Label::Licit: return "green";
    default: return "grey";
  }
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

/// DOT digraph of the subgraph. Node fill follows `ann.predictions` when
/// present, else `ann.labels` (red illicit, green licit, grey unknown).
inline void write_dot(std::ostream& os, const EgoSubgraph& sub, const NodeAnnotations& ann) {
  os << "digraph ego_" << sub.center << " {\n";
  os << "  node [style=filled, shape=circle, fontsize=10];\n";
  for (auto v : sub.members) {
    os << "  n" << v << " [label=" << detail::dot_quote(ann.name(v)) << ", fillcolor="
       << fill_color(ann.predictions.empty() ? ann.label(v) : ann.prediction(v));
    if (v == sub.center) os << ", penwidth=3";
    os << "];\n";
  }
  for (const auto& [u, v] : sub.edges) os << "  n" << u << " -> n" << v << ";\n";
  os << "}\n";
}

inline void export_dot(const EgoSubgraph& sub, const NodeAnnotations& ann, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_dot(ss, sub, ann);
  detail::write_file(path, ss.str());
}

/// GraphML with `label`, `prediction` and `time_step` node attributes.
inline void write_graphml(std::ostream& os, const EgoSubgraph& sub, const NodeAnnotations& ann) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
     << "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n"
     << "  <key id=\"prediction\" for=\"node\" attr.name=\"prediction\" attr.type=\"string\"/>\n"
     << "  <key id=\"time_step\" for=\"node\" attr.name=\"time_step\" attr.type=\"int\"/>\n"
     << "  <key id=\"tx_id\" for=\"node\" attr.name=\"tx_id\" attr.type=\"string\"/>\n"
     << "  <graph id=\"ego_" << sub.center << "\" edgedefault=\"directed\">\n";
  for (auto v : sub.members) {
    os << "    <node id=\"n" << v << "\">\n"
       << "      <data key=\"tx_id\">" << detail::xml_escape(ann.name(v)) << "</data>\n"
       << "      <data key=\"label\">" << label_name(ann.label(v)) << "</data>\n"
       << "      <data key=\"prediction\">" << label_name(ann.prediction(v)) << "</data>\n";
    if (v < ann.time_steps.size()) os << "      <data key=\"time_step\">" << ann.time_steps[v] << "</data>\n";
    os << "    </node>\n";
  }
  std::size_t e = 0;
  for (const auto& [u, v] : sub.edges)
    os << "    <edge id=\"e" << e++ << "\" source=\"n" << u << "\" target=\"n" << v << "\"/>\n";
  os << "  </graph>\n</graphml>\n";
}

inline void export_graphml(const EgoSubgraph& sub, const NodeAnnotations& ann, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_graphml(ss, sub, ann);
  detail::write_file(path, ss.str());
}

/// Directed (src, dst) pairs along which GNN layers pass messages.
struct MessageEdges {
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> dst;
  std::size_t size() const noexcept { return src.size(); }
};

/// With `symmetrize` each edge also carries a message against its direction;
/// with `self_loops` every node additionally sends to itself.
inline MessageEdges message_edges(const TxGraph& g, bool symmetrize, bool self_loops) {
  MessageEdges m;
  const std::size_t cap = g.n_edges() * (symmetrize ? 2 : 1) + (self_loops ? g.n_nodes() : 0);
  m.src.reserve(cap);
  m.dst.reserve(cap);
  for (std::size_t u = 0; u < g.n_nodes(); ++u) {
    for (auto v : g.out_neighbors(u)) {
      m.src.push_back(static_cast<std::uint32_t>(u));
      m.dst.push_back(v);
      if (symmetrize) {
        m.src.push_back(v);
        m.dst.push_back(static_cast<std::uint32_t>(u));
      }
    }
  }
  if (self_loops) {
    for (std::size_t v = 0; v < g.n_nodes(); ++v) {
      m.src.push_back(static_cast<std::uint32_t>(v));
      m.dst.push_back(static_cast<std::uint32_t>(v));
    }
  }
  return m;
}

}  // namespace amlgraph
