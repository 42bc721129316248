#pragma once

#include <bit>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "amlgraph/dataset.hpp"

namespace amlgraph {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace io_detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

/// Iterates lines of a text buffer, stripping a trailing '\r'.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++line_no_;
    return true;
  }
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

inline void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
}

inline bool parse_double(std::string_view s, double& v) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(v);
}

inline bool parse_int(std::string_view s, int& v) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && p == s.data() + s.size()) return true;
  // Some exports write integral columns as floats ("3.0").
  double d = 0.0;
  if (parse_double(s, d) && d == static_cast<int>(d)) {
    v = static_cast<int>(d);
    return true;
  }
  return false;
}

inline bool is_numeric(std::string_view s) {
  double d = 0.0;
  return parse_double(s, d);
}

inline std::string join_ids(const std::vector<std::string>& ids, std::size_t limit = 10) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  if (ids.size() > limit) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace io_detail

/// Loads the features / classes / edge-list CSV triplet.
///
/// Features rows are `tx_id,time_step,f1..fF` with a uniform column count;
/// a header is skipped when the first row's time step is non-numeric.
/// Classes rows are `txId,class` with class in {"1","2","unknown"}; edge
/// rows are `txId1,txId2`. Unresolvable edge endpoints are rejected.
inline RawTables load_raw(const std::filesystem::path& features_path, const std::filesystem::path& classes_path,
                          const std::filesystem::path& edges_path,
                          std::optional<std::size_t> n_local = std::nullopt) {
  using namespace io_detail;
  RawTables raw;
  std::vector<std::string_view> fields;
  std::string_view line;

  {
    const std::string text = read_file(features_path);
    const std::string fname = features_path.filename().string();
    LineReader lines(text);
    std::size_t arity = 0;
    std::vector<double> values;
    bool first = true;
    while (lines.next(line)) {
      if (line.empty()) continue;
      split_fields(line, fields);
      if (first) {
        first = false;
        if (fields.size() < 2 || !is_numeric(fields[1])) continue;  // header
      }
      if (arity == 0) {
        arity = fields.size();
        if (arity < 2) throw ParseError(fname, lines.line_no(), "expected tx_id,time_step,features...");
      }
      if (fields.size() != arity)
        throw ParseError(fname, lines.line_no(),
                         "expected " + std::to_string(arity) + " columns, found " + std::to_string(fields.size()));
      int step = 0;
      if (!parse_int(fields[1], step)) throw ParseError(fname, lines.line_no(), "non-integer time step");
      raw.tx_ids.emplace_back(fields[0]);
      raw.time_steps.push_back(step);
      for (std::size_t c = 2; c < arity; ++c) {
        double v = 0.0;
        if (!parse_double(fields[c], v))
          throw ParseError(fname, lines.line_no(),
                           "non-numeric feature in column " + std::to_string(c + 1) + ": '" + std::string(fields[c]) + "'");
        values.push_back(v);
      }
    }
    const std::size_t width = arity >= 2 ? arity - 2 : 0;
    raw.layout = ColumnLayout::detect(width, n_local);
    raw.features = Matrix(raw.tx_ids.size(), width, std::move(values));
  }

  std::unordered_map<std::string_view, std::uint32_t> row_of;
  row_of.reserve(raw.tx_ids.size() * 2);
  for (std::size_t i = 0; i < raw.tx_ids.size(); ++i) {
    if (!row_of.emplace(raw.tx_ids[i], static_cast<std::uint32_t>(i)).second)
      throw StructuralError("duplicate transaction id in features: " + raw.tx_ids[i]);
  }

  {
    const std::string text = read_file(classes_path);
    const std::string fname = classes_path.filename().string();
    LineReader lines(text);
    std::vector<bool> seen(raw.tx_ids.size(), false);
    raw.labels.assign(raw.tx_ids.size(), Label::Unknown);
    std::vector<std::string> unresolved;
    bool first = true;
    while (lines.next(line)) {
      if (line.empty()) continue;
      split_fields(line, fields);
      if (fields.size() != 2) throw ParseError(fname, lines.line_no(), "expected 2 columns (txId,class)");
      auto label = parse_class_token(fields[1]);
      if (first) {
        first = false;
        if (!label) continue;  // header
      }
      if (!label) throw ParseError(fname, lines.line_no(), "unknown class value '" + std::string(fields[1]) + "'");
      auto it = row_of.find(fields[0]);
      if (it == row_of.end()) {
        unresolved.emplace_back(fields[0]);
        continue;
      }
      raw.labels[it->second] = *label;
      seen[it->second] = true;
    }
    if (!unresolved.empty())
      throw StructuralError("classes reference unknown transactions: " + join_ids(unresolved));
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) missing.push_back(raw.tx_ids[i]);
    if (!missing.empty()) throw StructuralError("transactions without a class entry: " + join_ids(missing));
  }

  {
    const std::string text = read_file(edges_path);
    const std::string fname = edges_path.filename().string();
    LineReader lines(text);
    std::vector<std::string> dangling;
    bool first = true;
    while (lines.next(line)) {
      if (line.empty()) continue;
      split_fields(line, fields);
      if (fields.size() != 2) throw ParseError(fname, lines.line_no(), "expected 2 columns (txId1,txId2)");
      auto a = row_of.find(fields[0]);
      auto b = row_of.find(fields[1]);
      if (first) {
        first = false;
        if ((a == row_of.end() || b == row_of.end()) && !is_numeric(fields[0])) continue;  // header
      }
      if (a == row_of.end()) dangling.emplace_back(fields[0]);
      if (b == row_of.end()) dangling.emplace_back(fields[1]);
      if (a != row_of.end() && b != row_of.end()) raw.edges.emplace_back(a->second, b->second);
    }
    if (!dangling.empty()) throw StructuralError("edge endpoints not in features: " + join_ids(dangling));
  }
  return raw;
}

namespace io_detail {

/// Shortest decimal that round-trips.
inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace io_detail

struct RawPaths {
  std::filesystem::path features;
  std::filesystem::path classes;
  std::filesystem::path edges;

  /// The file names used by the public dataset release.
  static RawPaths in_dir(const std::filesystem::path& dir) {
    return {dir / "elliptic_txs_features.csv", dir / "elliptic_txs_classes.csv", dir / "elliptic_txs_edgelist.csv"};
  }
};

/// Writes raw tables in the Elliptic CSV dialect (features without header).
inline void write_raw_csv(const RawTables& raw, const RawPaths& paths) {
  using io_detail::format_double;
  std::string feat;
  feat.reserve(raw.n_nodes() * (raw.features.cols() + 2) * 12);
  for (std::size_t i = 0; i < raw.n_nodes(); ++i) {
    feat += raw.tx_ids[i];
    feat += ',';
    feat += std::to_string(raw.time_steps[i]);
    for (double v : raw.features.row(i)) {
      feat += ',';
      feat += format_double(v);
    }
    feat += '\n';
  }
  std::string cls = "txId,class\n";
  for (std::size_t i = 0; i < raw.n_nodes(); ++i) {
    cls += raw.tx_ids[i];
    cls += ',';
    cls += class_token(raw.labels[i]);
    cls += '\n';
  }
  std::string edges = "txId1,txId2\n";
  for (const auto& [u, v] : raw.edges) {
    edges += raw.tx_ids[u];
    edges += ',';
    edges += raw.tx_ids[v];
    edges += '\n';
  }
  io_detail::write_text(paths.features, feat);
  io_detail::write_text(paths.classes, cls);
  io_detail::write_text(paths.edges, edges);
}

// Clean dataset bundle:
//   "AMLGBNDL" u32 version u64 n_nodes u64 n_local u64 n_agg u64 n_edges
//   n_nodes × (u32 id_len, id bytes)
//   n_nodes × i32 time_step, n_nodes × u8 label
//   n_nodes × (n_local + n_agg) f64 features (row-major)
//   n_edges × (u32 src, u32 dst)
// All integers and doubles little-endian.
inline constexpr char kBundleMagic[8] = {'A', 'M', 'L', 'G', 'B', 'N', 'D', 'L'};
inline constexpr std::uint32_t kBundleVersion = 1;

namespace io_detail {

class BinaryWriter {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write failed: " + path.string());
  }
  const std::vector<char>& bytes() const noexcept { return buf_; }

 private:
  std::vector<char> buf_;
};

class BinaryReader {
 public:
  BinaryReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}
  template <class T>
  T get() {
    T v;
    get_bytes(&v, sizeof(T));
    return v;
  }
  void get_bytes(void* out, std::size_t n) {
    if (n > data_.size() - pos_) throw IoError(name_ + ": truncated file");
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    get_bytes(s.data(), n);
    return s;
  }
  bool at_end() const noexcept { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
  std::string name_;
};

}  // namespace io_detail

inline void write_bundle(const PreprocessedDataset& ds, const std::filesystem::path& path) {
  io_detail::BinaryWriter w;
  w.put_bytes(kBundleMagic, sizeof kBundleMagic);
  w.put(kBundleVersion);
  w.put(static_cast<std::uint64_t>(ds.n_nodes()));
  w.put(static_cast<std::uint64_t>(ds.layout.n_local));
  w.put(static_cast<std::uint64_t>(ds.layout.n_agg));
  w.put(static_cast<std::uint64_t>(ds.edges.size()));
  for (const auto& id : ds.tx_ids) w.put_string(id);
  for (int t : ds.time_steps) w.put(static_cast<std::int32_t>(t));
  for (Label l : ds.y) w.put(static_cast<std::uint8_t>(l));
  w.put_bytes(ds.X.data(), ds.X.size() * sizeof(double));
  for (const auto& [u, v] : ds.edges) {
    w.put(u);
    w.put(v);
  }
  w.save(path);
}

inline PreprocessedDataset read_bundle(const std::filesystem::path& path) {
  io_detail::BinaryReader r(io_detail::read_file(path), path.string());
  char magic[8];
  r.get_bytes(magic, sizeof magic);
  if (std::memcmp(magic, kBundleMagic, sizeof magic) != 0) throw IoError(path.string() + ": not a dataset bundle");
  const auto version = r.get<std::uint32_t>();
  if (version != kBundleVersion)
    throw IoError(path.string() + ": unsupported bundle version " + std::to_string(version));
  PreprocessedDataset ds;
  const auto n = r.get<std::uint64_t>();
  ds.layout.n_local = r.get<std::uint64_t>();
  ds.layout.n_agg = r.get<std::uint64_t>();
  const auto n_edges = r.get<std::uint64_t>();
  ds.tx_ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) ds.tx_ids.push_back(r.get_string());
  for (std::uint64_t i = 0; i < n; ++i) ds.time_steps.push_back(r.get<std::int32_t>());
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto l = r.get<std::uint8_t>();
    if (l > 2) throw IoError(path.string() + ": bad label code");
    ds.y.push_back(static_cast<Label>(l));
  }
  ds.X = Matrix(n, ds.layout.total());
  r.get_bytes(ds.X.data(), ds.X.size() * sizeof(double));
  for (std::uint64_t e = 0; e < n_edges; ++e) {
    const auto u = r.get<std::uint32_t>();
    const auto v = r.get<std::uint32_t>();
    if (u >= n || v >= n) throw StructuralError(path.string() + ": edge endpoint out of range");
    ds.edges.emplace_back(u, v);
  }
  if (!r.at_end()) throw IoError(path.string() + ": trailing bytes");
  return ds;
}

}  // namespace amlgraph
