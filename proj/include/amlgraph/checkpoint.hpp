#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "amlgraph/elliptic_io.hpp"
#include "amlgraph/matrix.hpp"
#include "amlgraph/nn.hpp"

namespace amlgraph {

// Parameter checkpoint:
//   "AMLGCKPT" u32 version u32 entry_count
//   per entry: u32 name_len, name bytes, u64 rows, u64 cols, rows*cols f64
// All little-endian.
inline constexpr char kCheckpointMagic[8] = {'A', 'M', 'L', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Ordered list of named matrices.
class Checkpoint {
 public:
  void put(std::string name, Matrix m) {
    for (auto& [n, v] : entries_) {
      if (n == name) {
        v = std::move(m);
        return;
      }
    }
    entries_.emplace_back(std::move(name), std::move(m));
  }

  void put_scalar(std::string name, double v) { put(std::move(name), Matrix(1, 1, v)); }

  void put_vector(std::string name, const std::vector<double>& v) { put(std::move(name), Matrix(1, v.size(), v)); }

  bool has(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.first == name) return true;
    return false;
  }

  const Matrix& get(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.first == name) return e.second;
    throw IoError("checkpoint: missing entry '" + name + "'");
  }

  double get_scalar(const std::string& name) const {
    const auto& m = get(name);
    if (m.size() != 1) throw IoError("checkpoint: entry '" + name + "' is not a scalar");
    return m.values()[0];
  }

  void save_params(const nn::ConstParamRefs& ps) {
    for (const auto* p : ps) put(p->name, p->value);
  }
  void save_params(const nn::ParamRefs& ps) { save_params(nn::ConstParamRefs(ps.begin(), ps.end())); }

  /// Copies stored values into the params; names and shapes must match.
  void load_params(const nn::ParamRefs& ps) const {
    for (auto* p : ps) {
      const auto& m = get(p->name);
      if (!m.same_shape(p->value))
        throw IoError("checkpoint: entry '" + p->name + "' has shape " + m.shape_str() + ", expected " +
                      p->value.shape_str());
      p->value = m;
    }
  }

  const std::vector<std::pair<std::string, Matrix>>& entries() const noexcept { return entries_; }

  std::vector<char> serialize() const {
    io_detail::BinaryWriter w;
    w.put_bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, m] : entries_) {
      w.put_string(name);
      w.put(static_cast<std::uint64_t>(m.rows()));
      w.put(static_cast<std::uint64_t>(m.cols()));
      w.put_bytes(m.data(), m.size() * sizeof(double));
    }
    return w.bytes();
  }

  static Checkpoint deserialize(std::string bytes, const std::string& source = "checkpoint") {
    io_detail::BinaryReader r(std::move(bytes), source);
    char magic[8];
    r.get_bytes(magic, sizeof magic);
    if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw IoError(source + ": not a checkpoint");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw IoError(source + ": unsupported checkpoint version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>();
    Checkpoint ck;
    for (std::uint32_t i = 0; i < count; ++i) {
      auto name = r.get_string();
      const auto rows = r.get<std::uint64_t>();
      const auto cols = r.get<std::uint64_t>();
      Matrix m(rows, cols);
      r.get_bytes(m.data(), m.size() * sizeof(double));
      ck.entries_.emplace_back(std::move(name), std::move(m));
    }
    if (!r.at_end()) throw IoError(source + ": trailing bytes");
    return ck;
  }

  void save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
  }

  static Checkpoint load(const std::filesystem::path& path) {
    return deserialize(io_detail::read_file(path), path.string());
  }

 private:
  std::vector<std::pair<std::string, Matrix>> entries_;
};

}  // namespace amlgraph
