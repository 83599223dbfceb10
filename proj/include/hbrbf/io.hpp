#pragma once

// File formats: node-set CSV, value-grid CSV, append-safe report CSV, the
// octree debug dump, sparse-block coordinate dumps, and a binary snapshot of
// a hierarchical-basis transform for experiment reruns.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hbrbf/geometry.hpp"
#include "hbrbf/hbasis.hpp"
#include "hbrbf/mrop.hpp"
#include "hbrbf/types.hpp"

namespace hbrbf {

namespace detail {

// Shortest round-trippable decimal for a double.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string u128_to_string(unsigned __int128 v) {
  if (v == 0) return "0";
  std::string out;
  while (v != 0) {
    out.insert(out.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  return out;
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

// Splits a CSV line on commas; no quoting (the formats here never need it).
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline double parse_double(const std::string& field, const std::string& path,
                           int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    while (used < field.size() &&
           (field[used] == ' ' || field[used] == '\r' || field[used] == '\t'))
      ++used;
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw DataError(path + ": line " + std::to_string(line_no) +
                    ": bad number '" + field + "'");
  }
}

}  // namespace detail

// --- Node sets -------------------------------------------------------------

inline void write_nodes_csv(const std::string& path, const NodeSet& nodes) {
  nodes.validate();
  std::ofstream out = detail::open_for_write(path);
  out << (nodes.has_values() ? "x,y,z,value\n" : "x,y,z\n");
  for (int i = 0; i < nodes.size(); ++i) {
    const Vec3& p = nodes.points[i];
    out << detail::fmt_double(p[0]) << ',' << detail::fmt_double(p[1]) << ','
        << detail::fmt_double(p[2]);
    if (nodes.has_values()) out << ',' << detail::fmt_double(nodes.values[i]);
    out << '\n';
  }
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline NodeSet load_nodes_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line))
    throw DataError(path + ": empty file (expected a header line)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool with_values = false;
  if (line == "x,y,z,value")
    with_values = true;
  else if (line != "x,y,z")
    throw DataError(path + ": line 1: expected header 'x,y,z' or "
                    "'x,y,z,value', got '" + line + "'");

  NodeSet nodes;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    const std::size_t want = with_values ? 4 : 3;
    if (fields.size() != want)
      throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(want) + " fields, got " +
                      std::to_string(fields.size()));
    const double x = detail::parse_double(fields[0], path, line_no);
    const double y = detail::parse_double(fields[1], path, line_no);
    const double z = detail::parse_double(fields[2], path, line_no);
    nodes.points.emplace_back(x, y, z);
    if (with_values)
      nodes.values.push_back(detail::parse_double(fields[3], path, line_no));
  }

  const auto [i, j] = nodes.find_duplicate();
  if (i >= 0)
    throw DataError(path + ": line " + std::to_string(j + 2) +
                    " duplicates the node on line " + std::to_string(i + 2));
  return nodes;
}

// --- Value grids and reports -------------------------------------------------

inline void write_grid_csv(const std::string& path,
                           const std::vector<Vec3>& points,
                           const Eigen::VectorXd& values) {
  if (static_cast<Eigen::Index>(points.size()) != values.size())
    throw ContractError("write_grid_csv: point/value count mismatch");
  std::ofstream out = detail::open_for_write(path);
  out << "x,y,z,value\n";
  for (std::size_t i = 0; i < points.size(); ++i)
    out << detail::fmt_double(points[i][0]) << ','
        << detail::fmt_double(points[i][1]) << ','
        << detail::fmt_double(points[i][2]) << ','
        << detail::fmt_double(values[static_cast<Eigen::Index>(i)]) << '\n';
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

// Appends one CSV row, writing the header first when the file is new or
// empty. Keeps result files append-safe across repeated runs.
inline void append_csv_row(const std::string& path, const std::string& header,
                           const std::string& row) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const bool fresh = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot open '" + path + "' for appending");
  if (fresh) out << header << '\n';
  out << row << '\n';
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

// --- Debug dumps -------------------------------------------------------------

// One box per line: level, path key, lower corner, side length, node count.
inline void write_octree_dump(const std::string& path, const Octree& tree) {
  std::ofstream out = detail::open_for_write(path);
  out << "level k lower_x lower_y lower_z side count\n";
  for (const OctreeBox& box : tree.boxes) {
    const Vec3 lo = box.lower();
    out << box.level << ' ' << detail::u128_to_string(box.key()) << ' '
        << detail::fmt_double(lo[0]) << ' ' << detail::fmt_double(lo[1]) << ' '
        << detail::fmt_double(lo[2]) << ' ' << detail::fmt_double(box.side())
        << ' ' << box.nodes.size() << '\n';
  }
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

// Coordinate-format dump of one sparse level block: `i j value` per line.
inline void write_sparse_block_dump(const std::string& path,
                                    const SparseBlock& block) {
  std::ofstream out = detail::open_for_write(path);
  for (int k = 0; k < block.mat.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(block.mat, k); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << detail::fmt_double(it.value())
          << '\n';
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

// --- Hierarchical-basis snapshot ---------------------------------------------

// Binary layout (little-endian): magic "HBRB", u32 version, i32 n_nodes, m,
// p, column count, block count, then block_begin entries (i32), then per
// column: kind (i32), level (i32), box_id (i32), support size (i32),
// support indices (i32 each), coefficients (f64 each).
namespace detail {

inline constexpr char kHbMagic[4] = {'H', 'B', 'R', 'B'};
inline constexpr std::uint32_t kHbVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
  static_assert(std::endian::native == std::endian::little,
                "snapshot writer assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw DataError(path + ": truncated snapshot");
  return v;
}

}  // namespace detail

// The transform pieces needed to re-apply an existing basis: metadata, block
// boundaries, and the basis columns themselves (the octree is not stored).
struct HBSnapshot {
  int n_nodes = 0;
  int m = 0;
  int p = 0;
  std::vector<int> block_begin;
  std::vector<BasisVector> cols;
};

inline void save_hb_snapshot(const std::string& path, const HBTransform& hb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.write(detail::kHbMagic, 4);
  detail::put(out, detail::kHbVersion);
  detail::put(out, static_cast<std::int32_t>(hb.n_nodes));
  detail::put(out, static_cast<std::int32_t>(hb.m));
  detail::put(out, static_cast<std::int32_t>(hb.p));
  detail::put(out, static_cast<std::int32_t>(hb.cols.size()));
  detail::put(out, static_cast<std::int32_t>(hb.block_begin.size()));
  for (int b : hb.block_begin) detail::put(out, static_cast<std::int32_t>(b));
  for (const BasisVector& col : hb.cols) {
    detail::put(out, static_cast<std::int32_t>(col.kind));
    detail::put(out, static_cast<std::int32_t>(col.level));
    detail::put(out, static_cast<std::int32_t>(col.box_id));
    detail::put(out, static_cast<std::int32_t>(col.support.size()));
    for (int s : col.support) detail::put(out, static_cast<std::int32_t>(s));
    for (Eigen::Index i = 0; i < col.coeffs.size(); ++i)
      detail::put(out, col.coeffs[i]);
  }
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline HBSnapshot load_hb_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != std::string(detail::kHbMagic, 4))
    throw DataError(path + ": not a basis snapshot (bad magic)");
  const auto version = detail::get<std::uint32_t>(in, path);
  if (version != detail::kHbVersion)
    throw DataError(path + ": unsupported snapshot version " +
                    std::to_string(version));
  HBSnapshot snap;
  snap.n_nodes = detail::get<std::int32_t>(in, path);
  snap.m = detail::get<std::int32_t>(in, path);
  snap.p = detail::get<std::int32_t>(in, path);
  const auto n_cols = detail::get<std::int32_t>(in, path);
  const auto n_blocks = detail::get<std::int32_t>(in, path);
  if (n_cols < 0 || n_blocks < 0 || snap.n_nodes < 0)
    throw DataError(path + ": corrupt snapshot counts");
  snap.block_begin.resize(n_blocks);
  for (auto& b : snap.block_begin) b = detail::get<std::int32_t>(in, path);
  snap.cols.resize(n_cols);
  for (BasisVector& col : snap.cols) {
    col.kind = static_cast<BasisKind>(detail::get<std::int32_t>(in, path));
    col.level = detail::get<std::int32_t>(in, path);
    col.box_id = detail::get<std::int32_t>(in, path);
    const auto sz = detail::get<std::int32_t>(in, path);
    if (sz < 0 || sz > snap.n_nodes)
      throw DataError(path + ": corrupt support size");
    col.support.resize(sz);
    for (auto& s : col.support) s = detail::get<std::int32_t>(in, path);
    col.coeffs.resize(sz);
    for (Eigen::Index i = 0; i < col.coeffs.size(); ++i)
      col.coeffs[i] = detail::get<double>(in, path);
  }
  return snap;
}

}  // namespace hbrbf
