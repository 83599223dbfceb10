#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hbrbf/geometry.hpp"
#include "hbrbf/hbasis.hpp"
#include "hbrbf/io.hpp"
#include "hbrbf/kernels.hpp"
#include "hbrbf/mrop.hpp"
#include "helpers.hpp"

using namespace hbrbf;
using Catch::Matchers::ContainsSubstring;

namespace {

// Fresh path under the system temp dir, removed when the guard dies.
struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() /
            ("hbrbf_io_" + name + "_" + std::to_string(::getpid())))
               .string();
    std::filesystem::remove(path);
  }
  ~TempFile() { std::filesystem::remove(path); }
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("node CSV round-trips bitwise") {
  TempFile f("nodes");

  SECTION("coordinates only") {
    NodeSet nodes;
    nodes.points = testutil::random_points(37, 901);
    nodes.points.push_back(Vec3(1.0 / 3.0, -2.0e-17, 5.0e300));
    write_nodes_csv(f.path, nodes);
    const NodeSet back = load_nodes_csv(f.path);
    REQUIRE(back.size() == nodes.size());
    REQUIRE_FALSE(back.has_values());
    for (int i = 0; i < nodes.size(); ++i)
      for (int k = 0; k < 3; ++k) CHECK(back.points[i][k] == nodes.points[i][k]);
  }

  SECTION("with values") {
    NodeSet nodes;
    nodes.points = testutil::random_points(25, 902);
    const Eigen::VectorXd v = testutil::random_vector(25, 903);
    nodes.values.assign(v.data(), v.data() + v.size());
    write_nodes_csv(f.path, nodes);
    const NodeSet back = load_nodes_csv(f.path);
    REQUIRE(back.has_values());
    for (int i = 0; i < nodes.size(); ++i) {
      CHECK(back.points[i] == nodes.points[i]);
      CHECK(back.values[i] == nodes.values[i]);
    }
    CHECK(read_lines(f.path).front() == "x,y,z,value");
  }
}

TEST_CASE("node CSV loader rejects bad input") {
  TempFile f("badnodes");

  SECTION("missing file") {
    CHECK_THROWS_AS(load_nodes_csv(f.path), ConfigError);
  }

  SECTION("bad header") {
    write_text(f.path, "a,b,c\n1,2,3\n");
    CHECK_THROWS_MATCHES(load_nodes_csv(f.path), DataError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("line 1")));
  }

  SECTION("wrong field count mid-file") {
    write_text(f.path, "x,y,z\n0,0,0\n1,2\n");
    CHECK_THROWS_MATCHES(
        load_nodes_csv(f.path), DataError,
        Catch::Matchers::MessageMatches(ContainsSubstring("line 3")));
  }

  SECTION("non-numeric field") {
    write_text(f.path, "x,y,z,value\n0,0,0,1\n0.5,oops,0,2\n");
    CHECK_THROWS_MATCHES(
        load_nodes_csv(f.path), DataError,
        Catch::Matchers::MessageMatches(ContainsSubstring("'oops'") &&
                                        ContainsSubstring("line 3")));
  }

  SECTION("duplicate rows reported with both line numbers") {
    write_text(f.path, "x,y,z\n0.25,0,0\n0.5,0.5,0.5\n0.25,0,0\n");
    CHECK_THROWS_MATCHES(
        load_nodes_csv(f.path), DataError,
        Catch::Matchers::MessageMatches(ContainsSubstring("line 4") &&
                                        ContainsSubstring("line 2")));
  }
}

TEST_CASE("octree dump lists every box") {
  NodeSet X;
  X.points = testutil::random_points(200, 904);
  auto [norm, map] = normalize_nodes(X);
  const Octree tree = build_octree(norm, 8);
  TempFile f("tree");
  write_octree_dump(f.path, tree);

  const auto lines = read_lines(f.path);
  REQUIRE(lines.size() == tree.boxes.size() + 1);
  CHECK(lines[0] == "level k lower_x lower_y lower_z side count");

  // Root box: level 0, key 0, lower corner (-0.5)^3, unit side, all nodes.
  std::istringstream root(lines[1]);
  int level = -1;
  std::string key;
  double lx = 0, ly = 0, lz = 0, side = 0;
  std::size_t count = 0;
  root >> level >> key >> lx >> ly >> lz >> side >> count;
  CHECK(level == 0);
  CHECK(key == "0");
  CHECK(lx == -0.5);
  CHECK(ly == -0.5);
  CHECK(lz == -0.5);
  CHECK(side == 1.0);
  CHECK(count == 200);

  // Every line parses and the per-level key/side are consistent.
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    REQUIRE((row >> level >> key >> lx >> ly >> lz >> side >> count));
    const OctreeBox& box = tree.boxes[i - 1];
    CHECK(level == box.level);
    CHECK(side == box.side());
    CHECK(count == box.nodes.size());
  }
}

TEST_CASE("sparse block dump matches the matrix") {
  NodeSet X;
  X.points = testutil::random_points(150, 905);
  auto [norm, map] = normalize_nodes(X);
  const Octree tree = build_octree(norm, poly_dim(2));
  const HBTransform hb = build_hb(tree, norm, 1, 2);
  const MultiResOperator op(hb, norm, KernelSpec::biharmonic());
  const auto blocks = build_sparse_diag_blocks(op);

  const SparseBlock& sb = blocks.front();
  TempFile f("block");
  write_sparse_block_dump(f.path, sb);

  const auto lines = read_lines(f.path);
  REQUIRE(lines.size() == static_cast<std::size_t>(sb.mat.nonZeros()));
  for (const std::string& line : lines) {
    std::istringstream row(line);
    int i = -1, j = -1;
    double v = 0;
    REQUIRE((row >> i >> j >> v));
    CHECK(v == sb.mat.coeff(i, j));
  }
}

TEST_CASE("basis snapshot round-trips bitwise") {
  NodeSet X;
  X.points = testutil::random_points(100, 906);
  auto [norm, map] = normalize_nodes(X);
  const Octree tree = build_octree(norm, poly_dim(3));
  const HBTransform hb = build_hb(tree, norm, 2, 3);

  TempFile f("snap");
  save_hb_snapshot(f.path, hb);
  const HBSnapshot snap = load_hb_snapshot(f.path);

  CHECK(snap.n_nodes == hb.n_nodes);
  CHECK(snap.m == hb.m);
  CHECK(snap.p == hb.p);
  REQUIRE(snap.block_begin == hb.block_begin);
  REQUIRE(snap.cols.size() == hb.cols.size());
  for (std::size_t c = 0; c < hb.cols.size(); ++c) {
    const BasisVector& a = hb.cols[c];
    const BasisVector& b = snap.cols[c];
    CHECK(a.kind == b.kind);
    CHECK(a.level == b.level);
    CHECK(a.box_id == b.box_id);
    REQUIRE(a.support == b.support);
    REQUIRE(a.coeffs.size() == b.coeffs.size());
    for (Eigen::Index i = 0; i < a.coeffs.size(); ++i)
      CHECK(a.coeffs[i] == b.coeffs[i]);
  }

  SECTION("corrupt files are rejected") {
    write_text(f.path, "not a snapshot");
    CHECK_THROWS_AS(load_hb_snapshot(f.path), DataError);
  }
}

TEST_CASE("report rows append under a single header") {
  TempFile f("report");
  const std::string header = "N,kernel,m";
  append_csv_row(f.path, header, "100,biharmonic,1");
  append_csv_row(f.path, header, "200,mq,2");

  const auto lines = read_lines(f.path);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == header);
  CHECK(lines[1] == "100,biharmonic,1");
  CHECK(lines[2] == "200,mq,2");
}

TEST_CASE("grid CSV stores one value per point") {
  std::vector<Vec3> pts = testutil::random_points(16, 907);
  const Eigen::VectorXd vals = testutil::random_vector(16, 908);
  TempFile f("grid");
  write_grid_csv(f.path, pts, vals);

  const auto lines = read_lines(f.path);
  REQUIRE(lines.size() == 17);
  CHECK(lines[0] == "x,y,z,value");
  // Reuse the node loader's parsing by treating the grid as valued nodes.
  const NodeSet back = load_nodes_csv(f.path);
  REQUIRE(back.size() == 16);
  for (int i = 0; i < 16; ++i) {
    CHECK(back.points[i] == pts[i]);
    CHECK(back.values[i] == vals[i]);
  }

  Eigen::VectorXd short_vals = vals.head(5);
  CHECK_THROWS_AS(write_grid_csv(f.path, pts, short_vals), ContractError);
}
