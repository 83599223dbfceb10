#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hbrbf/geometry.hpp"
#include "hbrbf/polyspace.hpp"
#include "hbrbf/types.hpp"

namespace hbrbf {

enum class BasisKind { Average, Detail, PolyCoarse };

// One column of the hierarchical transform, stored sparsely: nonzeros live
// only on the nodes of the owning box (all nodes for the coarsest blocks).
struct BasisVector {
  std::vector<int> support;   // sorted node indices
  Eigen::VectorXd coeffs;     // aligned with support, unit 2-norm
  int level = 0;              // octree level; -1 for the polynomial blocks
  int box_id = -1;            // flat index into the octree; -1 at level -1
  BasisKind kind = BasisKind::Detail;

  double dot(const Eigen::VectorXd& v) const {
    double s = 0.0;
    for (std::size_t t = 0; t < support.size(); ++t)
      s += coeffs[static_cast<Eigen::Index>(t)] * v[support[t]];
    return s;
  }
  void add_scaled(double w, Eigen::VectorXd& v) const {
    for (std::size_t t = 0; t < support.size(); ++t)
      v[support[t]] += w * coeffs[static_cast<Eigen::Index>(t)];
  }
};

struct PolyOrthoResult {
  std::vector<BasisVector> averages;  // span the moment-matrix row space
  std::vector<BasisVector> details;   // annihilate polynomials to degree p
  std::uint64_t work_units = 0;       // local matrix entries touched
};

namespace detail {

// Deterministic SVD sign convention: flip each column so that its first
// entry of largest magnitude is positive.
inline void fix_svd_signs(Eigen::MatrixXd& V) {
  for (Eigen::Index c = 0; c < V.cols(); ++c) {
    Eigen::Index arg = 0;
    V.col(c).cwiseAbs().maxCoeff(&arg);
    if (V(arg, c) < 0) V.col(c) = -V.col(c);
  }
}

}  // namespace detail

// Split a set of orthonormal vectors into averages (which carry all the
// polynomial content up to degree p over their joint support) and details
// (which annihilate it): form the moment matrix M = Q_p^H V on the union of
// supports, take its SVD, and rotate the inputs by the right singular
// vectors. The first rank(M) rotated vectors span the row-space preimage,
// the rest the nullspace.
inline PolyOrthoResult poly_ortho(const std::vector<BasisVector>& inputs,
                                  int p, const NodeSet& X) {
  const int s = static_cast<int>(inputs.size());
  if (s < 1) throw ContractError("poly_ortho: empty input set");

  std::vector<int> U;
  {
    std::size_t total = 0;
    for (const BasisVector& v : inputs) total += v.support.size();
    U.reserve(total);
    for (const BasisVector& v : inputs)
      U.insert(U.end(), v.support.begin(), v.support.end());
    std::sort(U.begin(), U.end());
    U.erase(std::unique(U.begin(), U.end()), U.end());
  }
  const Eigen::Index nu = static_cast<Eigen::Index>(U.size());

  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(nu, s);
  for (int c = 0; c < s; ++c) {
    std::size_t pos = 0;
    const BasisVector& in = inputs[c];
    for (std::size_t t = 0; t < in.support.size(); ++t) {
      while (U[pos] < in.support[t]) ++pos;
      V(static_cast<Eigen::Index>(pos), c) =
          in.coeffs[static_cast<Eigen::Index>(t)];
    }
  }

  {
    Eigen::MatrixXd G = V.transpose() * V;
    G.diagonal().array() -= 1.0;
    if (G.cwiseAbs().maxCoeff() > 1e-10)
      throw ContractError("poly_ortho: input vectors are not orthonormal");
  }

  std::vector<Vec3> pts;
  pts.reserve(U.size());
  for (int i : U) pts.push_back(X.points[i]);
  const Eigen::MatrixXd QU = monomial_matrix(pts, p);
  const Eigen::MatrixXd moment = QU.transpose() * V;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(moment, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff =
      sigma.size() == 0 ? 0.0 : std::max(1e-12 * sigma[0], 1e-14);
  int rank = 0;
  while (rank < sigma.size() && sigma[rank] > cutoff) ++rank;

  Eigen::MatrixXd R = svd.matrixV();  // s x s rotation of the inputs
  detail::fix_svd_signs(R);
  const Eigen::MatrixXd W = V * R;

  PolyOrthoResult out;
  out.work_units = static_cast<std::uint64_t>(U.size()) * s;
  const int level = inputs.front().level;
  const int box = inputs.front().box_id;
  for (int c = 0; c < s; ++c) {
    BasisVector bv;
    bv.support = U;
    bv.coeffs = W.col(c);
    bv.level = level;
    bv.box_id = box;
    bv.kind = c < rank ? BasisKind::Average : BasisKind::Detail;
    (c < rank ? out.averages : out.details).push_back(std::move(bv));
  }
  return out;
}

// The assembled orthonormal transform P = [details level n .. level 0 |
// complement block | polynomial block]. The first N - M(m) columns form the
// reduced basis the solver works in; the trailing M(m) columns are the
// orthonormal basis of the degree-m polynomial space.
struct HBTransform {
  Octree tree;
  int n_nodes = 0;
  int m = 0;
  int p = 0;
  std::vector<BasisVector> cols;
  // Storage blocks: index b = 0..n holds details of level n-b, then the
  // complement block, then the polynomial block; one-past-the-end sentinel.
  std::vector<int> block_begin;
  std::uint64_t work_units = 0;

  int levels() const { return tree.finest_level; }
  int blocks() const { return levels() + 3; }
  std::pair<int, int> block_range(int b) const {
    return {block_begin[b], block_begin[b + 1]};
  }
  // Detail block of octree level j (may be empty).
  std::pair<int, int> detail_range(int j) const {
    return block_range(levels() - j);
  }
  std::pair<int, int> complement_range() const {
    return block_range(levels() + 1);
  }
  std::pair<int, int> poly_range() const { return block_range(levels() + 2); }
  int reduced_dim() const { return block_begin[levels() + 2]; }

  // v = sum over columns [b, e) of w[g - b] * col_g.
  Eigen::VectorXd synthesize(int b, int e, const Eigen::VectorXd& w) const {
    if (w.size() != e - b)
      throw ContractError("hb synthesize: coefficient length mismatch");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n_nodes);
    for (int g = b; g < e; ++g) cols[g].add_scaled(w[g - b], v);
    return v;
  }
  // w[g - b] = <col_g, v> for columns [b, e).
  Eigen::VectorXd analyze(int b, int e, const Eigen::VectorXd& v) const {
    if (v.size() != n_nodes)
      throw ContractError("hb analyze: vector length mismatch");
    Eigen::VectorXd w(e - b);
    for (int g = b; g < e; ++g) w[g - b] = cols[g].dot(v);
    return w;
  }

  Eigen::VectorXd apply_P(const Eigen::VectorXd& w) const {
    return synthesize(0, static_cast<int>(cols.size()), w);
  }
  Eigen::VectorXd apply_PT(const Eigen::VectorXd& v) const {
    return analyze(0, static_cast<int>(cols.size()), v);
  }
};

// Bottom-up construction: every leaf seeds its own level with canonical
// vectors, each box splits its accumulated inputs with poly_ortho, averages
// climb to the parent, details stay. The level-0 averages span exactly the
// degree-p polynomial space (given unisolvency) and are replaced by the
// orthonormal polynomial basis plus its complement, which split the same
// subspace by degree m instead.
inline HBTransform build_hb(Octree tree, const NodeSet& X, int m, int p) {
  if (m < 0 || p < m)
    throw ConfigError("build_hb: need 0 <= m <= p, got m=" +
                      std::to_string(m) + " p=" + std::to_string(p));
  if (tree.capacity != poly_dim(p))
    throw ContractError("build_hb: octree capacity " +
                        std::to_string(tree.capacity) +
                        " does not match M(p) = " +
                        std::to_string(poly_dim(p)));
  const int n_nodes = X.size();
  if (!tree.boxes.empty() &&
      static_cast<int>(tree.boxes[0].nodes.size()) != n_nodes)
    throw ContractError("build_hb: octree was built over a different node set");

  HBTransform hb;
  hb.n_nodes = n_nodes;
  hb.m = m;
  hb.p = p;

  std::vector<std::vector<BasisVector>> acc(tree.boxes.size());
  std::vector<std::vector<BasisVector>> details(tree.finest_level + 1);

  for (int j = tree.finest_level; j >= 0; --j) {
    for (int id : tree.level_boxes[j]) {
      const OctreeBox& box = tree.boxes[id];
      std::vector<BasisVector> inputs;
      if (box.leaf()) {
        inputs.reserve(box.nodes.size());
        for (int node : box.nodes) {
          BasisVector seed;
          seed.support = {node};
          seed.coeffs = Eigen::VectorXd::Ones(1);
          seed.level = j;
          seed.box_id = id;
          seed.kind = BasisKind::Average;
          inputs.push_back(std::move(seed));
        }
      } else {
        inputs = std::move(acc[id]);
      }

      PolyOrthoResult split = poly_ortho(inputs, p, X);
      hb.work_units += split.work_units;
      for (BasisVector& d : split.details)
        details[j].push_back(std::move(d));
      if (j > 0) {
        auto& parent = acc[box.parent];
        for (BasisVector& a : split.averages) {
          a.level = j - 1;
          a.box_id = box.parent;
          parent.push_back(std::move(a));
        }
      }
      // Level-0 averages are discarded: they span the degree-p polynomial
      // space, which is re-expressed below as [poly basis | complement].
    }
  }

  OrthonormalPolyBasis L = orthonormal_poly_basis(X.points, m);
  Eigen::MatrixXd C = poly_complement_basis(X.points, m, p);

  std::vector<int> all(n_nodes);
  for (int i = 0; i < n_nodes; ++i) all[i] = i;

  hb.block_begin.assign(1, 0);
  for (int j = tree.finest_level; j >= 0; --j) {
    for (BasisVector& d : details[j]) hb.cols.push_back(std::move(d));
    hb.block_begin.push_back(static_cast<int>(hb.cols.size()));
  }
  for (Eigen::Index c = 0; c < C.cols(); ++c) {
    BasisVector bv;
    bv.support = all;
    bv.coeffs = C.col(c);
    bv.level = -1;
    bv.kind = BasisKind::Detail;
    hb.cols.push_back(std::move(bv));
  }
  hb.block_begin.push_back(static_cast<int>(hb.cols.size()));
  for (Eigen::Index c = 0; c < L.basis.cols(); ++c) {
    BasisVector bv;
    bv.support = all;
    bv.coeffs = L.basis.col(c);
    bv.level = -1;
    bv.kind = BasisKind::PolyCoarse;
    hb.cols.push_back(std::move(bv));
  }
  hb.block_begin.push_back(static_cast<int>(hb.cols.size()));

  if (static_cast<int>(hb.cols.size()) != n_nodes)
    throw NumericError("build_hb: transform has " +
                       std::to_string(hb.cols.size()) + " columns for " +
                       std::to_string(n_nodes) +
                       " nodes; box split ranks are inconsistent");

  hb.tree = std::move(tree);
  return hb;
}

// Dense assembly of P for oracle comparisons at modest N.
inline Eigen::MatrixXd dense_P(const HBTransform& hb) {
  Eigen::MatrixXd P =
      Eigen::MatrixXd::Zero(hb.n_nodes, static_cast<Eigen::Index>(hb.cols.size()));
  for (std::size_t g = 0; g < hb.cols.size(); ++g) {
    const BasisVector& c = hb.cols[g];
    for (std::size_t t = 0; t < c.support.size(); ++t)
      P(c.support[t], static_cast<Eigen::Index>(g)) =
          c.coeffs[static_cast<Eigen::Index>(t)];
  }
  return P;
}

}  // namespace hbrbf
