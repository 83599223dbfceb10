#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hbrbf/geometry.hpp"
#include "hbrbf/hbasis.hpp"
#include "hbrbf/kernels.hpp"
#include "hbrbf/krylov.hpp"
#include "hbrbf/types.hpp"

namespace hbrbf {

struct LevelBlock {
  int level;  // octree level of the detail block; -1 for the complement
  int begin;  // range in the reduced vector (the first N - M(m) columns)
  int end;
};

// The reduced operator K_W = T^H K T over detail + complement columns,
// applied matrix-free: synthesize, kernel mat-vec, analyze. Block layout
// follows the transform's column order: level n down to level 0, then the
// complement block as the coarsest.
struct MultiResOperator {
  const HBTransform* hb = nullptr;
  const NodeSet* X = nullptr;
  KernelOperator K;
  double sign = 1.0;  // definiteness sign of K_W on the reduced space
  std::vector<LevelBlock> blocks;
  int dim = 0;

  MultiResOperator(const HBTransform& hb_in, const NodeSet& X_in,
                   const KernelSpec& kernel,
                   std::size_t cache_limit = std::size_t{1} << 28)
      : hb(&hb_in),
        X(&X_in),
        K(kernel, X_in.points, cache_limit),
        sign(kernel.sign() == DefinitenessSign::Negative ? -1.0 : 1.0),
        dim(hb_in.reduced_dim()) {
    for (int j = hb_in.levels(); j >= 0; --j) {
      auto [b, e] = hb_in.detail_range(j);
      blocks.push_back({j, b, e});
    }
    auto [cb, ce] = hb_in.complement_range();
    blocks.push_back({-1, cb, ce});
  }
};

inline Eigen::VectorXd matvec_KW(const MultiResOperator& op,
                                 const Eigen::VectorXd& a) {
  if (a.size() != op.dim)
    throw ContractError("matvec_KW: expected length " +
                        std::to_string(op.dim) + ", got " +
                        std::to_string(a.size()));
  const Eigen::VectorXd v = op.hb->synthesize(0, op.dim, a);
  return op.hb->analyze(0, op.dim, op.K.apply(v));
}

// Dense oracle: T^H K T by explicit triple product. Test-scale only.
inline Eigen::MatrixXd dense_KW(const MultiResOperator& op) {
  const Eigen::MatrixXd P = dense_P(*op.hb);
  const Eigen::MatrixXd Kd = kernel_matrix(op.K.spec(), op.X->points);
  return P.leftCols(op.dim).transpose() * Kd * P.leftCols(op.dim);
}

struct SparseBlock {
  int level = 0;  // matches the LevelBlock it approximates
  int offset = 0;
  Eigen::SparseMatrix<double> mat;

  std::size_t max_row_nnz() const {
    std::vector<std::size_t> counts(mat.rows(), 0);
    for (int k = 0; k < mat.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(mat, k); it; ++it)
        ++counts[it.row()];
    std::size_t worst = 0;
    for (std::size_t c : counts) worst = std::max(worst, c);
    return worst;
  }
};

namespace detail {

// Exact bilinear sub-block between two groups of basis vectors sharing the
// supports `rows_k` / `rows_l`: C_k^H K(U_k, U_l) C_l, streamed over row
// chunks so the kernel matrix slice never materializes whole.
inline Eigen::MatrixXd bilinear_subblock(const KernelSpec& kernel,
                                         const std::vector<Vec3>& pts,
                                         const std::vector<int>& rows_k,
                                         const Eigen::MatrixXd& Ck,
                                         const std::vector<int>& rows_l,
                                         const Eigen::MatrixXd& Cl) {
  constexpr Eigen::Index kChunk = 512;
  const Eigen::Index nk = static_cast<Eigen::Index>(rows_k.size());
  const Eigen::Index nl = static_cast<Eigen::Index>(rows_l.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(Ck.cols(), Cl.cols());
  Eigen::MatrixXd slab(kChunk, nl);
  for (Eigen::Index r0 = 0; r0 < nk; r0 += kChunk) {
    const Eigen::Index rows = std::min(kChunk, nk - r0);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Vec3& x = pts[rows_k[static_cast<std::size_t>(r0 + r)]];
      for (Eigen::Index c = 0; c < nl; ++c)
        slab(r, c) =
            eval_kernel(kernel, x, pts[rows_l[static_cast<std::size_t>(c)]]);
    }
    out.noalias() +=
        Ck.middleRows(r0, rows).transpose() * (slab.topRows(rows) * Cl);
  }
  return out;
}

// Per level: the columns grouped by owning box (contiguous by construction).
struct BoxColumns {
  int box_id;
  int col_begin, col_end;       // reduced indices
  std::vector<int> support;     // shared support of the box's details
  Eigen::MatrixXd coeffs;       // |support| x (col_end - col_begin)
};

inline std::vector<BoxColumns> group_by_box(const HBTransform& hb, int begin,
                                            int end) {
  std::vector<BoxColumns> groups;
  int g = begin;
  while (g < end) {
    int h = g;
    while (h < end && hb.cols[h].box_id == hb.cols[g].box_id) ++h;
    BoxColumns bc;
    bc.box_id = hb.cols[g].box_id;
    bc.col_begin = g;
    bc.col_end = h;
    bc.support = hb.cols[g].support;
    bc.coeffs.resize(static_cast<Eigen::Index>(bc.support.size()), h - g);
    for (int c = g; c < h; ++c) {
      if (hb.cols[c].support != bc.support)
        throw ContractError("sparse blocks: detail columns of one box must "
                            "share a support");
      bc.coeffs.col(c - g) = hb.cols[c].coeffs;
    }
    groups.push_back(std::move(bc));
    g = h;
  }
  return groups;
}

// Minimum axis-aligned gap between the adjacency unions of two same-level
// boxes, computed on the integer grid.
inline double union_gap(const std::vector<const OctreeBox*>& lk,
                        const std::vector<const OctreeBox*>& ll, double side) {
  double best = std::numeric_limits<double>::infinity();
  for (const OctreeBox* a : lk)
    for (const OctreeBox* b : ll) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const std::uint64_t d = a->grid[c] > b->grid[c]
                                    ? a->grid[c] - b->grid[c]
                                    : b->grid[c] - a->grid[c];
        if (d > 1) {
          const double gap = static_cast<double>(d - 1) * side;
          s += gap * gap;
        }
      }
      best = std::min(best, std::sqrt(s));
      if (best == 0.0) return 0.0;
    }
  return best;
}

}  // namespace detail

// Sparse approximations of the diagonal level blocks: an entry between the
// details of boxes k and l survives iff the adjacency unions L_k, L_l come
// within tau = tau_scale * 2^{-level} of each other. The complement block is
// global, hence kept dense. tau_scale is a testing knob; 1 is the operating
// value.
inline std::vector<SparseBlock> build_sparse_diag_blocks(
    const MultiResOperator& op, double tau_scale = 1.0) {
  if (tau_scale <= 0) throw ConfigError("sparse blocks: tau_scale must be > 0");
  const HBTransform& hb = *op.hb;
  const Octree& tree = hb.tree;
  std::vector<SparseBlock> out;

  for (const LevelBlock& lb : op.blocks) {
    SparseBlock sb;
    sb.level = lb.level;
    sb.offset = lb.begin;
    const int d = lb.end - lb.begin;
    sb.mat.resize(d, d);
    if (d == 0) {
      out.push_back(std::move(sb));
      continue;
    }

    if (lb.level < 0) {
      // Complement block: dense via kernel mat-vecs shared across pairs.
      Eigen::MatrixXd cols(op.X->size(), d);
      for (int c = 0; c < d; ++c) {
        Eigen::VectorXd dense = Eigen::VectorXd::Zero(op.X->size());
        hb.cols[lb.begin + c].add_scaled(1.0, dense);
        cols.col(c) = dense;
      }
      Eigen::MatrixXd kc(op.X->size(), d);
      for (int c = 0; c < d; ++c) kc.col(c) = op.K.apply(cols.col(c));
      Eigen::MatrixXd block = cols.transpose() * kc;
      block = 0.5 * (block + block.transpose()).eval();
      std::vector<Eigen::Triplet<double>> trips;
      trips.reserve(static_cast<std::size_t>(d) * d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) trips.emplace_back(i, j, block(i, j));
      sb.mat.setFromTriplets(trips.begin(), trips.end());
      out.push_back(std::move(sb));
      continue;
    }

    auto groups = detail::group_by_box(hb, lb.begin, lb.end);
    const double side = std::ldexp(1.0, -lb.level);
    const double tau = tau_scale * side;

    // Adjacency unions over *all* stored boxes of this level.
    std::map<std::array<std::uint64_t, 3>, int> at;
    for (int id : tree.level_boxes[lb.level]) at[tree.boxes[id].grid] = id;
    auto union_of = [&](int id) {
      std::vector<const OctreeBox*> l{&tree.boxes[id]};
      const auto& g = tree.boxes[id].grid;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            if (!dx && !dy && !dz) continue;
            if ((dx < 0 && g[0] == 0) || (dy < 0 && g[1] == 0) ||
                (dz < 0 && g[2] == 0))
              continue;
            const std::array<std::uint64_t, 3> key = {g[0] + dx, g[1] + dy,
                                                      g[2] + dz};
            auto it = at.find(key);
            if (it != at.end()) l.push_back(&tree.boxes[it->second]);
          }
      return l;
    };
    std::vector<std::vector<const OctreeBox*>> unions;
    unions.reserve(groups.size());
    for (const auto& g : groups) unions.push_back(union_of(g.box_id));

    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a; b < groups.size(); ++b) {
        if (detail::union_gap(unions[a], unions[b], side) > tau) continue;
        Eigen::MatrixXd block = detail::bilinear_subblock(
            op.K.spec(), op.X->points, groups[a].support, groups[a].coeffs,
            groups[b].support, groups[b].coeffs);
        // The within-box block is symmetric up to summation order; make it
        // exactly so, keeping the assembled level block symmetric bit for bit.
        if (a == b) block = 0.5 * (block + block.transpose()).eval();
        const int ra = groups[a].col_begin - lb.begin;
        const int rb = groups[b].col_begin - lb.begin;
        for (Eigen::Index i = 0; i < block.rows(); ++i)
          for (Eigen::Index j = 0; j < block.cols(); ++j) {
            trips.emplace_back(ra + i, rb + j, block(i, j));
            if (a != b) trips.emplace_back(rb + j, ra + i, block(i, j));
          }
      }
    }
    sb.mat.setFromTriplets(trips.begin(), trips.end());
    out.push_back(std::move(sb));
  }
  return out;
}

// Exact (fully dense) level blocks in the same container, for oracle use and
// for the "exact blocks" preconditioner variant at test scale.
inline std::vector<SparseBlock> build_exact_diag_blocks(
    const MultiResOperator& op) {
  const Eigen::MatrixXd kw = dense_KW(op);
  std::vector<SparseBlock> out;
  for (const LevelBlock& lb : op.blocks) {
    SparseBlock sb;
    sb.level = lb.level;
    sb.offset = lb.begin;
    const int d = lb.end - lb.begin;
    const Eigen::MatrixXd block = kw.block(lb.begin, lb.begin, d, d);
    sb.mat.resize(d, d);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(d) * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) trips.emplace_back(i, j, block(i, j));
    sb.mat.setFromTriplets(trips.begin(), trips.end());
    out.push_back(std::move(sb));
  }
  return out;
}

// |a(psi_g, psi_g)| for every reduced column, via per-box row streaming so
// kernel evaluations are shared across the columns of a box.
inline Eigen::VectorXd diag_preconditioner(const MultiResOperator& op) {
  const HBTransform& hb = *op.hb;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(op.dim);

  for (const LevelBlock& lb : op.blocks) {
    if (lb.end == lb.begin) continue;
    if (lb.level < 0) {
      for (int g = lb.begin; g < lb.end; ++g) {
        Eigen::VectorXd dense = Eigen::VectorXd::Zero(op.X->size());
        hb.cols[g].add_scaled(1.0, dense);
        diag[g] = dense.dot(op.K.apply(dense));
      }
      continue;
    }
    for (const auto& grp : detail::group_by_box(hb, lb.begin, lb.end)) {
      const Eigen::MatrixXd block =
          detail::bilinear_subblock(op.K.spec(), op.X->points, grp.support,
                                    grp.coeffs, grp.support, grp.coeffs);
      for (int c = grp.col_begin; c < grp.col_end; ++c)
        diag[c] = block(c - grp.col_begin, c - grp.col_begin);
    }
  }

  diag = diag.cwiseAbs();
  for (int g = 0; g < op.dim; ++g)
    if (diag[g] <= 0.0)
      throw NumericError("diag_preconditioner: zero diagonal entry for basis "
                         "vector " +
                         std::to_string(g));
  return diag;
}

struct SsorOptions {
  double inner_tol = 1e-6;
  int inner_cap = 500;
  bool throw_on_cap = true;  // the solver path downgrades caps to a warning
};

struct SsorStats {
  std::vector<long> inner_iterations;  // aligned with op.blocks
  bool cap_hit = false;
};

// Applies the inverse of the block-SSOR preconditioner
//   P = (L^H + D) D^{-1} (L + D)
// in three stages: an upper block back substitution (coarsest block first),
// the block-diagonal multiply, and a lower block forward substitution.
// Diagonal solves run CG on the supplied block representation (sign-flipped
// so CG sees a positive definite system); off-diagonal couplings come from
// one full operator mat-vec per computed block, accumulated for the rows
// that still await their substitution step.
inline Eigen::VectorXd apply_ssor_inverse(const std::vector<SparseBlock>& blocks,
                                          const MultiResOperator& op,
                                          const Eigen::VectorXd& beta,
                                          const SsorOptions& so = {},
                                          SsorStats* stats = nullptr) {
  if (beta.size() != op.dim)
    throw ContractError("apply_ssor_inverse: rhs length mismatch");
  if (blocks.size() != op.blocks.size())
    throw ContractError("apply_ssor_inverse: block list does not match the "
                        "operator's level structure");
  const int B = static_cast<int>(blocks.size());
  if (stats && stats->inner_iterations.empty())
    stats->inner_iterations.assign(B, 0);

  auto block_solve = [&](int t, const Eigen::VectorXd& rhs) {
    const Eigen::SparseMatrix<double>& d = blocks[t].mat;
    LinOp a = [&](const Eigen::VectorXd& x) {
      return Eigen::VectorXd(op.sign * (d * x));
    };
    CGResult r = cg(a, Eigen::VectorXd(op.sign * rhs), so.inner_tol,
                    so.inner_cap);
    if (stats) stats->inner_iterations[t] += r.iterations;
    if (!r.converged) {
      if (so.throw_on_cap)
        throw NumericError(
            "apply_ssor_inverse: inner CG hit its cap on block level " +
            std::to_string(op.blocks[t].level));
      if (stats) stats->cap_hit = true;
    }
    return r.x;
  };
  // One operator application restricted to the rows [rb, re), given a block
  // of coefficients at columns [cb, ce).
  auto coupled = [&](int cb, int ce, const Eigen::VectorXd& w, int rb, int re,
                     Eigen::VectorXd& acc) {
    if (rb == re) return;
    const Eigen::VectorXd y = op.K.apply(op.hb->synthesize(cb, ce, w));
    acc.segment(rb, re - rb) += op.hb->analyze(rb, re, y);
  };

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(op.dim);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(op.dim);
  for (int t = B - 1; t >= 0; --t) {
    const auto& lb = op.blocks[t];
    if (lb.end == lb.begin) continue;
    const Eigen::VectorXd rhs = beta.segment(lb.begin, lb.end - lb.begin) -
                                acc.segment(lb.begin, lb.end - lb.begin);
    gamma.segment(lb.begin, lb.end - lb.begin) = block_solve(t, rhs);
    coupled(lb.begin, lb.end, gamma.segment(lb.begin, lb.end - lb.begin), 0,
            lb.begin, acc);
  }

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(op.dim);
  for (int t = 0; t < B; ++t) {
    const auto& lb = op.blocks[t];
    if (lb.end == lb.begin) continue;
    eta.segment(lb.begin, lb.end - lb.begin) =
        blocks[t].mat * gamma.segment(lb.begin, lb.end - lb.begin);
  }

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(op.dim);
  acc.setZero();
  for (int t = 0; t < B; ++t) {
    const auto& lb = op.blocks[t];
    if (lb.end == lb.begin) continue;
    const Eigen::VectorXd rhs = eta.segment(lb.begin, lb.end - lb.begin) -
                                acc.segment(lb.begin, lb.end - lb.begin);
    mu.segment(lb.begin, lb.end - lb.begin) = block_solve(t, rhs);
    coupled(lb.begin, lb.end, mu.segment(lb.begin, lb.end - lb.begin), lb.end,
            op.dim, acc);
  }
  return mu;
}

struct DecayBin {
  double distance;  // representative box-center distance
  double max_abs;   // largest |entry| among pairs in the bin
};

// Bins the exact entries of one detail level block by the center distance of
// the owning boxes, in half-box-width granularity. Dense, test scale only.
inline std::vector<DecayBin> decay_profile(const MultiResOperator& op,
                                           int level) {
  if (op.X->size() > 2500)
    throw ContractError("decay_profile: dense level block needs N <= 2500");
  const HBTransform& hb = *op.hb;
  auto [b, e] = hb.detail_range(level);
  if (b == e) return {};

  const Eigen::Index n = op.X->size();
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(n, e - b);
  for (int g = b; g < e; ++g) {
    Eigen::VectorXd dense = Eigen::VectorXd::Zero(n);
    hb.cols[g].add_scaled(1.0, dense);
    cols.col(g - b) = dense;
  }
  const Eigen::MatrixXd kd = kernel_matrix(op.K.spec(), op.X->points);
  const Eigen::MatrixXd block = cols.transpose() * kd * cols;

  const double half = std::ldexp(1.0, -level) / 2.0;
  std::map<long, DecayBin> bins;
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    const Vec3 ci = hb.tree.boxes[hb.cols[b + i].box_id].center();
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      const Vec3 cj = hb.tree.boxes[hb.cols[b + j].box_id].center();
      const double dist = (ci - cj).norm();
      const long key = std::lround(dist / half);
      auto [it, fresh] = bins.try_emplace(key, DecayBin{key * half, 0.0});
      it->second.max_abs = std::max(it->second.max_abs, std::abs(block(i, j)));
    }
  }
  std::vector<DecayBin> out;
  for (const auto& [key, bin] : bins) out.push_back(bin);
  return out;
}

}  // namespace hbrbf
