#pragma once

// End-to-end interpolation drivers: the multiresolution solver (normalize ->
// octree -> hierarchical basis -> preconditioned GMRES on the reduced
// operator) and a dense saddle-point reference path for cross-checking it.

#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hbrbf/geometry.hpp"
#include "hbrbf/hbasis.hpp"
#include "hbrbf/kernels.hpp"
#include "hbrbf/krylov.hpp"
#include "hbrbf/mrop.hpp"
#include "hbrbf/polyspace.hpp"
#include "hbrbf/types.hpp"

namespace hbrbf {

enum class Preconditioner { None, Diagonal, BlockSsor };

inline const char* to_string(Preconditioner p) {
  switch (p) {
    case Preconditioner::None: return "none";
    case Preconditioner::Diagonal: return "diagonal";
    case Preconditioner::BlockSsor: return "block-ssor";
  }
  return "?";
}

struct SolveOptions {
  Preconditioner preconditioner = Preconditioner::Diagonal;
  int restart = 100;          // GMRES restart length
  double outer_tol = 1e-3;    // relative residual target for the reduced system
  double inner_tol = 1e-6;    // per-block CG tolerance inside block SSOR
  int max_outer = 10000;      // total Krylov step budget
  double tau_scale = 1.0;     // admissibility knob for the sparse level blocks
  std::size_t cache_limit = std::size_t{1} << 28;
};

struct SolveReport {
  int outer_iterations = 0;             // Krylov steps on the reduced system
  bool converged = false;
  bool breakdown = false;
  double final_residual = 0.0;          // true relative residual, reduced system
  std::vector<double> residual_history; // at start and after each restart cycle
  // Inner CG steps accumulated per block, finest level first, complement
  // last (block SSOR only; empty otherwise).
  std::vector<long> inner_iteration_totals;
  double interpolation_residual = 0.0;  // max_i |s(x_i) - d_i|
  int reduced_dim = 0;
  double hb_seconds = 0.0;
  double precond_seconds = 0.0;
  double solve_seconds = 0.0;
  double total_seconds = 0.0;
};

// Interpolant s(x) = sum_j u_j K(x, x_j) + sum_g c_g L_g(x), where L is the
// orthonormal polynomial basis on the normalized nodes. Both parts live in
// normalized coordinates; evaluate_interpolant maps queries accordingly.
struct RBFSolution {
  Eigen::VectorXd u;            // kernel coefficients, one per node
  Eigen::VectorXd c;            // polynomial coefficients in the L basis
  NodeSet X;                    // normalized nodes
  Normalization map;
  KernelSpec kernel;
  int m = 0;
  Eigen::MatrixXd poly_coeffs;  // monomial-to-L change of basis
  SolveReport report;
};

namespace detail {

inline void validate_problem(const NodeSet& nodes, const Eigen::VectorXd& d) {
  if (d.size() != nodes.size())
    throw ContractError("expected one value per node, got " +
                        std::to_string(d.size()) + " values for " +
                        std::to_string(nodes.size()) + " nodes");
  if (!d.allFinite()) throw DataError("data values must be finite");
  for (const Vec3& x : nodes.points)
    if (!x.allFinite()) throw DataError("node coordinates must be finite");
}

inline double seconds_since(
    std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace detail

inline RBFSolution solve_rbf(const NodeSet& nodes, const Eigen::VectorXd& d,
                             const KernelSpec& kernel, int m, int p,
                             const SolveOptions& opts = {}) {
  if (m < 0 || p < m) throw ConfigError("need 0 <= m <= p");
  if (opts.restart < 1 || opts.outer_tol <= 0 || opts.inner_tol <= 0 ||
      opts.max_outer < 1 || opts.tau_scale <= 0)
    throw ConfigError("solver options out of range");
  detail::validate_problem(nodes, d);

  const auto t_total = std::chrono::steady_clock::now();
  RBFSolution sol;
  sol.kernel = kernel;
  sol.m = m;

  auto t0 = std::chrono::steady_clock::now();
  std::tie(sol.X, sol.map) = normalize_nodes(nodes);
  Octree tree = build_octree(sol.X, poly_dim(p));
  const HBTransform hb = build_hb(std::move(tree), sol.X, m, p);
  sol.poly_coeffs = orthonormal_poly_basis(sol.X.points, m).coefficients;
  sol.report.hb_seconds = detail::seconds_since(t0);
  sol.report.reduced_dim = hb.reduced_dim();

  MultiResOperator op(hb, sol.X, kernel, opts.cache_limit);

  // Flip negative-definite kernels so GMRES sees a positive-definite reduced
  // operator; the preconditioners are flipped consistently below.
  const double sign = op.sign;
  const LinOp A = [&](const Eigen::VectorXd& x) {
    return (sign * matvec_KW(op, x)).eval();
  };

  t0 = std::chrono::steady_clock::now();
  std::vector<SparseBlock> blocks;
  Eigen::VectorXd dscale;
  SsorOptions ssor_opts;
  ssor_opts.inner_tol = opts.inner_tol;
  ssor_opts.throw_on_cap = false;  // warn and continue inside an outer solve
  SsorStats ssor_stats;
  LinOp Minv;
  switch (opts.preconditioner) {
    case Preconditioner::None:
      Minv = [](const Eigen::VectorXd& r) { return r; };
      break;
    case Preconditioner::Diagonal:
      dscale = diag_preconditioner(op);
      Minv = [&dscale](const Eigen::VectorXd& r) {
        return r.cwiseQuotient(dscale).eval();
      };
      break;
    case Preconditioner::BlockSsor:
      blocks = build_sparse_diag_blocks(op, opts.tau_scale);
      Minv = [&](const Eigen::VectorXd& r) {
        return (sign * apply_ssor_inverse(blocks, op, r, ssor_opts,
                                          &ssor_stats))
            .eval();
      };
      break;
  }
  sol.report.precond_seconds = detail::seconds_since(t0);

  const Eigen::VectorXd d_W = hb.analyze(0, op.dim, d);

  GmresOptions gopts;
  gopts.restart = opts.restart;
  gopts.tol = opts.outer_tol;
  gopts.max_iterations = opts.max_outer;

  t0 = std::chrono::steady_clock::now();
  const GmresResult res = gmres_restarted(A, Minv, (sign * d_W).eval(), gopts);
  sol.report.solve_seconds = detail::seconds_since(t0);
  sol.report.outer_iterations = res.iterations;
  sol.report.converged = res.converged;
  sol.report.breakdown = res.breakdown;
  sol.report.final_residual = res.final_residual;
  sol.report.residual_history = res.residual_history;
  sol.report.inner_iteration_totals = ssor_stats.inner_iterations;

  sol.u = hb.synthesize(0, op.dim, res.x);
  const Eigen::VectorXd ku = op.K.apply(sol.u);
  auto [pb, pe] = hb.poly_range();
  sol.c = hb.analyze(pb, pe, d - ku);
  const Eigen::VectorXd s_nodes = ku + hb.synthesize(pb, pe, sol.c);
  sol.report.interpolation_residual = (s_nodes - d).cwiseAbs().maxCoeff();
  sol.report.total_seconds = detail::seconds_since(t_total);
  return sol;
}

inline Eigen::VectorXd evaluate_interpolant(const RBFSolution& sol,
                                            std::span<const Vec3> queries) {
  const Eigen::Index n = sol.X.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(queries.size()));
  std::vector<Vec3> qn(queries.begin(), queries.end());
  for (Vec3& q : qn) q = sol.map.forward(q);
  for (std::size_t i = 0; i < qn.size(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      acc += sol.u[j] * eval_kernel(sol.kernel, qn[i], sol.X.points[j]);
    out[static_cast<Eigen::Index>(i)] = acc;
  }
  if (sol.c.size() > 0) {
    const Eigen::MatrixXd qmono = monomial_matrix(qn, sol.m);
    out += qmono * (sol.poly_coeffs * sol.c);
  }
  return out;
}

// Reference path: assemble and factor the dense saddle system
//   [ K  Q ] [u]   [d]
//   [ Q^T 0 ] [c] = [0]
// on the normalized nodes, with Q the monomial basis of degree <= m.
struct DirectSolution {
  Eigen::VectorXd u;   // kernel coefficients, one per node
  Eigen::VectorXd c;   // monomial coefficients (graded lexicographic order)
  NodeSet X;           // normalized nodes
  Normalization map;
  KernelSpec kernel;
  int m = 0;
};

inline DirectSolution direct_solve_saddle(const NodeSet& nodes,
                                          const Eigen::VectorXd& d,
                                          const KernelSpec& kernel, int m) {
  if (m < 0) throw ConfigError("need m >= 0");
  detail::validate_problem(nodes, d);
  const Eigen::Index n = nodes.size();
  const Eigen::Index M = poly_dim(m);
  if (n + M > 4000)
    throw ContractError("direct_solve_saddle: dense path capped at N + M <= "
                        "4000, got " + std::to_string(n + M));

  DirectSolution sol;
  sol.kernel = kernel;
  sol.m = m;
  std::tie(sol.X, sol.map) = normalize_nodes(nodes);

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n + M, n + M);
  S.topLeftCorner(n, n) = kernel_matrix(kernel, sol.X.points);
  const Eigen::MatrixXd Q = monomial_matrix(sol.X.points, m);
  S.topRightCorner(n, M) = Q;
  S.bottomLeftCorner(M, n) = Q.transpose();

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + M);
  rhs.head(n) = d;

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  if (!lu.isInvertible())
    throw NumericError(
        "direct_solve_saddle: saddle matrix is singular; the nodes are "
        "degenerate for this kernel/degree combination");
  const Eigen::VectorXd x = lu.solve(rhs);
  sol.u = x.head(n);
  sol.c = x.tail(M);
  return sol;
}

inline Eigen::VectorXd evaluate_direct(const DirectSolution& sol,
                                       std::span<const Vec3> queries) {
  const Eigen::Index n = sol.X.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(queries.size()));
  std::vector<Vec3> qn(queries.begin(), queries.end());
  for (Vec3& q : qn) q = sol.map.forward(q);
  for (std::size_t i = 0; i < qn.size(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      acc += sol.u[j] * eval_kernel(sol.kernel, qn[i], sol.X.points[j]);
    out[static_cast<Eigen::Index>(i)] = acc;
  }
  out += monomial_matrix(qn, sol.m) * sol.c;
  return out;
}

}  // namespace hbrbf
