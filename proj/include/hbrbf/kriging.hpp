#pragma once

// Generalized least squares and best-linear-unbiased estimation on RBF
// covariances: trend-coefficient solves, kriging prediction and pointwise
// mean-squared-error surfaces, and covariance-consistent noise simulation.
// The covariance kernel must be positive definite (inverse multiquadric);
// conditionally definite kernels are rejected.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hbrbf/geometry.hpp"
#include "hbrbf/kernels.hpp"
#include "hbrbf/polyspace.hpp"
#include "hbrbf/rng.hpp"
#include "hbrbf/solver.hpp"
#include "hbrbf/types.hpp"

namespace hbrbf {

namespace detail {

inline void require_covariance(const KernelSpec& kernel) {
  if (kernel.cpd_order() != 0 || kernel.sign() != DefinitenessSign::Positive)
    throw ConfigError(
        "covariance kernels must be positive definite; use the inverse "
        "multiquadric family");
}

}  // namespace detail

// Trend coefficients c = (Q^T K^{-1} Q)^{-1} Q^T K^{-1} y for explicit dense
// matrices. K must be symmetric positive definite; Q full column rank.
inline Eigen::VectorXd glsq_from_matrices(const Eigen::MatrixXd& K,
                                          const Eigen::MatrixXd& Q,
                                          const Eigen::VectorXd& y) {
  if (K.rows() != K.cols() || Q.rows() != K.rows() || y.size() != K.rows())
    throw ContractError("glsq_from_matrices: dimension mismatch");
  const Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success)
    throw NumericError("glsq_from_matrices: covariance is not positive "
                       "definite to working precision");
  const Eigen::MatrixXd kq = llt.solve(Q);
  const Eigen::VectorXd ky = llt.solve(y);
  const Eigen::MatrixXd gram = Q.transpose() * kq;
  const Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(gram);
  if (gram_ldlt.info() != Eigen::Success)
    throw NumericError("glsq_from_matrices: normal matrix is singular (nodes "
                       "not unisolvent?)");
  return gram_ldlt.solve(Q.transpose() * ky);
}

// Dense GLSQ fit on the normalized nodes. The returned coefficients are in
// the monomial basis of degree <= m over normalized coordinates, matching
// the c block of direct_solve_saddle on the same data.
inline Eigen::VectorXd glsq_fit(const NodeSet& nodes, const Eigen::VectorXd& y,
                                const KernelSpec& kernel, int m) {
  detail::require_covariance(kernel);
  if (m < 0) throw ConfigError("need m >= 0");
  detail::validate_problem(nodes, y);
  if (nodes.size() + poly_dim(m) > 4000)
    throw ContractError("glsq_fit: dense path capped at N + M <= 4000");
  const NodeSet X = normalize_nodes(nodes).first;
  return glsq_from_matrices(kernel_matrix(kernel, X.points),
                            monomial_matrix(X.points, m), y);
}

// A fitted universal-kriging model. Prediction delegates to the RBF
// interpolant; the MSE surface uses a dense saddle factorization, so the
// model is limited to N + M(m) <= 4000 observations.
struct RegressionModel {
  KernelSpec kernel;
  int m = 0;
  RBFSolution fit;           // interpolant fitted with p = m
  double sigma2 = 0.0;       // process-variance estimate
  Eigen::FullPivLU<Eigen::MatrixXd> saddle;  // factorization on normalized coords
};

inline SolveOptions default_kriging_options() {
  SolveOptions opts;
  opts.outer_tol = 1e-10;
  return opts;
}

inline RegressionModel fit_blue(const NodeSet& nodes, const Eigen::VectorXd& y,
                                const KernelSpec& kernel, int m,
                                const SolveOptions& opts =
                                    default_kriging_options()) {
  detail::require_covariance(kernel);
  if (m < 0) throw ConfigError("need m >= 0");
  detail::validate_problem(nodes, y);
  const Eigen::Index n = nodes.size();
  const Eigen::Index M = poly_dim(m);
  if (n + M > 4000)
    throw ContractError("fit_blue: dense MSE path capped at N + M <= 4000");

  RegressionModel model;
  model.kernel = kernel;
  model.m = m;
  model.fit = solve_rbf(nodes, y, kernel, m, m, opts);

  // Process variance in the style of correlation-based kriging: with the
  // correlation matrix R = K / K(0), sigma^2 = (y - Qc)^T R^{-1} (y - Qc) / N,
  // which reduces to K(0) * u.y / N through the saddle identity u =
  // K^{-1}(y - Qc).
  const double k0 = eval_kernel(kernel, Vec3::Zero(), Vec3::Zero());
  model.sigma2 = k0 * std::max(0.0, model.fit.u.dot(y)) / static_cast<double>(n);

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n + M, n + M);
  S.topLeftCorner(n, n) = kernel_matrix(kernel, model.fit.X.points);
  const Eigen::MatrixXd Q = monomial_matrix(model.fit.X.points, m);
  S.topRightCorner(n, M) = Q;
  S.bottomLeftCorner(M, n) = Q.transpose();
  model.saddle.compute(S);
  if (!model.saddle.isInvertible())
    throw NumericError("fit_blue: saddle matrix is singular; check the nodes "
                       "for degeneracy");
  return model;
}

inline Eigen::VectorXd blue_predict(const RegressionModel& model,
                                    std::span<const Vec3> queries) {
  return evaluate_interpolant(model.fit, queries);
}

// Pointwise kriging MSE: with the covariance cross vector k(x) and monomial
// values q(x), the unscaled variance is K(x,x) - [k;q]^T S^{-1} [k;q]; it is
// scaled by sigma^2 / K(0) so the estimated process variance (not the unit
// prior) sets the magnitude. Round-off below zero is clamped; genuinely
// negative values raise an error.
inline Eigen::VectorXd blue_mse(const RegressionModel& model,
                                std::span<const Vec3> queries) {
  const Eigen::Index n = model.fit.X.size();
  const Eigen::Index M = poly_dim(model.m);
  const double k0 =
      eval_kernel(model.kernel, Vec3::Zero(), Vec3::Zero());
  Eigen::VectorXd out(static_cast<Eigen::Index>(queries.size()));
  Eigen::VectorXd rhs(n + M);
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Vec3 x = model.fit.map.forward(queries[qi]);
    for (Eigen::Index j = 0; j < n; ++j)
      rhs[j] = eval_kernel(model.kernel, x, model.fit.X.points[j]);
    const std::vector<Vec3> one = {x};
    rhs.tail(M) = monomial_matrix(one, model.m).row(0);
    const double raw = k0 - rhs.dot(model.saddle.solve(rhs));
    if (raw < -1e-10)
      throw NumericError("blue_mse: variance " + std::to_string(raw) +
                         " is negative beyond round-off; the covariance "
                         "factorization is numerically degenerate");
    out[static_cast<Eigen::Index>(qi)] = (model.sigma2 / k0) * std::max(0.0, raw);
  }
  return out;
}

// Draws Y_i = |x_i|_1^3 + eps_i with eps ~ N(0, K) on the normalized nodes.
// The factor C in eps = C z comes from a symmetric eigendecomposition of K
// with eigenvalues below 1e-12 * lambda_max clipped to zero, which keeps the
// simulator defined for near-singular covariances.
inline Eigen::VectorXd simulate_observations(const NodeSet& nodes,
                                             const KernelSpec& kernel,
                                             std::uint64_t seed) {
  detail::require_covariance(kernel);
  if (nodes.size() > 4000)
    throw ContractError("simulate_observations: dense path capped at N <= 4000");
  for (const Vec3& x : nodes.points)
    if (!x.allFinite()) throw DataError("node coordinates must be finite");

  const NodeSet X = normalize_nodes(nodes).first;
  const Eigen::MatrixXd K = kernel_matrix(kernel, X.points);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  if (es.info() != Eigen::Success)
    throw NumericError("simulate_observations: eigendecomposition failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lmax = lam.maxCoeff();
  if (lmax <= 0.0 || lam.minCoeff() < -1e-12 * lmax)
    throw NumericError("simulate_observations: covariance is indefinite "
                       "beyond the clipping tolerance");
  Eigen::VectorXd root = lam;
  for (Eigen::Index i = 0; i < root.size(); ++i)
    root[i] = lam[i] < 1e-12 * lmax ? 0.0 : std::sqrt(lam[i]);

  const CounterRng rng(seed);
  Eigen::VectorXd z(X.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z[i] = rng.normal_pair(2 * static_cast<std::uint64_t>(i)).first;

  const Eigen::VectorXd eps =
      es.eigenvectors() * (root.array() * (es.eigenvectors().transpose() * z).array()).matrix();
  Eigen::VectorXd y(nodes.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const Vec3& x = nodes.points[i];  // raw coordinates
    const double l1 = std::abs(x[0]) + std::abs(x[1]) + std::abs(x[2]);
    y[i] = l1 * l1 * l1 + eps[i];
  }
  return y;
}

}  // namespace hbrbf
