#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include <array>
#include <span>
#include <string>
#include <vector>

#include "hbrbf/types.hpp"

namespace hbrbf {

// Dimension of the trivariate polynomial space of total degree <= m:
// (m+1)(m+2)(m+3)/6. Orders used here are small (m <= ~10).
inline int poly_dim(int m) {
  if (m < 0) throw ConfigError("poly_dim: order must be >= 0, got " +
                               std::to_string(m));
  return (m + 1) * (m + 2) * (m + 3) / 6;
}

// Exponent triples (ex, ey, ez) in graded-lexicographic order: ascending
// total degree, and within a degree descending lexicographic comparison of
// (ex, ey, ez). Degree 1 is therefore x, y, z; degree 2 starts x^2, xy, xz.
// The order for m-1 is a prefix of the order for m.
inline std::vector<std::array<int, 3>> monomial_exponents(int m) {
  std::vector<std::array<int, 3>> out;
  out.reserve(poly_dim(m));
  for (int d = 0; d <= m; ++d)
    for (int ex = d; ex >= 0; --ex)
      for (int ey = d - ex; ey >= 0; --ey)
        out.push_back({ex, ey, d - ex - ey});
  return out;
}

// Vandermonde-style sample matrix: row i holds all monomials of total degree
// <= m evaluated at points[i], columns in graded-lexicographic order. By the
// prefix property, the matrix for m-1 is the leading poly_dim(m-1) columns.
// Intended for nodes normalized into [-1/2, 1/2]^3, which keeps every entry
// in [-1, 1] x 2^-deg and the scale of all columns comparable.
inline Eigen::MatrixXd monomial_matrix(std::span<const Vec3> points, int m) {
  const auto exps = monomial_exponents(m);
  const int n = static_cast<int>(points.size());
  Eigen::MatrixXd q(n, static_cast<int>(exps.size()));
  for (int i = 0; i < n; ++i) {
    const Vec3& x = points[i];
    // Powers up to m per coordinate, computed once per row.
    std::array<std::vector<double>, 3> pw;
    for (int c = 0; c < 3; ++c) {
      pw[c].resize(m + 1);
      pw[c][0] = 1.0;
      for (int e = 1; e <= m; ++e) pw[c][e] = pw[c][e - 1] * x[c];
    }
    for (std::size_t k = 0; k < exps.size(); ++k)
      q(i, static_cast<int>(k)) =
          pw[0][exps[k][0]] * pw[1][exps[k][1]] * pw[2][exps[k][2]];
  }
  return q;
}

namespace detail {

// Deterministic sign fix: the first component whose magnitude exceeds
// 1e-12 * max|v| is made positive (column-wise, in place).
inline void fix_column_signs(Eigen::MatrixXd& a) {
  for (int c = 0; c < a.cols(); ++c) {
    const double big = a.col(c).cwiseAbs().maxCoeff();
    if (big == 0.0) continue;
    for (int r = 0; r < a.rows(); ++r) {
      if (std::abs(a(r, c)) > 1e-12 * big) {
        if (a(r, c) < 0.0) a.col(c) = -a.col(c);
        break;
      }
    }
  }
}

}  // namespace detail

// Orthonormal basis of the degree-<= m polynomial space sampled on the nodes,
// as columns of L (N x poly_dim(m)), plus the change of basis G from the
// monomial columns: L = monomial_matrix(points, m) * G. G is what lets the
// basis be evaluated off the nodes (poly_j(x) = sum_k G(k,j) * monomial_k(x)).
struct OrthonormalPolyBasis {
  Eigen::MatrixXd basis;         // L, orthonormal columns
  Eigen::MatrixXd coefficients;  // G, poly_dim(m) x poly_dim(m)
};

// Throws DataError when the nodes are not unisolvent for degree m (sample
// rank below poly_dim(m), singular values <= 1e-10 * sigma_max discarded).
inline OrthonormalPolyBasis orthonormal_poly_basis(std::span<const Vec3> points,
                                                   int m) {
  const int dim = poly_dim(m);
  const int n = static_cast<int>(points.size());
  if (n < dim)
    throw DataError("poly basis: " + std::to_string(n) + " nodes cannot be "
                    "unisolvent for degree " + std::to_string(m) + " (need >= " +
                    std::to_string(dim) + ")");
  const Eigen::MatrixXd q = monomial_matrix(points, m);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(q, Eigen::ComputeThinU |
                                               Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-10 * sv(0);
  int rank = 0;
  while (rank < dim && sv(rank) > cutoff) ++rank;
  if (rank < dim)
    throw DataError("poly basis: nodes not unisolvent for degree " +
                    std::to_string(m) + ", sample rank " +
                    std::to_string(rank) + " < " + std::to_string(dim));
  OrthonormalPolyBasis out;
  out.basis = svd.matrixU();
  out.coefficients = svd.matrixV() * sv.cwiseInverse().asDiagonal();
  detail::fix_column_signs(out.basis);
  // Keep L = Q * G consistent with the sign fix: redo G columnwise from the
  // flipped U via G = V * S^-1 * diag(signs). Signs are recovered by
  // comparing one representative row.
  Eigen::MatrixXd u_raw = svd.matrixU();
  for (int c = 0; c < dim; ++c) {
    int r;
    u_raw.col(c).cwiseAbs().maxCoeff(&r);
    if (u_raw(r, c) * out.basis(r, c) < 0.0)
      out.coefficients.col(c) = -out.coefficients.col(c);
  }
  return out;
}

// Orthonormal basis of the part of the degree-<= p space orthogonal to the
// degree-<= m space on these nodes ("detail polynomials"): N x
// (poly_dim(p) - poly_dim(m)), columns orthonormal, each orthogonal to every
// degree-<= m monomial. Requires p >= m and unisolvency for degree p.
inline Eigen::MatrixXd poly_complement_basis(std::span<const Vec3> points,
                                             int m, int p) {
  if (p < m)
    throw ConfigError("poly complement: p (" + std::to_string(p) +
                      ") must be >= m (" + std::to_string(m) + ")");
  const int dim_m = poly_dim(m), dim_p = poly_dim(p);
  const int want = dim_p - dim_m;
  const Eigen::MatrixXd lp = orthonormal_poly_basis(points, p).basis;
  if (want == 0) return Eigen::MatrixXd(points.size(), 0);
  const Eigen::MatrixXd lm = orthonormal_poly_basis(points, m).basis;
  // Project the degree-p basis off the degree-m space, then orthonormalize
  // what remains; exactly `want` directions survive because both bases have
  // full rank.
  Eigen::MatrixXd b = lp - lm * (lm.transpose() * lp);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-10 * sv(0);
  int rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  if (rank != want)
    throw NumericError("poly complement: expected " + std::to_string(want) +
                       " directions, found " + std::to_string(rank));
  Eigen::MatrixXd d = svd.matrixU().leftCols(want);
  detail::fix_column_signs(d);
  return d;
}

}  // namespace hbrbf
