#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hbrbf/types.hpp"

namespace hbrbf {

// The three radial kernels handled by this library, all of the form
// K(r) = scale * (r^2 + delta^2)^(l/2) with l = +1 or l = -1:
//
//   Biharmonic           K(r) = scale * r                    (delta = 0, l = +1)
//   Multiquadric         K(r) = scale * sqrt(r^2 + delta^2)  (delta > 0, l = +1)
//   InverseMultiquadric  K(r) = scale / sqrt(r^2 + delta^2)  (delta > 0, l = -1)
//
// Biharmonic and multiquadric are conditionally negative definite of order 1
// (the quadratic form is negative on coefficient vectors orthogonal to
// polynomials of degree <= 1); the inverse multiquadric is unconditionally
// positive definite (order 0) and doubles as the Kriging covariance model
// scale * (r^2 + delta^2)^(-1/2).
enum class KernelFamily { Biharmonic, Multiquadric, InverseMultiquadric };

enum class DefinitenessSign { Positive, Negative };

struct KernelSpec {
  KernelFamily family = KernelFamily::Biharmonic;
  double delta = 0.0;  // shape parameter, in length units of the normalized domain
  double scale = 1.0;  // positive multiplier

  int cpd_order() const {
    return family == KernelFamily::InverseMultiquadric ? 0 : 1;
  }

  DefinitenessSign sign() const {
    return family == KernelFamily::InverseMultiquadric
               ? DefinitenessSign::Positive
               : DefinitenessSign::Negative;
  }

  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw ConfigError("kernel: scale must be positive and finite, got " +
                        std::to_string(scale));
    if (!std::isfinite(delta) || delta < 0.0)
      throw ConfigError("kernel: delta must be nonnegative and finite, got " +
                        std::to_string(delta));
    if (family == KernelFamily::Biharmonic && delta != 0.0)
      throw ConfigError("kernel: biharmonic takes no shape parameter (delta "
                        "must be 0), got " + std::to_string(delta));
    if (family != KernelFamily::Biharmonic && delta == 0.0)
      throw ConfigError("kernel: delta must be positive for this family");
  }

  static KernelSpec biharmonic(double scale = 1.0) {
    KernelSpec s{KernelFamily::Biharmonic, 0.0, scale};
    s.validate();
    return s;
  }
  static KernelSpec multiquadric(double delta, double scale = 1.0) {
    KernelSpec s{KernelFamily::Multiquadric, delta, scale};
    s.validate();
    return s;
  }
  static KernelSpec inverse_multiquadric(double delta, double scale = 1.0) {
    KernelSpec s{KernelFamily::InverseMultiquadric, delta, scale};
    s.validate();
    return s;
  }
};

inline const char* kernel_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::Biharmonic: return "biharmonic";
    case KernelFamily::Multiquadric: return "mq";
    case KernelFamily::InverseMultiquadric: return "imq";
  }
  return "?";
}

inline double eval_kernel_r2(const KernelSpec& spec, double r2) {
  const double t = r2 + spec.delta * spec.delta;
  switch (spec.family) {
    case KernelFamily::Biharmonic: return spec.scale * std::sqrt(r2);
    case KernelFamily::Multiquadric: return spec.scale * std::sqrt(t);
    case KernelFamily::InverseMultiquadric: return spec.scale / std::sqrt(t);
  }
  return 0.0;
}

inline double eval_kernel(const KernelSpec& spec, const Vec3& x, const Vec3& y) {
  return eval_kernel_r2(spec, (x - y).squaredNorm());
}

// Dense N x N kernel matrix, assembled from i <= j so it is exactly
// symmetric. Desk-scale only; quadratic storage.
inline Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                                     std::span<const Vec3> points) {
  const int n = static_cast<int>(points.size());
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double v = eval_kernel(spec, points[i], points[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

// y = K v without materializing K: O(N^2) kernel evaluations, fixed
// accumulation order (j ascending within each row) for determinism.
inline void kernel_matvec(const KernelSpec& spec, std::span<const Vec3> points,
                          const Eigen::VectorXd& v, Eigen::VectorXd& y) {
  const int n = static_cast<int>(points.size());
  if (v.size() != n)
    throw ContractError("kernel_matvec: vector length " +
                        std::to_string(v.size()) + " != node count " +
                        std::to_string(n));
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const Vec3 xi = points[i];
    for (int j = 0; j < n; ++j)
      acc += eval_kernel(spec, xi, points[j]) * v[j];
    y[i] = acc;
  }
}

// Repeated products y = K v behind one interface. Below `cache_limit` bytes
// of K the matrix is materialized once and products become GEMVs; above it
// every product re-evaluates the kernel (matrix-free). Both paths use fixed
// accumulation orders, so results are deterministic per configuration.
class KernelOperator {
 public:
  KernelOperator(KernelSpec spec, std::vector<Vec3> points,
                 std::size_t cache_limit = std::size_t{1} << 28)
      : spec_(spec), points_(std::move(points)) {
    spec_.validate();
    const std::size_t n = points_.size();
    if (n * n * sizeof(double) <= cache_limit)
      cache_ = kernel_matrix(spec_, points_);
  }

  int size() const { return static_cast<int>(points_.size()); }
  const KernelSpec& spec() const { return spec_; }
  const std::vector<Vec3>& points() const { return points_; }
  bool cached() const { return cache_.size() > 0; }

  void apply(const Eigen::VectorXd& v, Eigen::VectorXd& y) const {
    if (cache_.size() > 0)
      y.noalias() = cache_ * v;
    else
      kernel_matvec(spec_, points_, v, y);
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    Eigen::VectorXd y;
    apply(v, y);
    return y;
  }

 private:
  KernelSpec spec_;
  std::vector<Vec3> points_;
  Eigen::MatrixXd cache_;
};

}  // namespace hbrbf
