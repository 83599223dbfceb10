#pragma once

#include <Eigen/Core>

#include <vector>

#include "hbrbf/rng.hpp"
#include "hbrbf/types.hpp"

namespace testutil {

// Uniform points in [0,1)^3, deterministic per seed.
inline std::vector<hbrbf::Vec3> random_points(int n, std::uint64_t seed) {
  hbrbf::CounterRng rng(seed);
  std::vector<hbrbf::Vec3> pts(n);
  for (int i = 0; i < n; ++i)
    pts[i] = hbrbf::Vec3(rng.uniform(3 * i), rng.uniform(3 * i + 1),
                         rng.uniform(3 * i + 2));
  return pts;
}

inline Eigen::VectorXd random_vector(int n, std::uint64_t seed) {
  hbrbf::CounterRng rng(seed);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(i) - 0.5;
  return v;
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  const double scale = want.norm();
  return (got - want).norm() / (scale > 0 ? scale : 1.0);
}

}  // namespace testutil
