#pragma once

// Deterministic generators for the three benchmark node distributions:
// uniform draws in the unit cube, projections onto a pair of intersecting
// planes, and a bimodal Gaussian mixture. Every output is a pure function of
// (N, seed) through the counter-based generator, and point i depends only on
// counters derived from i, so gen(N1, seed) is a prefix of gen(N2, seed).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hbrbf/rng.hpp"
#include "hbrbf/types.hpp"

namespace hbrbf {

// Counter stream layout, shared by all generators:
//   [0, 3N)              point coordinates (uniform case), 3i + axis
//   [kNormalBase, ...)   Gaussian draws, 4 counters per point
//   [kSelectBase, ...)   mixture-component selectors, 1 per point
//   [kValueBase, ...)    attached data values, 1 per point
// The bases are far enough apart that the ranges stay disjoint for any
// realistic N.
inline constexpr std::uint64_t kNormalBase = std::uint64_t{1} << 60;
inline constexpr std::uint64_t kSelectBase = std::uint64_t{1} << 61;
inline constexpr std::uint64_t kValueBase = std::uint64_t{1} << 62;

enum class TestCase { UniformCube, VPlane, BimodalGaussian };

inline const char* to_string(TestCase c) {
  switch (c) {
    case TestCase::UniformCube: return "uniform";
    case TestCase::VPlane: return "vplane";
    case TestCase::BimodalGaussian: return "bimodal";
  }
  return "?";
}

inline TestCase parse_test_case(const std::string& name) {
  if (name == "uniform") return TestCase::UniformCube;
  if (name == "vplane") return TestCase::VPlane;
  if (name == "bimodal") return TestCase::BimodalGaussian;
  throw ConfigError("unknown test case '" + name +
                    "' (expected uniform, vplane, or bimodal)");
}

// N uniform points in [0,1)^3 with uniform data values in [0,1).
inline NodeSet gen_uniform_cube(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("gen_uniform_cube: need N >= 1");
  const CounterRng rng(seed);
  NodeSet out;
  out.points.reserve(n);
  out.values.reserve(n);
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(n); ++i) {
    out.points.emplace_back(rng.uniform(3 * i), rng.uniform(3 * i + 1),
                            rng.uniform(3 * i + 2));
    out.values.push_back(rng.uniform(kValueBase + i));
  }
  return out;
}

// Removes *both* members of every pair of points closer than `threshold`,
// keeping the surviving points (and their values) in input order.
inline NodeSet remove_close_pairs(const NodeSet& in, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("dedup threshold must be positive");
  const int n = in.size();
  std::vector<bool> drop(n, false);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((in.points[i] - in.points[j]).norm() < threshold) {
        drop[i] = true;
        drop[j] = true;
      }
  NodeSet out;
  for (int i = 0; i < n; ++i) {
    if (drop[i]) continue;
    out.points.push_back(in.points[i]);
    if (in.has_values()) out.values.push_back(in.values[i]);
  }
  return out;
}

// Projects the uniform-cube points alternately (even index -> first plane,
// odd -> second) onto two planes that intersect at 135 degrees along the
// line {(t, 1/2, 0)}, then removes both members of any pair closer than
// 1e-4. The returned set is usually slightly smaller than N.
inline NodeSet gen_vplane(int n, std::uint64_t seed) {
  NodeSet cube = gen_uniform_cube(n, seed);
  // Unit vectors spanning the plane cross-sections; the angle between them
  // is 2 * 67.5 = 135 degrees.
  const double a = 67.5 * M_PI / 180.0;
  const Vec3 w[2] = {Vec3(0.0, -std::sin(a), std::cos(a)),
                     Vec3(0.0, std::sin(a), std::cos(a))};
  const Vec3 anchor(0.0, 0.5, 0.0);
  for (int i = 0; i < cube.size(); ++i) {
    const Vec3& wk = w[i % 2];
    const Vec3 normal(0.0, -wk[2], wk[1]);  // x-axis cross wk, unit length
    Vec3& x = cube.points[i];
    x -= (x - anchor).dot(normal) * normal;
  }
  return remove_close_pairs(cube, 1e-4);
}

// Equal-weight mixture of two isotropic Gaussians with sigma = 1/4 centered
// at (0, 1/2, 1/2) and (1, 1/2, 1/2). Samples are not clipped to the cube.
inline NodeSet gen_bimodal(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("gen_bimodal: need N >= 1");
  const CounterRng rng(seed);
  const Vec3 means[2] = {Vec3(0.0, 0.5, 0.5), Vec3(1.0, 0.5, 0.5)};
  const double sigma = 0.25;
  NodeSet out;
  out.points.reserve(n);
  out.values.reserve(n);
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(n); ++i) {
    const int comp = rng.uniform(kSelectBase + i) < 0.5 ? 0 : 1;
    const auto [z1, z2] = rng.normal_pair(kNormalBase + 4 * i);
    const auto [z3, unused] = rng.normal_pair(kNormalBase + 4 * i + 2);
    (void)unused;
    out.points.push_back(means[comp] + sigma * Vec3(z1, z2, z3));
    out.values.push_back(rng.uniform(kValueBase + i));
  }
  return out;
}

inline NodeSet generate_test_case(TestCase c, int n, std::uint64_t seed) {
  switch (c) {
    case TestCase::UniformCube: return gen_uniform_cube(n, seed);
    case TestCase::VPlane: return gen_vplane(n, seed);
    case TestCase::BimodalGaussian: return gen_bimodal(n, seed);
  }
  throw ContractError("generate_test_case: bad enum value");
}

}  // namespace hbrbf
