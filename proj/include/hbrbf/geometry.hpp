#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hbrbf/types.hpp"

namespace hbrbf {

// Affine map taking raw nodes into the root cube [-1/2, 1/2]^3: subtract the
// centroid, divide by the max pairwise distance q. For strongly asymmetric
// clouds q alone cannot guarantee containment (the centroid is not the
// midpoint of the extent), so the divisor is enlarged to the smallest value
// that does; for the usual quasi-uniform inputs scale == q exactly.
struct Normalization {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 forward(const Vec3& x) const { return (x - center) / scale; }
  Vec3 backward(const Vec3& u) const { return u * scale + center; }
};

inline std::pair<NodeSet, Normalization> normalize_nodes(const NodeSet& nodes) {
  const int n = nodes.size();
  if (n == 0) throw DataError("normalize: empty node set");

  Normalization map;
  for (const Vec3& x : nodes.points) map.center += x;
  map.center /= n;

  double q = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      q = std::max(q, (nodes.points[i] - nodes.points[j]).norm());
  if (n >= 2 && q == 0.0)
    throw DataError("normalize: all nodes coincide");

  double extent = 0.0;
  for (const Vec3& x : nodes.points)
    extent = std::max(extent, (x - map.center).cwiseAbs().maxCoeff());
  map.scale = n == 1 ? 1.0 : q;
  if (2.0 * extent > map.scale)  // skewed cloud: q alone would not contain it
    map.scale =
        2.0 * extent * (1.0 + 4.0 * std::numeric_limits<double>::epsilon());

  NodeSet out = nodes;
  const double edge = 0.5;
  const double slack = 4.0 * std::ldexp(std::numeric_limits<double>::epsilon(), -1);
  for (Vec3& x : out.points) {
    x = map.forward(x);
    for (int c = 0; c < 3; ++c) {
      // Absorb rounding excursions just past the face (a few ulp at 0.5).
      if (std::abs(x[c]) > edge && std::abs(x[c]) <= edge + slack)
        x[c] = std::copysign(edge, x[c]);
    }
  }
  return {std::move(out), map};
}

// One cube of the multi-resolution decomposition. Geometry is derived from
// the integer grid position (exact powers of two), never accumulated.
struct OctreeBox {
  int level = 0;
  std::array<std::uint64_t, 3> grid = {0, 0, 0};  // cell coords, 0 .. 2^level-1
  std::vector<int> nodes;                         // sorted node indices
  int parent = -1;                                // flat index, -1 for root
  std::array<int, 8> children = {-1, -1, -1, -1, -1, -1, -1, -1};

  bool leaf() const {
    return std::all_of(children.begin(), children.end(),
                       [](int c) { return c < 0; });
  }
  double side() const { return std::ldexp(1.0, -level); }
  Vec3 lower() const {
    const double h = side();
    return Vec3(-0.5 + grid[0] * h, -0.5 + grid[1] * h, -0.5 + grid[2] * h);
  }
  Vec3 center() const { return lower() + Vec3::Constant(side() / 2); }
  Vec3 upper() const { return lower() + Vec3::Constant(side()); }

  // Path index k: base-8 digit string of octants from the root, i.e. the
  // child of box k with octant o has key 8k + o. Only the debug dump needs
  // it; representable up to level 42 (3 bits per level).
  unsigned __int128 key() const {
    if (level > 42)
      throw ContractError("octree: box key not representable past level 42");
    unsigned __int128 k = 0;
    for (int bit = level - 1; bit >= 0; --bit) {
      const int o = static_cast<int>(((grid[0] >> bit) & 1u) |
                                     (((grid[1] >> bit) & 1u) << 1) |
                                     (((grid[2] >> bit) & 1u) << 2));
      k = k * 8 + static_cast<unsigned>(o);
    }
    return k;
  }
};

namespace detail {
// Octant picked purely by sign against the split planes; no containment
// check, so it stays usable at depths where the box side drops below the
// rounding error of the box bounds themselves.
inline int octant_of(const Vec3& center, const Vec3& point) {
  return (point.x() >= center.x() ? 1 : 0) |
         (point.y() >= center.y() ? 2 : 0) |
         (point.z() >= center.z() ? 4 : 0);
}
}  // namespace detail

// Child octant of `point` within `box`: bit 0 from x, bit 1 from y, bit 2
// from z; a coordinate exactly on the splitting plane goes to the upper
// octant. The point must lie in the closed box.
inline int point_to_octant(const OctreeBox& box, const Vec3& point) {
  const Vec3 lo = box.lower(), hi = box.upper();
  for (int axis = 0; axis < 3; ++axis)
    if (point[axis] < lo[axis] || point[axis] > hi[axis])
      throw ContractError("point_to_octant: point outside box on axis " +
                          std::to_string(axis));
  return detail::octant_of(box.center(), point);
}

// Leveled octree over normalized nodes: the root [-1/2,1/2]^3 holds all
// indices, and any box holding more than `capacity` nodes is split into its
// nonempty octants, so leaf levels vary across the domain. Boxes are stored
// level-major, each level sorted by path index.
struct Octree {
  std::vector<OctreeBox> boxes;
  std::vector<std::vector<int>> level_boxes;  // per level: flat box indices
  int finest_level = 0;
  int capacity = 1;
  std::uint64_t node_touches = 0;  // node-to-box assignments, for cost checks

  const OctreeBox& box(int id) const { return boxes[id]; }
  int level_count() const { return finest_level + 1; }
};

inline Octree build_octree(const NodeSet& normalized, int capacity) {
  if (capacity < 1)
    throw ConfigError("octree: capacity must be >= 1, got " +
                      std::to_string(capacity));
  const int n = normalized.size();
  if (n == 0) throw DataError("octree: empty node set");
  for (int i = 0; i < n; ++i)
    if (normalized.points[i].cwiseAbs().maxCoeff() > 0.5)
      throw ContractError("octree: node " + std::to_string(i) +
                          " outside the root cube; normalize first");

  constexpr int kLevelCap = 64;

  Octree tree;
  tree.capacity = capacity;
  OctreeBox root;
  root.nodes.resize(n);
  for (int i = 0; i < n; ++i) root.nodes[i] = i;
  tree.boxes.push_back(std::move(root));
  tree.level_boxes.push_back({0});
  tree.node_touches = static_cast<std::uint64_t>(n);

  for (int level = 0; !tree.level_boxes[level].empty(); ++level) {
    std::vector<int> next;
    for (int id : tree.level_boxes[level]) {
      if (static_cast<int>(tree.boxes[id].nodes.size()) <= capacity) continue;
      if (level + 1 > kLevelCap)
        throw DataError("octree: depth cap " + std::to_string(kLevelCap) +
                        " exceeded; nodes are (nearly) coincident");
      std::array<std::vector<int>, 8> parts;
      const Vec3 split = tree.boxes[id].center();
      for (int node : tree.boxes[id].nodes)
        parts[detail::octant_of(split, normalized.points[node])].push_back(node);
      for (int o = 0; o < 8; ++o) {
        if (parts[o].empty()) continue;
        OctreeBox child;
        child.level = level + 1;
        const OctreeBox& pb = tree.boxes[id];
        child.grid = {pb.grid[0] * 2 + ((o >> 0) & 1),
                      pb.grid[1] * 2 + ((o >> 1) & 1),
                      pb.grid[2] * 2 + ((o >> 2) & 1)};
        child.parent = id;
        tree.node_touches += parts[o].size();
        child.nodes = std::move(parts[o]);
        const int child_id = static_cast<int>(tree.boxes.size());
        tree.boxes.push_back(std::move(child));
        tree.boxes[id].children[o] = child_id;
        next.push_back(child_id);
      }
    }
    if (next.empty()) break;
    tree.level_boxes.push_back(std::move(next));
  }
  tree.finest_level = static_cast<int>(tree.level_boxes.size()) - 1;
  return tree;
}

// Axis-aligned gap distance between two boxes (0 when they touch/overlap).
inline double box_gap_distance(const OctreeBox& a, const OctreeBox& b) {
  const Vec3 alo = a.lower(), ahi = a.upper();
  const Vec3 blo = b.lower(), bhi = b.upper();
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double g = std::max({0.0, blo[c] - ahi[c], alo[c] - bhi[c]});
    s += g * g;
  }
  return std::sqrt(s);
}

// Same-level adjacency: cells sharing a face, edge, or corner, i.e. integer
// coordinates differing by at most one on every axis (and not the same box).
inline bool boxes_adjacent(const OctreeBox& a, const OctreeBox& b) {
  if (a.level != b.level) return false;
  bool same = true;
  for (int c = 0; c < 3; ++c) {
    const std::uint64_t d =
        a.grid[c] > b.grid[c] ? a.grid[c] - b.grid[c] : b.grid[c] - a.grid[c];
    if (d > 1) return false;
    if (d != 0) same = false;
  }
  return !same;
}

}  // namespace hbrbf
