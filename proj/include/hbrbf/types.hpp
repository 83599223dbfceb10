#pragma once

#include <Eigen/Core>

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hbrbf {

using Vec3 = Eigen::Vector3d;

// Error taxonomy. ConfigError marks unusable options or arguments (the CLI
// maps it to exit code 2); DataError marks defective input data; NumericError
// marks breakdowns detected while computing (singular systems, indefinite
// blocks, non-convergence); ContractError marks violated internal
// preconditions and always indicates a caller bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

// A finite set of interpolation nodes in R^3 with optional per-node data
// values. Points must be pairwise distinct (exact coordinate match is
// rejected); values are either absent or one per node.
struct NodeSet {
  std::vector<Vec3> points;
  std::vector<double> values;  // empty or points.size() entries

  int size() const { return static_cast<int>(points.size()); }
  bool has_values() const { return !values.empty(); }

  // Returns the first duplicate pair (i, j), i < j, scanning left to right,
  // or (-1, -1) if all points are distinct.
  std::pair<int, int> find_duplicate() const {
    std::map<std::array<double, 3>, int> seen;
    for (int j = 0; j < size(); ++j) {
      // +0.0 folds -0.0 and 0.0 onto the same key.
      std::array<double, 3> key = {points[j].x() + 0.0, points[j].y() + 0.0,
                                   points[j].z() + 0.0};
      auto [it, inserted] = seen.emplace(key, j);
      if (!inserted) return {it->second, j};
    }
    return {-1, -1};
  }

  // Throws DataError naming the first duplicate index pair, or on a
  // value-count mismatch.
  void validate() const {
    if (!values.empty() && values.size() != points.size())
      throw DataError("NodeSet: " + std::to_string(values.size()) +
                      " values for " + std::to_string(points.size()) +
                      " points");
    auto [i, j] = find_duplicate();
    if (i >= 0)
      throw DataError("NodeSet: duplicate points at indices " +
                      std::to_string(i) + " and " + std::to_string(j));
  }
};

}  // namespace hbrbf
