#pragma once

#include <stdexcept>
#include <string>

namespace isacsim {

/// Scenario file problems: parse failures and invariant violations.
/// The message names the offending field and the violated bound.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

/// A UAV sits exactly on the target (zero range) or another geometric
/// degeneracy that makes a measurement undefined.
class GeometryError : public std::runtime_error {
 public:
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

/// A theoretically SPD matrix failed its Cholesky pivot test.
class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

/// Optimization subproblem has no feasible point (reported with the
/// violated constraint set) or required bounds cannot be met.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace isacsim
