#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sbl/problem.hpp"

namespace sbl::detail {

/// A separable term standing in for R_1 on a coordinate subset: its first,
/// second and third derivatives, coordinate-wise.
struct SeparableTerm {
  std::function<Vector(const Vector&)> d1;
  std::function<Vector(const Vector&)> d2;
  std::function<Vector(const Vector&)> d3;
  /// Coordinates whose sign must not change during the iteration.
  bool keep_signs = false;
};

/// (w, lambda, zeta) with w and zeta on the working coordinates only.
struct KKTPoint {
  Vector w;
  Vector lambda;
  Vector zeta;
};

struct KKTSystem {
  const BilevelProblem* problem = nullptr;
  SeparableTerm term;
  /// Working coordinates of w; the others stay at 0.
  std::vector<Eigen::Index> coords;
  /// Hyperparameters that move; the others are held where they are.
  std::vector<int> free_lambda;

  Vector embed(const Vector& w_sub) const;

  /// Stationarity of the one-level problem on the working coordinates:
  ///   grad f + (hess G + lambda_1 diag(d2)) zeta,
  ///   d1' zeta and grad R_l' zeta for free hyperparameters,
  ///   grad G + lambda_1 d1.
  Vector residual(const KKTPoint& z) const;
};

/// Damped Newton on KKTSystem::residual. Returns the point once the
/// residual norm is <= target.
std::optional<KKTPoint> kkt_newton(const KKTSystem& sys, KKTPoint z,
                                   double target, int max_steps);

}  // namespace sbl::detail
