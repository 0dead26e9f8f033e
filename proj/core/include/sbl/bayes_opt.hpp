#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sbl/grid_search.hpp"
#include "sbl/lower_solver.hpp"

namespace sbl {

struct BOConfig {
  int budget = 30;
  /// Quasi-random initial design size.
  int initial = 5;
  std::uint64_t seed = 1;
  /// Search box per coordinate, in log10(lambda).
  double box_lo = -4.0;
  double box_hi = 4.0;
  /// Random candidates scored by expected improvement per step.
  int candidates = 2000;
  /// Local refinement trials around the best candidate.
  int refinements = 200;
};

void validate(const BOConfig& cfg);

struct BOResult {
  Vector best_x;
  double best_y = 0.0;
  std::vector<Vector> xs;
  std::vector<double> ys;
  /// Best value after each evaluation.
  std::vector<double> incumbent;
  bool fell_back = false;
};

/// Minimizes `objective` over the box [box_lo, box_hi]^dims with a GP
/// surrogate and expected improvement, using exactly cfg.budget
/// evaluations. Deterministic given cfg.seed.
BOResult bayes_opt_minimize(const std::function<double(const Vector&)>& objective,
                            Eigen::Index dims, const BOConfig& cfg);

/// Validation error of solve_lower(lambda) minimized over log10(lambda).
/// Non-converged lower-level solves still count against the budget; the
/// incumbent prefers converged points.
BaselineResult bayes_opt(const BilevelProblem& problem, const BOConfig& cfg = {},
                         const LowerSolveOptions& lower = {});

}  // namespace sbl
