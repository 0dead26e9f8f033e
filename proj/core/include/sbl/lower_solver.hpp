#pragma once

#include "sbl/lower_newton.hpp"
#include "sbl/problem.hpp"
#include "sbl/stationarity.hpp"

namespace sbl {

struct LowerSolveOptions {
  double mu0 = 1.0;
  double beta1 = 0.95;
  /// Support identification is attempted once mu falls to this level.
  double mu_stop = 1e-5;
  /// Continuation gives up below this.
  double mu_min = 1e-12;
  double zero_threshold = 1e-4;
  /// p = 1: coordinates with |w_i| <= support_factor * mu are also tried
  /// as zeros. p < 1 uses the smoothed objective's inflection point
  /// mu / sqrt(1 - p) instead.
  double support_factor = 1e3;
  double stationarity_tol = 1e-6;
  NewtonOptions newton;
};

void validate(const LowerSolveOptions& opts);

struct LowerResult {
  Vector w;
  StationarityCheck check;
  /// False when no candidate passed the stationarity check; w is then the
  /// candidate with the smallest margin.
  bool converged = false;
  int continuation_steps = 0;
};

/// Stationary point of G(w, lambda_bar) + lambda_1 ||w||_p^p for fixed
/// lambda: Newton continuation on the smoothed objective (mu_{k+1} =
/// beta1 mu_k), then a support-restricted Newton solve of the exact
/// objective, accepted once subdiff_stationarity holds. For p < 1 the
/// support is then pruned while doing so lowers the objective.
LowerResult solve_lower(const BilevelProblem& problem, const Vector& lambda,
                        const Vector& start, const LowerSolveOptions& opts = {});

/// Exact-objective Newton solve on the support identified from a smoothed
/// solution w at smoothing level mu; candidates whose zero set also covers
/// the coordinates within the smoothing scale are tried first.
LowerResult polish_lower(const BilevelProblem& problem, const Vector& lambda,
                         const Vector& w, double mu,
                         const LowerSolveOptions& opts = {});

}  // namespace sbl
