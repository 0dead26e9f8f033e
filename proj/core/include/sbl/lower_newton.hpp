#pragma once

#include <vector>

#include "sbl/problem.hpp"
#include "sbl/types.hpp"

namespace sbl {

struct NewtonOptions {
  int max_iterations = 200;
  /// Newton steps taken even when the start already meets grad_tolerance.
  int min_iterations = 0;
  /// Converged when ||grad||_inf <= grad_tolerance.
  double grad_tolerance = 1e-10;
  /// Accepted instead when steps stall at roundoff level.
  double stall_grad_tolerance = 1e-7;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
};

struct NewtonResult {
  Vector w;
  double value = 0.0;
  Vector grad;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton on the smoothed lower-level objective
///
///   L(w) = G(w, lambda_bar) + lambda_1 phi_mu(w),   mu > 0,
///
/// with a shifted Hessian whenever the exact one is not positive definite,
/// so every accepted step decreases L. Returns a point with grad L ~ 0.
NewtonResult minimize_smoothed_lower(const BilevelProblem& problem,
                                     const Vector& lambda, double mu,
                                     const Vector& start,
                                     const NewtonOptions& opts = {});

/// Same method on the exact (unsmoothed) objective G + lambda_1 ||w||_p^p
/// restricted to the coordinates with `free[i] == true`; the others are
/// held at zero. Steps that would move a free coordinate across zero are
/// shortened so it stays on its side.
NewtonResult minimize_restricted_lower(const BilevelProblem& problem,
                                       const Vector& lambda,
                                       const Vector& start,
                                       const std::vector<bool>& free,
                                       const NewtonOptions& opts = {});

}  // namespace sbl
