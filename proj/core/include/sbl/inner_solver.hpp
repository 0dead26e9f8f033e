#pragma once

#include <functional>

#include "sbl/lower_newton.hpp"
#include "sbl/problem.hpp"
#include "sbl/smoothing.hpp"
#include "sbl/stationarity.hpp"

namespace sbl {

struct InnerConfig {
  int max_iterations = 5000;
  /// eps_hat: the target for ||(eps_1, ..., eps_5)||.
  double kkt_tolerance = 1e-6;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
  /// Relative finite-difference step for the reduced Hessian in lambda.
  double fd_step = 1e-6;
  /// Diagonal shift added when the adjoint system is singular.
  double singular_shift = 1e-10;
  NewtonOptions restoration;
};

void validate(const InnerConfig& cfg);

struct InnerTraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double constraint_norm = 0.0;
  double residual_norm = 0.0;
};

using InnerTraceCallback = std::function<void(const InnerTraceEntry&)>;

struct InnerResult {
  Vector w;
  Vector lambda;
  Multipliers mult;
  ApproxKKTResidual residual;
  int iterations = 0;
  bool converged = false;
};

/// Finds an eps_hat-approximate KKT point of the smoothed one-level problem
///
///   min_{w,lambda} f(w)  s.t.  grad_w G(w, lambda_bar) + lambda_1 grad
///   phi_mu(w) = 0,  lambda >= 0
///
/// for fixed mu. The equality constraint is kept satisfied by a Newton
/// restoration in w, zeta comes from the adjoint system of the constraint
/// Jacobian, and lambda moves by projected Newton steps on the reduced
/// objective lambda -> f(w(lambda)) with a finite-difference curvature
/// model. The result is certified by approx_kkt_residual.
InnerResult solve_inner(const BilevelProblem& problem,
                        const SmoothingParams& sp, const Vector& w_start,
                        const Vector& lambda_start, const InnerConfig& cfg,
                        const InnerTraceCallback& trace = {});

}  // namespace sbl
