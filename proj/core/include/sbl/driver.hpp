#pragma once

#include <string>
#include <vector>

#include "sbl/inner_solver.hpp"
#include "sbl/iterate.hpp"
#include "sbl/problem.hpp"
#include "sbl/stationarity.hpp"

namespace sbl {

enum class InnerToleranceMode {
  /// eps_hat_k = beta2^k eps_hat_0 (floored at eps_hat_floor).
  faithful,
  /// A fixed inner tolerance at every outer iteration.
  fixed,
};

struct DriverConfig {
  double mu0 = 1.0;
  double beta1 = 0.95;
  double eps_hat0 = 1e-2;
  double beta2 = 0.9;
  double eps_hat_floor = 1e-10;
  InnerToleranceMode tolerance_mode = InnerToleranceMode::fixed;
  double fixed_inner_tolerance = 1e-6;
  /// Defaults to 10 for every hyperparameter when empty.
  Vector lambda0;
  /// Defaults to the zero vector when empty.
  Vector w0;
  double stop_epsilon = 1e-5;
  int max_outer = 400;
  double zero_threshold = 1e-4;
  /// Graceful stop between outer iterations once exceeded.
  double time_budget_s = 27000.0;
  InnerConfig inner;
};

void validate(const DriverConfig& cfg, const BilevelProblem& problem);

enum class StopReason {
  /// Scaled SB-KKT blocks 1-3 within stop_epsilon.
  sbkkt,
  /// max(||lambda^{k+1} - lambda^k||, mu_{k+1}) <= stop_epsilon.
  stabilized,
  max_outer,
  time_budget,
  /// Two consecutive inner solves failed.
  inner_failure,
};

std::string to_string(StopReason reason);

struct DriverResult {
  IterateState final;
  std::vector<IterateState> trace;  // trace[0] is the starting point
  /// Estimate of the limit point: the exact lower-level solution on the
  /// support of the final iterate when that solve succeeds (`refined`),
  /// otherwise the final iterate with entries under the zero threshold set
  /// to 0.
  Vector w_star;
  /// Hyperparameters paired with w_star.
  Vector lambda_star;
  bool refined = false;
  SBKKTReport report;
  StopReason reason = StopReason::max_outer;
  double wall_seconds = 0.0;

  bool terminated_normally() const {
    return reason == StopReason::sbkkt || reason == StopReason::stabilized;
  }
};

/// Smoothing continuation for the bilevel problem: at each outer step find
/// an eps_hat_k-approximate KKT point of the smoothed one-level problem with
/// mu = mu_k (warm-started from the previous quadruple), then shrink
/// mu_{k+1} = beta1 mu_k and eps_hat_{k+1} = beta2 eps_hat_k.
DriverResult run_bilevel(const BilevelProblem& problem,
                         const DriverConfig& cfg = {});

/// |{i : |w_i| <= tau max_j |w_j|}| / n.
double sparsity(const Vector& w, double tau = 1e-4);

/// cond = ||W grad_w G + p lambda_1 |w|^p||_2.
double cond_metric(const BilevelProblem& problem, const Vector& w,
                   const Vector& lambda);

/// One row of the per-iteration trace export.
struct TraceRow {
  int k = 0;
  double mu = 0.0;
  double lambda_change = 0.0;
  double cond = 0.0;
  double sparsity = 0.0;
  double upper_value = 0.0;
  Vector lambda;
};

std::vector<TraceRow> trace_rows(const BilevelProblem& problem,
                                 const std::vector<IterateState>& trace,
                                 double zero_threshold = 1e-4);

}  // namespace sbl
