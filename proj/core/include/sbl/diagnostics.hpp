#pragma once

#include <span>
#include <vector>

#include "sbl/iterate.hpp"
#include "sbl/problem.hpp"

namespace sbl {

struct DiagnosticsOptions {
  /// Fraction of the trace treated as its tail for the liminf estimate.
  double tail_fraction = 0.25;
  /// A1 holds when the tail minimum of lambda_1 exceeds this.
  double a1_threshold = 1e-6;
  /// A2 holds when every ||(w^k, lambda^k)|| stays below this.
  double a2_bound = 1e8;
  /// A3 holds when every margin exceeds this.
  double a3_tolerance = 1e-6;
  /// A4 holds when the smallest singular value exceeds this.
  double a4_rank_tolerance = 1e-8;
  double zero_threshold = 1e-4;
};

/// Advisory checks of the convergence assumptions on a run:
///   A1  liminf lambda_1^k > 0
///   A2  {(w^k, lambda^k)} bounded
///   A3  (p = 1) lambda_1* != |dG/dw_i| on the zero set of w*
///   A4  LICQ of the active-constraint gradients at (w*, lambda*)
struct AssumptionReport {
  double a1_tail_min = 0.0;
  double a1_margin = 0.0;
  bool a1_ok = false;

  double a2_max_norm = 0.0;
  bool a2_ok = false;

  bool a3_applicable = false;
  std::vector<double> a3_margins;  // one per zero index of w*
  bool a3_ok = true;

  double a4_min_singular_value = 0.0;
  Eigen::Index a4_columns = 0;
  bool a4_ok = false;
};

AssumptionReport assumption_diagnostics(std::span<const IterateState> trace,
                                        const BilevelProblem& problem,
                                        const DiagnosticsOptions& opts = {});

/// Columns: grad Phi_i (i off the zero set), e_i (i on the zero set),
/// e_{n+j} (lambda_j = 0), all in R^{n+r}, where
///   Phi_i = dG/dw_i + p sgn(w_i) lambda_1 |w_i|^(p-1).
Matrix licq_matrix(const BilevelProblem& problem, const Vector& w,
                   const Vector& lambda, const ActiveSet& active);

}  // namespace sbl
