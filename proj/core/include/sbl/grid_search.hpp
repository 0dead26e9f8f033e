#pragma once

#include <vector>

#include "sbl/lower_solver.hpp"
#include "sbl/problem.hpp"

namespace sbl {

/// Candidate values per hyperparameter; the grid is their Cartesian product.
struct GridSpec {
  std::vector<std::vector<double>> axes;

  std::size_t size() const;
  /// Points in row-major order (last axis fastest).
  std::vector<Vector> points() const;
};

/// 10^(lo + (hi - lo) i / (count - 1)), i = 0..count-1 (count = 1 gives 10^lo).
std::vector<double> log_grid(double lo_exponent, double hi_exponent, int count);

/// 30 log-uniform values from 1e-4 to 1e4 for lambda_1.
GridSpec default_lp_grid();
/// lambda_1 in {1e-4, 1e-2, 1, 1e2, 1e4} x lambda_2 in 10^(-4 + 8i/5), i = 0..5.
GridSpec default_elastic_net_grid();
/// The default grid matching the regularizer's hyperparameter count.
GridSpec default_grid(const RegularizerSpec& regs);

/// Mean upper loss f(w) / (validation samples).
double validation_error(const BilevelProblem& problem, const Vector& w);

struct Evaluated {
  Vector lambda;
  Vector w;
  double err_val = 0.0;
  bool converged = false;
};

struct BaselineResult {
  Vector lambda;
  Vector w;
  double err_val = 0.0;
  bool converged = false;
  /// Every evaluation in the order performed.
  std::vector<Evaluated> history;
  /// BO only: the GP could not be used and points were drawn at random.
  bool fell_back = false;
};

/// Evaluates every grid point (solve_lower from w = 0) and returns the
/// converged point with the least validation error; ties go to the
/// lexicographically smaller lambda. Throws ContractError if the grid is
/// empty or has the wrong arity, std::runtime_error if nothing converged.
BaselineResult grid_search(const BilevelProblem& problem, const GridSpec& grid,
                           const LowerSolveOptions& lower = {});

/// Orders (err_val, lambda) pairs as grid_search does.
bool preferred(double err_a, const Vector& lambda_a, double err_b,
               const Vector& lambda_b);

}  // namespace sbl
