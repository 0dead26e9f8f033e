#pragma once

#include <optional>
#include <string>

#include "sbl/bayes_opt.hpp"
#include "sbl/dataset.hpp"
#include "sbl/driver.hpp"
#include "sbl/grid_search.hpp"
#include "sbl/lower_solver.hpp"
#include "sbl/problem.hpp"

namespace sbl {

enum class Method { bilevel, grid, bayes };

std::string to_string(Method m);
Method parse_method(const std::string& text);

/// "1", "0.8", "0.5" for plain l_p; "EN" for the elastic net with p = 1,
/// "EN0.5" etc. otherwise.
std::string regularizer_tag(const RegularizerSpec& regs);

/// Per-run metrics in the layout of the comparison table.
struct ExperimentRecord {
  Method method = Method::bilevel;
  std::string reg_tag;
  double err_te = 0.0;
  double err_val = 0.0;
  double wall_time_s = 0.0;
  double sparsity = 0.0;
  double cond = 0.0;
  /// cond > 1e-3 sqrt(n).
  bool flagged = false;
  Vector lambda;
  Eigen::Index n = 0;
  /// "ok", or why the method did not finish cleanly.
  std::string status = "ok";
  std::uint64_t seed = 0;
};

/// sum of losses / samples.
double mean_loss(const BoundLoss& loss, const Vector& w);

/// The optimality-violation flag: cond > 1e-3 sqrt(n).
bool violates_optimality(double cond, Eigen::Index n);

struct MethodConfigs {
  DriverConfig driver;
  /// Empty: the default grid for the regularizer.
  GridSpec grid;
  BOConfig bo;
  LowerSolveOptions lower;
  double zero_threshold = 1e-4;
};

struct ExperimentOutcome {
  ExperimentRecord record;
  BilevelProblem problem;
  /// Final weights (entries under the zero threshold set to 0).
  Vector w;
  SBKKTReport report;
  std::optional<DriverResult> driver;
  std::optional<BaselineResult> baseline;
};

/// Runs one method on one dataset and fills in the record; the test loss
/// uses the same loss kind as f.
ExperimentOutcome run_experiment(const Dataset& data, LossSpec loss,
                                 const RegularizerSpec& regs, Method method,
                                 const MethodConfigs& cfg);

/// Record metrics for weights `w` at hyperparameters `lambda`.
ExperimentRecord make_record(Method method, const Dataset& data,
                             const BilevelProblem& problem, const Vector& w,
                             const Vector& lambda, double zero_threshold);

}  // namespace sbl
