#include "sbl/experiment.hpp"

#include <chrono>
#include <cmath>

#include "sbl/report_io.hpp"

namespace sbl {

std::string to_string(Method m) {
  switch (m) {
    case Method::bilevel: return "bilevel";
    case Method::grid: return "grid";
    case Method::bayes: return "bayes";
  }
  return "unknown";
}

Method parse_method(const std::string& text) {
  if (text == "bilevel") return Method::bilevel;
  if (text == "grid") return Method::grid;
  if (text == "bayes") return Method::bayes;
  throw ContractError("unknown method '" + text + "'");
}

std::string regularizer_tag(const RegularizerSpec& regs) {
  if (regs.smooth_terms.empty()) return format_double(regs.p);
  return regs.p == 1.0 ? "EN" : "EN" + format_double(regs.p);
}

double mean_loss(const BoundLoss& loss, const Vector& w) {
  require(loss.samples() > 0, "mean loss over an empty split");
  return loss.value(w) / static_cast<double>(loss.samples());
}

bool violates_optimality(double cond, Eigen::Index n) {
  return cond > 1e-3 * std::sqrt(static_cast<double>(n));
}

ExperimentRecord make_record(Method method, const Dataset& data,
                             const BilevelProblem& problem, const Vector& w,
                             const Vector& lambda, double zero_threshold) {
  ExperimentRecord rec;
  rec.method = method;
  rec.reg_tag = regularizer_tag(problem.regularizers);
  const BoundLoss test({problem.upper.kind()}, data.test.features,
                       data.test.targets);
  rec.err_te = mean_loss(test, w);
  rec.err_val = mean_loss(problem.upper, w);
  rec.sparsity = sparsity(w, zero_threshold);
  rec.cond = cond_metric(problem, w, lambda);
  rec.n = problem.dims();
  rec.flagged = violates_optimality(rec.cond, rec.n);
  rec.lambda = lambda;
  return rec;
}

ExperimentOutcome run_experiment(const Dataset& data, LossSpec loss,
                                 const RegularizerSpec& regs, Method method,
                                 const MethodConfigs& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentOutcome out;
  out.problem = make_problem(data, loss, regs);
  const BilevelProblem& problem = out.problem;

  Vector lambda;
  std::string status = "ok";
  if (method == Method::bilevel) {
    DriverResult dr = run_bilevel(problem, cfg.driver);
    out.w = dr.w_star;
    lambda = dr.lambda_star;
    out.report = dr.report;
    if (!dr.terminated_normally()) status = to_string(dr.reason);
    out.driver = std::move(dr);
  } else {
    BaselineResult br;
    if (method == Method::grid) {
      const GridSpec grid = cfg.grid.size() ? cfg.grid : default_grid(regs);
      br = grid_search(problem, grid, cfg.lower);
    } else {
      br = bayes_opt(problem, cfg.bo, cfg.lower);
      if (br.fell_back) status = "random_fallback";
    }
    if (!br.converged) status = "lower_not_converged";
    const ActiveSet active = ActiveSet::classify(br.w, cfg.zero_threshold);
    out.w = zero_active(br.w, active);
    lambda = br.lambda;
    out.report = sbkkt_residual_recovered(problem, out.w, lambda, active);
    out.baseline = std::move(br);
  }

  out.record = make_record(method, data, problem, out.w, lambda,
                           cfg.zero_threshold);
  out.record.status = status;
  out.record.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

}  // namespace sbl
