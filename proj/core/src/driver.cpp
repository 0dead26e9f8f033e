#include "sbl/driver.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <utility>

#include "sbl/lower_solver.hpp"
#include "kkt_newton.hpp"

namespace sbl {

void validate(const DriverConfig& cfg, const BilevelProblem& problem) {
  problem.validate();
  require(cfg.mu0 != 0.0 && std::isfinite(cfg.mu0), "mu0 must be nonzero");
  require(cfg.beta1 > 0.0 && cfg.beta1 < 1.0, "beta1 must be in (0, 1)");
  require(cfg.beta2 > 0.0 && cfg.beta2 < 1.0, "beta2 must be in (0, 1)");
  require(cfg.eps_hat0 >= 0.0, "eps_hat0 must be >= 0");
  require(cfg.eps_hat_floor > 0.0, "eps_hat_floor must be positive");
  require(cfg.fixed_inner_tolerance > 0.0,
          "fixed_inner_tolerance must be positive");
  require(cfg.stop_epsilon > 0.0, "stop_epsilon must be positive");
  require(cfg.max_outer > 0, "max_outer must be positive");
  require(cfg.zero_threshold >= 0.0, "zero_threshold must be >= 0");
  require(cfg.time_budget_s > 0.0, "time_budget_s must be positive");
  if (cfg.lambda0.size() != 0) {
    require(cfg.lambda0.size() == problem.r(), "lambda0 has the wrong length");
    require((cfg.lambda0.array() >= 0.0).all(), "lambda0 must be >= 0");
  }
  if (cfg.w0.size() != 0) {
    require(cfg.w0.size() == problem.dims(), "w0 has the wrong length");
    require(cfg.w0.allFinite(), "w0 must be finite");
  }
  validate(cfg.inner);
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::sbkkt: return "sbkkt";
    case StopReason::stabilized: return "stabilized";
    case StopReason::max_outer: return "max_outer";
    case StopReason::time_budget: return "time_budget";
    case StopReason::inner_failure: return "inner_failure";
  }
  return "unknown";
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double inner_tolerance(const DriverConfig& cfg, int k) {
  if (cfg.tolerance_mode == InnerToleranceMode::fixed) {
    return cfg.fixed_inner_tolerance;
  }
  return std::max(cfg.eps_hat_floor, cfg.eps_hat0 * std::pow(cfg.beta2, k));
}

double smoothing_at(const DriverConfig& cfg, int k) {
  return cfg.mu0 * std::pow(cfg.beta1, k);
}

bool better(const SBKKTReport& a, const SBKKTReport& b) {
  if (a.all_pass() != b.all_pass()) return a.all_pass();
  return a.worst() < b.worst();
}

// Solves the stationarity system of the unsmoothed one-level problem on the
// support of w (signs fixed), starting from (w, lambda, zeta). Accepted only
// when it stays close in lambda and the lower level stays stationary.
std::optional<std::pair<Vector, Vector>> limit_point(
    const BilevelProblem& problem, const Vector& w, const Vector& lambda,
    const Multipliers& mult, const LowerSolveOptions& lower) {
  const double p = problem.p();
  const int r = problem.r();
  detail::KKTSystem sys;
  sys.problem = &problem;
  auto powabs = [](const Vector& v, double e) {
    return v.cwiseAbs().array().pow(e).matrix().eval();
  };
  auto sgn = [](const Vector& v) {
    return v.unaryExpr([](double x) { return x > 0.0 ? 1.0 : -1.0; }).eval();
  };
  sys.term.d1 = [=](const Vector& v) {
    return Vector(p * sgn(v).cwiseProduct(powabs(v, p - 1.0)));
  };
  sys.term.d2 = [=](const Vector& v) {
    return Vector(p * (p - 1.0) * powabs(v, p - 2.0));
  };
  sys.term.d3 = [=](const Vector& v) {
    return Vector(p * (p - 1.0) * (p - 2.0) *
                  sgn(v).cwiseProduct(powabs(v, p - 3.0)));
  };
  sys.term.keep_signs = true;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) != 0.0) sys.coords.push_back(i);
  }
  for (int j = 0; j < r; ++j) {
    if (lambda(j) > 0.0 || mult.eta(j) <= 0.0) sys.free_lambda.push_back(j);
  }
  if (sys.coords.empty()) return std::nullopt;

  detail::KKTPoint z;
  z.w = Vector(static_cast<Eigen::Index>(sys.coords.size()));
  z.zeta = z.w;
  for (std::size_t a = 0; a < sys.coords.size(); ++a) {
    z.w(static_cast<Eigen::Index>(a)) = w(sys.coords[a]);
    z.zeta(static_cast<Eigen::Index>(a)) = mult.zeta(sys.coords[a]);
  }
  z.lambda = lambda;
  auto sol = detail::kkt_newton(sys, z, 1e-11, 50);
  if (!sol) return std::nullopt;
  if ((sol->lambda - lambda).norm() > 0.1 * (1.0 + lambda.norm())) {
    return std::nullopt;
  }
  Vector ws = sys.embed(sol->w);
  const ActiveSet active = ActiveSet::classify(ws, lower.zero_threshold);
  ws = zero_active(ws, active);
  if (!subdiff_stationarity(problem, ws, sol->lambda, active,
                            lower.stationarity_tol)
           .stationary) {
    return std::nullopt;
  }
  return std::pair{ws, sol->lambda};
}

}  // namespace

DriverResult run_bilevel(const BilevelProblem& problem,
                         const DriverConfig& cfg) {
  validate(cfg, problem);
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index n = problem.dims();
  const int r = problem.r();

  IterateState state;
  state.k = 0;
  state.w = cfg.w0.size() ? cfg.w0 : Vector(Vector::Zero(n));
  state.lambda = cfg.lambda0.size() ? cfg.lambda0 : Vector(Vector::Constant(r, 10.0));
  state.mult = Multipliers::zeros(n, r);
  state.mu = smoothing_at(cfg, 0);
  state.eps_hat = inner_tolerance(cfg, 0);

  DriverResult out;
  out.trace.push_back(state);
  out.reason = StopReason::max_outer;

  int consecutive_failures = 0;
  for (int k = 0; k < cfg.max_outer; ++k) {
    InnerConfig icfg = cfg.inner;
    icfg.kkt_tolerance = state.eps_hat;
    const SmoothingParams sp{std::abs(state.mu), problem.p()};

    const auto ti = std::chrono::steady_clock::now();
    InnerResult res = solve_inner(problem, sp, state.w, state.lambda, icfg);
    const double inner_seconds = seconds_since(ti);

    consecutive_failures = res.converged ? 0 : consecutive_failures + 1;

    IterateState next;
    next.k = k + 1;
    next.w = std::move(res.w);
    next.lambda = std::move(res.lambda);
    next.mult = std::move(res.mult);
    next.mu = smoothing_at(cfg, k + 1);
    next.eps_hat = inner_tolerance(cfg, k + 1);
    next.inner_iterations = res.iterations;
    next.inner_converged = res.converged;
    next.inner_seconds = inner_seconds;

    const double lambda_change = (next.lambda - state.lambda).norm();
    state = std::move(next);
    out.trace.push_back(state);

    if (consecutive_failures >= 2) {
      out.reason = StopReason::inner_failure;
      break;
    }

    // (a) scaled SB-KKT blocks 1-3 with the live multipliers.
    const ActiveSet active = ActiveSet::classify(state.w, cfg.zero_threshold);
    const SBKKTReport live =
        sbkkt_residual(problem, zero_active(state.w, active), state.lambda,
                       state.mult, active, {cfg.stop_epsilon});
    if (live.block_violation[0] <= cfg.stop_epsilon &&
        live.block_violation[1] <= cfg.stop_epsilon &&
        live.block_violation[2] <= cfg.stop_epsilon) {
      out.reason = StopReason::sbkkt;
      break;
    }
    // (b) hyperparameters and smoothing have both settled.
    if (std::max(lambda_change, std::abs(state.mu)) <= cfg.stop_epsilon) {
      out.reason = StopReason::stabilized;
      break;
    }
    if (seconds_since(t0) > cfg.time_budget_s) {
      out.reason = StopReason::time_budget;
      break;
    }
  }

  out.final = state;
  // Estimate of the limit point: the exact lower-level solution on the
  // support of the last iterate, or the truncated iterate if that fails.
  LowerSolveOptions lower;
  lower.zero_threshold = cfg.zero_threshold;
  const double last_mu = std::abs(out.trace.size() > 1
                                      ? out.trace[out.trace.size() - 2].mu
                                      : state.mu);
  LowerResult refined =
      polish_lower(problem, state.lambda, state.w, last_mu, lower);
  ActiveSet active = ActiveSet::classify(state.w, cfg.zero_threshold);
  out.w_star = zero_active(state.w, active);
  if (refined.converged) {
    out.w_star = refined.w;
    active = ActiveSet::classify(out.w_star, cfg.zero_threshold);
  }
  out.refined = refined.converged;
  out.lambda_star = state.lambda;
  const SBKKTReport live = sbkkt_residual(problem, out.w_star, state.lambda,
                                          state.mult, active, {cfg.stop_epsilon});
  const SBKKTReport recovered = sbkkt_residual_recovered(
      problem, out.w_star, state.lambda, active, {cfg.stop_epsilon});
  out.report = better(recovered, live) ? recovered : live;

  if (out.refined) {
    if (auto limit = limit_point(problem, out.w_star, state.lambda,
                                 recovered.mult, lower)) {
      const ActiveSet la = ActiveSet::classify(limit->first, cfg.zero_threshold);
      const SBKKTReport rep = sbkkt_residual_recovered(
          problem, limit->first, limit->second, la, {cfg.stop_epsilon});
      if (better(rep, out.report)) {
        out.w_star = limit->first;
        out.lambda_star = limit->second;
        out.report = rep;
      }
    }
  }
  out.wall_seconds = seconds_since(t0);
  return out;
}

double sparsity(const Vector& w, double tau) {
  if (w.size() == 0) return 0.0;
  const ActiveSet active = ActiveSet::classify(w, tau);
  return static_cast<double>(active.indices.size()) /
         static_cast<double>(w.size());
}

double cond_metric(const BilevelProblem& problem, const Vector& w,
                   const Vector& lambda) {
  return scaled_first_order_residual(problem, w, lambda).norm();
}

std::vector<TraceRow> trace_rows(const BilevelProblem& problem,
                                 const std::vector<IterateState>& trace,
                                 double zero_threshold) {
  std::vector<TraceRow> rows;
  rows.reserve(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const IterateState& s = trace[i];
    const Vector w = zero_active(s.w, ActiveSet::classify(s.w, zero_threshold));
    TraceRow row;
    row.k = s.k;
    row.mu = s.mu;
    row.lambda_change = i == 0 ? 0.0 : (s.lambda - trace[i - 1].lambda).norm();
    row.cond = cond_metric(problem, w, s.lambda);
    row.sparsity = sparsity(s.w, zero_threshold);
    row.upper_value = eval_f(problem, w, Order::value).value;
    row.lambda = s.lambda;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace sbl
