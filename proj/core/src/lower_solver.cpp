#include "sbl/lower_solver.hpp"

#include <cmath>
#include <limits>

namespace sbl {

void validate(const LowerSolveOptions& opts) {
  require(opts.mu0 > 0.0, "mu0 must be positive");
  require(opts.beta1 > 0.0 && opts.beta1 < 1.0, "beta1 must be in (0, 1)");
  require(opts.mu_stop > 0.0 && opts.mu_min > 0.0 && opts.mu_min <= opts.mu_stop,
          "need 0 < mu_min <= mu_stop");
  require(opts.mu_min >= kMinSmoothingMu, "mu_min below the smoothing floor");
  require(opts.zero_threshold >= 0.0, "zero_threshold must be >= 0");
  require(opts.support_factor >= 0.0, "support_factor must be >= 0");
  require(opts.stationarity_tol > 0.0, "stationarity_tol must be positive");
}

namespace {

struct Candidate {
  Vector w;
  StationarityCheck check;
};

Candidate assess(const BilevelProblem& problem, const Vector& lambda,
                 Vector w, double tau, double tol) {
  const ActiveSet active = ActiveSet::classify(w, tau);
  w = zero_active(w, active);
  StationarityCheck check = subdiff_stationarity(problem, w, lambda, active, tol);
  return {std::move(w), check};
}

// Exact-objective solve on the support {i : zero[i] == false}.
Candidate polish(const BilevelProblem& problem, const Vector& lambda,
                 const Vector& w, const std::vector<bool>& zero,
                 const LowerSolveOptions& opts) {
  Vector start = w;
  std::vector<bool> free(zero.size());
  for (std::size_t i = 0; i < zero.size(); ++i) {
    free[i] = !zero[i] && w(static_cast<Eigen::Index>(i)) != 0.0;
    if (!free[i]) start(static_cast<Eigen::Index>(i)) = 0.0;
  }
  NewtonResult nr;
  try {
    nr = minimize_restricted_lower(problem, lambda, start, free, opts.newton);
  } catch (const NumericalDomainError&) {
    return {start, {false, std::numeric_limits<double>::infinity(), -1}};
  }
  return assess(problem, lambda, nr.w, opts.zero_threshold,
                opts.stationarity_tol);
}

double lower_objective(const BilevelProblem& problem, const Vector& lambda,
                       const Vector& w) {
  return eval_G(problem, w, lambda_bar(lambda), Order::value).value +
         lambda(0) * lp_norm_p(w, problem.p());
}

// For p < 1 every zero coordinate is stationary, so a stationary point can
// sit in a shallow well next to a lower one with a smaller support. Zero the
// coordinate whose removal a diagonal quadratic model rates best, re-solve on
// the smaller support and keep the result while the objective drops.
void prune_support(const BilevelProblem& problem, const Vector& lambda,
                   LowerResult& out, const LowerSolveOptions& opts) {
  const double p = problem.p();
  const double lam1 = lambda(0);
  double best = lower_objective(problem, lambda, out.w);
  for (Eigen::Index pass = 0; pass < out.w.size(); ++pass) {
    const Evaluation e = eval_G(problem, out.w, lambda_bar(lambda));
    Eigen::Index pick = -1;
    double gain = 0.0;
    for (Eigen::Index i = 0; i < out.w.size(); ++i) {
      const double wi = out.w(i);
      if (wi == 0.0) continue;
      const double delta = -e.grad(i) * wi + 0.5 * e.hess(i, i) * wi * wi -
                           lam1 * std::pow(std::abs(wi), p);
      if (delta < gain) {
        gain = delta;
        pick = i;
      }
    }
    if (pick < 0) return;
    std::vector<bool> zero(static_cast<std::size_t>(out.w.size()));
    for (Eigen::Index i = 0; i < out.w.size(); ++i) {
      zero[static_cast<std::size_t>(i)] = out.w(i) == 0.0 || i == pick;
    }
    Candidate c = polish(problem, lambda, out.w, zero, opts);
    if (!c.check.stationary) return;
    const double value = lower_objective(problem, lambda, c.w);
    if (!(value < best)) return;
    best = value;
    out.w = std::move(c.w);
    out.check = c.check;
  }
}

}  // namespace

LowerResult polish_lower(const BilevelProblem& problem, const Vector& lambda,
                         const Vector& w, double mu,
                         const LowerSolveOptions& opts) {
  const Eigen::Index n = problem.dims();
  require(w.size() == n, "w has the wrong length");
  require(lambda.size() == problem.r(), "lambda has the wrong length");
  const double p = problem.p();
  const double scale =
      p < 1.0 ? mu / std::sqrt(1.0 - p) : opts.support_factor * mu;
  const double wmax = w.lpNorm<Eigen::Infinity>();
  std::vector<bool> relative(static_cast<std::size_t>(n));
  std::vector<bool> widened(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::abs(w(i));
    const auto k = static_cast<std::size_t>(i);
    relative[k] = a <= opts.zero_threshold * wmax;
    widened[k] = relative[k] || a <= scale;
  }

  LowerResult out;
  out.check.margin = std::numeric_limits<double>::infinity();
  auto keep = [&](Candidate c) {
    if (c.check.margin < out.check.margin || out.w.size() == 0) {
      out.w = std::move(c.w);
      out.check = c.check;
      out.converged = out.check.stationary;
    }
  };
  keep(polish(problem, lambda, w, widened, opts));
  if (!out.converged && widened != relative) {
    keep(polish(problem, lambda, w, relative, opts));
  }
  return out;
}

LowerResult solve_lower(const BilevelProblem& problem, const Vector& lambda,
                        const Vector& start, const LowerSolveOptions& opts) {
  validate(opts);
  problem.validate();
  const Eigen::Index n = problem.dims();
  require(lambda.size() == problem.r(), "lambda has the wrong length");
  require((lambda.array() >= 0.0).all(), "lambda must be >= 0");
  require(start.size() == n, "start has the wrong length");

  LowerResult out;
  out.check.margin = std::numeric_limits<double>::infinity();
  Vector w = start;
  double mu = opts.mu0;
  int steps = 0;
  for (;; mu *= opts.beta1) {
    ++steps;
    try {
      w = minimize_smoothed_lower(problem, lambda, mu, w, opts.newton).w;
    } catch (const NumericalDomainError&) {
      break;
    }
    if (mu <= opts.mu_stop || lambda(0) == 0.0) {
      LowerResult cand = polish_lower(problem, lambda, w, mu, opts);
      if (cand.check.margin < out.check.margin || out.w.size() == 0) {
        out = std::move(cand);
      }
      if (out.converged) break;
    }
    if (mu * opts.beta1 < opts.mu_min) break;
  }
  if (out.w.size() == 0) {
    Candidate c =
        assess(problem, lambda, w, opts.zero_threshold, opts.stationarity_tol);
    out.w = std::move(c.w);
    out.check = c.check;
    out.converged = c.check.stationary;
  }
  if (out.converged && problem.p() < 1.0 && lambda(0) > 0.0) {
    prune_support(problem, lambda, out, opts);
  }
  out.continuation_steps = steps;
  return out;
}

}  // namespace sbl
