#include "sbl/bayes_opt.hpp"

#include <array>
#include <cmath>
#include <algorithm>
#include <optional>
#include <random>
#include <stdexcept>

#include "sbl/gaussian_process.hpp"

namespace sbl {

void validate(const BOConfig& cfg) {
  require(cfg.initial >= 2, "BO initial design needs at least 2 points");
  require(cfg.budget >= cfg.initial, "BO budget must cover the initial design");
  require(cfg.box_lo < cfg.box_hi, "BO box must be nonempty");
  require(cfg.candidates >= 1, "BO needs at least one candidate");
  require(cfg.refinements >= 0, "BO refinements must be >= 0");
}

namespace {

double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double result = 0.0;
  double f = 1.0 / static_cast<double>(base);
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= static_cast<double>(base);
  }
  return result;
}

constexpr std::array<std::uint64_t, 12> kPrimes = {2,  3,  5,  7,  11, 13,
                                                   17, 19, 23, 29, 31, 37};

}  // namespace

BOResult bayes_opt_minimize(const std::function<double(const Vector&)>& objective,
                            Eigen::Index dims, const BOConfig& cfg) {
  validate(cfg);
  require(dims >= 1 && dims <= static_cast<Eigen::Index>(kPrimes.size()),
          "BO dimension out of range");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double width = cfg.box_hi - cfg.box_lo;

  BOResult out;
  auto record = [&](const Vector& x) {
    const double y = objective(x);
    out.xs.push_back(x);
    out.ys.push_back(y);
    if (out.incumbent.empty() || y < out.best_y) {
      out.best_y = y;
      out.best_x = x;
    }
    out.incumbent.push_back(out.best_y);
  };
  auto random_point = [&] {
    Vector x(dims);
    for (Eigen::Index d = 0; d < dims; ++d) x(d) = cfg.box_lo + width * unit(rng);
    return x;
  };

  // Halton design with a random Cranley-Patterson shift.
  Vector shift(dims);
  for (Eigen::Index d = 0; d < dims; ++d) shift(d) = unit(rng);
  for (int i = 0; i < cfg.initial; ++i) {
    Vector x(dims);
    for (Eigen::Index d = 0; d < dims; ++d) {
      const double u = radical_inverse(static_cast<std::uint64_t>(i + 1),
                                       kPrimes[static_cast<std::size_t>(d)]) +
                       shift(d);
      x(d) = cfg.box_lo + width * (u - std::floor(u));
    }
    record(x);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  while (static_cast<int>(out.xs.size()) < cfg.budget) {
    const auto m = static_cast<Eigen::Index>(out.xs.size());
    Matrix x(m, dims);
    Vector y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      x.row(i) = out.xs[static_cast<std::size_t>(i)].transpose();
      y(i) = out.ys[static_cast<std::size_t>(i)];
    }
    std::optional<GaussianProcess> gp;
    if (!out.fell_back && y.allFinite()) gp = GaussianProcess::fit(x, y);
    if (!gp) {
      out.fell_back = true;
      record(random_point());
      continue;
    }
    auto score = [&](const Vector& c) {
      const GPPrediction pr = gp->predict(c);
      return expected_improvement(pr.mean, pr.stddev, out.best_y);
    };
    Vector best_c = random_point();
    double best_s = score(best_c);
    for (int c = 1; c < cfg.candidates; ++c) {
      Vector cand = random_point();
      const double s = score(cand);
      if (s > best_s) {
        best_s = s;
        best_c = std::move(cand);
      }
    }
    double radius = 0.05 * width;
    for (int t = 0; t < cfg.refinements; ++t) {
      Vector cand = best_c;
      for (Eigen::Index d = 0; d < dims; ++d) {
        cand(d) = std::clamp(cand(d) + radius * normal(rng), cfg.box_lo,
                             cfg.box_hi);
      }
      const double s = score(cand);
      if (s > best_s) {
        best_s = s;
        best_c = std::move(cand);
      } else {
        radius *= 0.97;
      }
    }
    record(best_c);
  }
  return out;
}

BaselineResult bayes_opt(const BilevelProblem& problem, const BOConfig& cfg,
                         const LowerSolveOptions& lower) {
  validate(cfg);
  problem.validate();
  const Vector zero = Vector::Zero(problem.dims());
  BaselineResult out;
  bool found = false;
  auto objective = [&](const Vector& logl) {
    const Vector lambda = logl.unaryExpr([](double e) { return std::pow(10.0, e); });
    LowerResult lr = solve_lower(problem, lambda, zero, lower);
    Evaluated e{lambda, lr.w, validation_error(problem, lr.w), lr.converged};
    const double y = e.err_val;
    if (e.converged && (!found || preferred(e.err_val, e.lambda, out.err_val,
                                            out.lambda))) {
      found = true;
      out.lambda = e.lambda;
      out.w = e.w;
      out.err_val = e.err_val;
      out.converged = true;
    }
    out.history.push_back(std::move(e));
    return y;
  };
  const BOResult bo = bayes_opt_minimize(objective, problem.r(), cfg);
  out.fell_back = bo.fell_back;
  if (!found) {
    // Nothing converged: report the raw best, flagged as non-converged.
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.history.size(); ++i) {
      if (out.history[i].err_val < out.history[best].err_val) best = i;
    }
    out.lambda = out.history[best].lambda;
    out.w = out.history[best].w;
    out.err_val = out.history[best].err_val;
    out.converged = false;
  }
  return out;
}

}  // namespace sbl
