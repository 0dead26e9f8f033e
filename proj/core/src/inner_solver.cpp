#include "sbl/inner_solver.hpp"

#include "kkt_newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace sbl {

void validate(const InnerConfig& cfg) {
  require(cfg.max_iterations > 0, "inner max_iterations must be positive");
  require(cfg.kkt_tolerance > 0.0, "inner kkt_tolerance must be positive");
  require(cfg.armijo > 0.0 && cfg.armijo < 1.0, "armijo must be in (0, 1)");
  require(cfg.backtrack > 0.0 && cfg.backtrack < 1.0,
          "backtrack must be in (0, 1)");
  require(cfg.max_backtracks > 0, "max_backtracks must be positive");
  require(cfg.fd_step > 0.0, "fd_step must be positive");
  require(cfg.singular_shift > 0.0, "singular_shift must be positive");
}

namespace {

// Everything the reduced-space method knows at one lambda.
struct Point {
  Vector w;
  Vector lambda;
  double objective = 0.0;      // f(w)
  double constraint = 0.0;     // ||grad_w G + lambda_1 grad phi||_inf
  bool feasible = false;       // restoration converged
  Vector zeta;
  Vector reduced_grad;         // d f(w(lambda)) / d lambda
  bool adjoint_ok = false;
};

class ReducedProblem {
 public:
  ReducedProblem(const BilevelProblem& problem, const SmoothingParams& sp,
                 const InnerConfig& cfg)
      : problem_{problem}, sp_{sp}, cfg_{cfg}, restoration_{cfg.restoration} {
    // A warm start inside the tolerance would otherwise leave w frozen
    // while lambda moves.
    restoration_.min_iterations = std::max(restoration_.min_iterations, 1);
  }

  // Restores feasibility in w for fixed lambda, starting from w_guess.
  Point at(const Vector& lambda, const Vector& w_guess) const {
    Point pt;
    pt.lambda = lambda;
    NewtonResult nr;
    try {
      nr = minimize_smoothed_lower(problem_, lambda, sp_.mu, w_guess,
                                   restoration_);
    } catch (const NumericalDomainError&) {
      pt.w = w_guess;
      return pt;
    }
    pt.w = std::move(nr.w);
    pt.constraint = nr.grad.lpNorm<Eigen::Infinity>();
    pt.feasible = nr.converged;
    pt.objective = eval_f(problem_, pt.w, Order::value).value;
    return pt;
  }

  // Point at (w, lambda) as given, without restoration.
  Point as_is(const Vector& w, const Vector& lambda) const {
    Point pt;
    pt.w = w;
    pt.lambda = lambda;
    const Vector c = constraint(w, lambda);
    pt.constraint = c.lpNorm<Eigen::Infinity>();
    pt.feasible = true;
    pt.objective = eval_f(problem_, w, Order::value).value;
    return pt;
  }

  // zeta from the adjoint system J zeta = -grad f, J = hess_ww G + lambda_1
  // hess phi (symmetric), and the reduced gradient J_lambda' zeta.
  void adjoint(Point& pt) const {
    const Evaluation G =
        eval_G(problem_, pt.w, lambda_bar(pt.lambda), Order::hessian);
    Matrix j = G.hess;
    j.diagonal() += pt.lambda(0) * phi_hess_diag(pt.w, sp_);
    const Vector rhs = -eval_f(problem_, pt.w).grad;

    auto solve = [&](const Matrix& a) -> std::optional<Vector> {
      Eigen::PartialPivLU<Matrix> lu(a);
      Vector z = lu.solve(rhs);
      if (!z.allFinite()) return std::nullopt;
      z += lu.solve(rhs - a * z);  // one step of iterative refinement
      if (!z.allFinite()) return std::nullopt;
      const double scale = a.cwiseAbs().rowwise().sum().maxCoeff() *
                               z.lpNorm<Eigen::Infinity>() +
                           rhs.lpNorm<Eigen::Infinity>();
      if ((a * z - rhs).lpNorm<Eigen::Infinity>() > 1e-8 * scale) {
        return std::nullopt;
      }
      return z;
    };

    auto z = solve(j);
    if (!z) {
      Matrix shifted = j;
      const double d = std::max(1.0, j.diagonal().cwiseAbs().maxCoeff());
      shifted.diagonal().array() += cfg_.singular_shift * d;
      z = solve(shifted);
    }
    pt.adjoint_ok = z.has_value();
    if (!z) return;
    pt.zeta = std::move(*z);

    const int r = problem_.r();
    pt.reduced_grad.resize(r);
    pt.reduced_grad(0) = phi_grad(pt.w, sp_).dot(pt.zeta);
    if (r > 1) {
      pt.reduced_grad.tail(r - 1) =
          smooth_term_gradients(problem_, pt.w).transpose() * pt.zeta;
    }
  }

  Vector constraint(const Vector& w, const Vector& lambda) const {
    return eval_G(problem_, w, lambda_bar(lambda), Order::gradient).grad +
           lambda(0) * phi_grad(w, sp_);
  }

 private:
  const BilevelProblem& problem_;
  SmoothingParams sp_;
  const InnerConfig& cfg_;
  NewtonOptions restoration_;
};

// Bound multipliers minimizing (g_j - eta_j)^2 + (lambda_j eta_j)^2, eta >= 0.
Vector bound_multipliers(const Vector& grad, const Vector& lambda) {
  Vector eta(grad.size());
  for (Eigen::Index j = 0; j < grad.size(); ++j) {
    eta(j) = std::max(0.0, grad(j) / (1.0 + lambda(j) * lambda(j)));
  }
  return eta;
}

Vector projected_gradient(const Vector& grad, const Vector& lambda) {
  Vector pg(grad.size());
  for (Eigen::Index j = 0; j < grad.size(); ++j) {
    pg(j) = lambda(j) - std::max(0.0, lambda(j) - grad(j));
  }
  return pg;
}

// Projection onto lambda >= 0 that shrinks each coordinate by at most a
// factor of 10 per step; the bound itself is reached once lambda_j is
// negligible. Keeps a single step from jumping onto lambda = 0, where the
// lower-level solution may not be unique.
Vector project(const Vector& from, const Vector& to) {
  Vector out(to.size());
  for (Eigen::Index j = 0; j < to.size(); ++j) {
    const double floor = from(j) > 1e-12 ? 0.1 * from(j) : 0.0;
    out(j) = std::max(to(j), floor);
  }
  return out;
}

// Modified inverse-Hessian step on the free coordinates; nullopt when the
// curvature model is unusable.
std::optional<Vector> newton_step(const Matrix& h, const Vector& g) {
  if (!h.allFinite()) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  if (eig.info() != Eigen::Success) return std::nullopt;
  Vector ev = eig.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) return std::nullopt;
  ev = ev.cwiseAbs().cwiseMax(1e-10 * top);
  const Matrix& v = eig.eigenvectors();
  Vector d = -(v * (v.transpose() * g).cwiseQuotient(ev));
  if (!d.allFinite()) return std::nullopt;
  return d;
}

}  // namespace

InnerResult solve_inner(const BilevelProblem& problem,
                        const SmoothingParams& sp, const Vector& w_start,
                        const Vector& lambda_start, const InnerConfig& cfg,
                        const InnerTraceCallback& trace) {
  validate(cfg);
  validate(sp);
  if (!(sp.mu >= kMinSmoothingMu)) {
    throw NumericalDomainError("inner solver needs mu > 0");
  }
  const Eigen::Index n = problem.dims();
  const int r = problem.r();
  require(w_start.size() == n, "w_start has the wrong length");
  require(lambda_start.size() == r, "lambda_start has the wrong length");
  require((lambda_start.array() >= 0.0).all(), "lambda_start must be >= 0");

  const ReducedProblem rp(problem, sp, cfg);
  const double eps_hat = cfg.kkt_tolerance;

  auto certify = [&](const Point& pt, int iterations) {
    InnerResult out;
    out.w = pt.w;
    out.lambda = pt.lambda;
    out.mult.zeta = pt.adjoint_ok ? pt.zeta : Vector(Vector::Zero(n));
    out.mult.eta = pt.adjoint_ok ? bound_multipliers(pt.reduced_grad, pt.lambda)
                                 : Vector(Vector::Zero(r));
    out.residual = approx_kkt_residual(problem, out.w, out.lambda, out.mult, sp);
    out.iterations = iterations;
    out.converged = pt.adjoint_ok && out.residual.feasible &&
                    out.residual.norm <= eps_hat;
    return out;
  };

  auto emit = [&](int it, const Point& pt, double measure) {
    if (trace) trace({it, pt.objective, pt.constraint, measure});
  };

  // Last resort for points the reduced-space iteration cannot certify.
  auto finish = [&](InnerResult best_so_far, int iterations) {
    best_so_far.iterations = iterations;
    if (best_so_far.converged || best_so_far.mult.zeta.size() != n) {
      return best_so_far;
    }
    std::vector<int> free;
    for (int j = 0; j < r; ++j) {
      if (!(best_so_far.lambda(j) == 0.0 && best_so_far.mult.eta(j) > 0.0)) {
        free.push_back(j);
      }
    }
    detail::KKTSystem sys;
    sys.problem = &problem;
    sys.term = {[&](const Vector& w) { return phi_grad(w, sp); },
                [&](const Vector& w) { return phi_hess_diag(w, sp); },
                [&](const Vector& w) { return phi_third_diag(w, sp); }, false};
    for (Eigen::Index i = 0; i < n; ++i) sys.coords.push_back(i);
    sys.free_lambda = free;
    auto z = detail::kkt_newton(
        sys, {best_so_far.w, best_so_far.lambda, best_so_far.mult.zeta},
        0.1 * eps_hat, 50);
    if (!z) return best_so_far;
    InnerResult out;
    out.w = z->w;
    out.lambda = z->lambda;
    out.mult.zeta = z->zeta;
    out.mult.eta = Vector::Zero(r);
    const Vector dphi = phi_grad(out.w, sp);
    const Matrix dr = smooth_term_gradients(problem, out.w);
    for (int j = 0; j < r; ++j) {
      if (std::find(free.begin(), free.end(), j) != free.end()) continue;
      const Vector dc = j == 0 ? dphi : Vector(dr.col(j - 1));
      out.mult.eta(j) = std::max(0.0, dc.dot(out.mult.zeta));
    }
    out.residual =
        approx_kkt_residual(problem, out.w, out.lambda, out.mult, sp);
    out.iterations = iterations;
    out.converged = out.residual.feasible && out.residual.norm <= eps_hat;
    return out.residual.norm < best_so_far.residual.norm ? out : best_so_far;
  };

  // The stopping test precedes any step: a start that already satisfies the
  // approximate KKT system is returned untouched.
  {
    Point start = rp.as_is(w_start, lambda_start);
    rp.adjoint(start);
    if (start.adjoint_ok) {
      InnerResult out = certify(start, 0);
      if (out.converged) {
        emit(0, start, out.residual.norm);
        return out;
      }
    }
  }

  Point cur = rp.at(lambda_start, w_start);
  rp.adjoint(cur);
  InnerResult best = certify(cur, 0);

  double target = 0.5 * eps_hat;
  int failed_certifications = 0;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    if (!cur.feasible || !cur.adjoint_ok) break;

    const Vector pg = projected_gradient(cur.reduced_grad, cur.lambda);
    const double measure = std::hypot(pg.norm(), cur.constraint);
    emit(it - 1, cur, measure);

    if (pg.norm() <= target) {
      InnerResult out = certify(cur, it - 1);
      if (out.converged) return out;
      if (out.residual.norm < best.residual.norm) best = out;
      if (++failed_certifications > 6) break;
      target *= 0.1;
    }

    // Free set: coordinates not held at the bound by a positive gradient.
    const double eps_active = std::min(1e-12, pg.norm());
    std::vector<int> free;
    for (int j = 0; j < r; ++j) {
      if (!(cur.lambda(j) <= eps_active && cur.reduced_grad(j) > 0.0)) {
        free.push_back(j);
      }
    }

    // Finite-difference curvature of the reduced objective on the free set.
    std::optional<Vector> d_newton;
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Matrix h(nf, nf);
      bool ok = true;
      for (Eigen::Index a = 0; a < nf && ok; ++a) {
        const int j = free[static_cast<std::size_t>(a)];
        const double step = cfg.fd_step * std::max(1.0, cur.lambda(j));
        Vector lam = cur.lambda;
        lam(j) += step;
        Point probe = rp.at(lam, cur.w);
        if (!probe.feasible) {
          ok = false;
          break;
        }
        rp.adjoint(probe);
        if (!probe.adjoint_ok) {
          ok = false;
          break;
        }
        for (Eigen::Index b = 0; b < nf; ++b) {
          const int l = free[static_cast<std::size_t>(b)];
          h(b, a) = (probe.reduced_grad(l) - cur.reduced_grad(l)) / step;
        }
      }
      if (ok) {
        h = 0.5 * (h + h.transpose()).eval();
        Vector gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
          gf(a) = cur.reduced_grad(free[static_cast<std::size_t>(a)]);
        }
        if (auto df = newton_step(h, gf)) {
          Vector d = Vector::Zero(r);
          for (Eigen::Index a = 0; a < nf; ++a) {
            d(free[static_cast<std::size_t>(a)]) = (*df)(a);
          }
          d_newton = d;
        }
      }
    }

    auto line_search = [&](const Vector& d) -> std::optional<Point> {
      double alpha = 1.0;
      for (int b = 0; b < cfg.max_backtracks; ++b, alpha *= cfg.backtrack) {
        const Vector lam = project(cur.lambda, cur.lambda + alpha * d);
        const Vector disp = lam - cur.lambda;
        if (disp.lpNorm<Eigen::Infinity>() == 0.0) return std::nullopt;
        const double decrease = cur.reduced_grad.dot(disp);
        if (decrease >= 0.0) continue;
        Point trial = rp.at(lam, cur.w);
        if (!trial.feasible) continue;
        // Near a minimizer the predicted decrease drops below the resolution
        // of f; a smaller projected gradient is required instead.
        const double noise =
            64.0 * std::numeric_limits<double>::epsilon() *
            std::max(1.0, std::abs(cur.objective));
        if (-cfg.armijo * decrease >= noise) {
          if (trial.objective <= cur.objective + cfg.armijo * decrease) {
            return trial;
          }
        } else if (trial.objective <= cur.objective + noise) {
          rp.adjoint(trial);
          if (trial.adjoint_ok &&
              projected_gradient(trial.reduced_grad, trial.lambda).norm() <
                  (1.0 - cfg.armijo) * pg.norm()) {
            return trial;
          }
        }
      }
      return std::nullopt;
    };

    std::optional<Point> next;
    if (d_newton) next = line_search(*d_newton);
    if (!next) {
      const double gnorm = cur.reduced_grad.norm();
      if (gnorm == 0.0) break;
      const double t =
          std::min(1.0, 0.1 * std::max(1.0, cur.lambda.norm()) / gnorm);
      next = line_search(-t * cur.reduced_grad);
    }
    if (!next) {
      // No further decrease is possible at this precision; report the best
      // certified point.
      InnerResult out = certify(cur, it);
      if (out.converged) return out;
      if (out.residual.norm < best.residual.norm) best = out;
      return finish(std::move(best), it);
    }
    cur = std::move(*next);
    rp.adjoint(cur);
    if (cur.adjoint_ok) {
      InnerResult probe = certify(cur, it);
      if (probe.residual.norm < best.residual.norm) best = probe;
    }
  }
  InnerResult out = certify(cur, cfg.max_iterations);
  if (out.converged) return out;
  if (out.residual.norm < best.residual.norm) best = out;
  return finish(std::move(best), cfg.max_iterations);
}

}  // namespace sbl
