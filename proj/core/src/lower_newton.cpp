#include "sbl/lower_newton.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "sbl/smoothing.hpp"

namespace sbl {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Newton direction from a symmetric matrix; falls back to the
// eigenvalue-modified matrix |H| (floored) when H is not positive definite.
Vector newton_direction(const Matrix& h, const Vector& grad) {
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() == Eigen::Success) {
    Vector d = -llt.solve(grad);
    if (d.allFinite()) return d;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  Vector ev = eig.eigenvalues().cwiseAbs();
  const double floor = std::max(ev.maxCoeff() * 1e-10, 1e-12);
  ev = ev.cwiseMax(floor);
  const Matrix& v = eig.eigenvectors();
  return -(v * (v.transpose() * grad).cwiseQuotient(ev));
}

using EvalFn = std::function<Evaluation(const Vector&, Order)>;
using StepLimitFn = std::function<double(const Vector&, const Vector&)>;

NewtonResult damped_newton(const EvalFn& eval, const StepLimitFn& limit,
                           const Vector& start, const NewtonOptions& opts) {
  NewtonResult res;
  res.w = start;
  Evaluation e = eval(res.w, Order::hessian);
  for (int it = 0;; ++it) {
    res.iterations = it;
    const double gnorm = e.grad.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.grad_tolerance &&
        (it >= opts.min_iterations || gnorm == 0.0)) {
      res.converged = true;
      break;
    }
    if (it >= opts.max_iterations) break;

    const Vector d = newton_direction(e.hess, e.grad);
    const double slope = e.grad.dot(d);
    double alpha = std::min(1.0, limit(res.w, d));
    bool accepted = false;
    Vector trial;
    Evaluation te;
    for (int b = 0; b < opts.max_backtracks; ++b, alpha *= opts.backtrack) {
      trial = res.w + alpha * d;
      try {
        te = eval(trial, Order::value);
      } catch (const NumericalDomainError&) {
        continue;
      }
      const double tol_roundoff = 10.0 * kEps * std::abs(e.value);
      if (te.value <= e.value + opts.armijo * alpha * slope ||
          (b == 0 && te.value <= e.value + tol_roundoff)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = gnorm <= opts.stall_grad_tolerance;
      break;
    }
    const bool tiny_step =
        (trial - res.w).lpNorm<Eigen::Infinity>() <=
        4.0 * kEps * std::max(1.0, res.w.lpNorm<Eigen::Infinity>());
    res.w = std::move(trial);
    e = eval(res.w, Order::hessian);
    if (tiny_step) {
      res.iterations = it + 1;
      res.converged = e.grad.lpNorm<Eigen::Infinity>() <=
                      opts.stall_grad_tolerance;
      break;
    }
  }
  res.value = e.value;
  res.grad = e.grad;
  return res;
}

}  // namespace

NewtonResult minimize_smoothed_lower(const BilevelProblem& problem,
                                     const Vector& lambda, double mu,
                                     const Vector& start,
                                     const NewtonOptions& opts) {
  require(start.size() == problem.dims(), "start has the wrong length");
  require(lambda.size() == problem.r(), "lambda has the wrong length");
  const SmoothingParams sp{mu, problem.p()};
  const Vector lbar = lambda_bar(lambda);
  const double lam1 = lambda(0);

  auto eval = [&](const Vector& w, Order order) {
    Evaluation e = eval_G(problem, w, lbar, order);
    e.value += lam1 * phi_value(w, sp);
    if (order >= Order::gradient) e.grad += lam1 * phi_grad(w, sp);
    if (order >= Order::hessian) {
      e.hess.diagonal() += lam1 * phi_hess_diag(w, sp);
    }
    return e;
  };
  auto no_limit = [](const Vector&, const Vector&) {
    return std::numeric_limits<double>::infinity();
  };
  return damped_newton(eval, no_limit, start, opts);
}

NewtonResult minimize_restricted_lower(const BilevelProblem& problem,
                                       const Vector& lambda,
                                       const Vector& start,
                                       const std::vector<bool>& free,
                                       const NewtonOptions& opts) {
  const Eigen::Index n = problem.dims();
  require(start.size() == n, "start has the wrong length");
  require(static_cast<Eigen::Index>(free.size()) == n,
          "free mask has the wrong length");
  const double p = problem.p();
  const double lam1 = lambda(0);
  const Vector lbar = lambda_bar(lambda);

  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (free[static_cast<std::size_t>(i)]) {
      require(start(i) != 0.0, "free coordinates must start away from zero");
      idx.push_back(i);
    }
  }
  const auto nf = static_cast<Eigen::Index>(idx.size());

  Vector base = Vector::Zero(n);
  auto expand = [&](const Vector& z) {
    Vector w = base;
    for (Eigen::Index k = 0; k < nf; ++k) w(idx[static_cast<std::size_t>(k)]) = z(k);
    return w;
  };
  Vector signs(nf);
  Vector z0(nf);
  for (Eigen::Index k = 0; k < nf; ++k) {
    z0(k) = start(idx[static_cast<std::size_t>(k)]);
    signs(k) = z0(k) > 0.0 ? 1.0 : -1.0;
  }

  auto eval = [&](const Vector& z, Order order) {
    for (Eigen::Index k = 0; k < nf; ++k) {
      if (z(k) * signs(k) <= 0.0) {
        throw NumericalDomainError("coordinate left its orthant");
      }
    }
    const Evaluation g = eval_G(problem, expand(z), lbar, order);
    Evaluation e;
    e.value = g.value;
    if (order >= Order::gradient) e.grad.resize(nf);
    if (order >= Order::hessian) e.hess.resize(nf, nf);
    for (Eigen::Index k = 0; k < nf; ++k) {
      const auto i = idx[static_cast<std::size_t>(k)];
      const double a = std::abs(z(k));
      e.value += lam1 * (p == 1.0 ? a : std::pow(a, p));
      if (order >= Order::gradient) {
        e.grad(k) = g.grad(i) + lam1 * p * signs(k) * std::pow(a, p - 1.0);
      }
      if (order >= Order::hessian) {
        for (Eigen::Index c = 0; c < nf; ++c) {
          e.hess(k, c) = g.hess(i, idx[static_cast<std::size_t>(c)]);
        }
        e.hess(k, k) += lam1 * p * (p - 1.0) * std::pow(a, p - 2.0);
      }
    }
    return e;
  };
  // Fraction-to-boundary rule keeps every free coordinate on its side.
  auto limit = [&](const Vector& z, const Vector& d) {
    double alpha = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < nf; ++k) {
      if (d(k) * signs(k) < 0.0) {
        alpha = std::min(alpha, 0.99 * (-z(k) / d(k)));
      }
    }
    return alpha;
  };

  NewtonResult zr;
  if (nf == 0) {
    zr.value = eval_G(problem, base, lbar, Order::value).value;
    zr.converged = true;
    zr.grad.resize(0);
  } else {
    zr = damped_newton(eval, limit, z0, opts);
  }
  NewtonResult out;
  out.w = expand(zr.w.size() ? zr.w : Vector(Vector::Zero(nf)));
  out.value = zr.value;
  out.grad = Vector::Zero(n);
  for (Eigen::Index k = 0; k < nf; ++k) {
    out.grad(idx[static_cast<std::size_t>(k)]) = zr.grad(k);
  }
  out.iterations = zr.iterations;
  out.converged = zr.converged;
  return out;
}

}  // namespace sbl
