#include "kkt_newton.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace sbl::detail {

namespace {

Matrix restrict(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Matrix out(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      out(a, b) = m(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

Vector restrict(const Vector& v, const std::vector<Eigen::Index>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    out(static_cast<Eigen::Index>(a)) = v(idx[a]);
  }
  return out;
}

}  // namespace

Vector KKTSystem::embed(const Vector& w_sub) const {
  Vector w = Vector::Zero(problem->dims());
  for (std::size_t a = 0; a < coords.size(); ++a) {
    w(coords[a]) = w_sub(static_cast<Eigen::Index>(a));
  }
  return w;
}

Vector KKTSystem::residual(const KKTPoint& z) const {
  const auto m = static_cast<Eigen::Index>(coords.size());
  const auto nf = static_cast<Eigen::Index>(free_lambda.size());
  const Vector w = embed(z.w);
  const Evaluation G =
      eval_G(*problem, w, lambda_bar(z.lambda), Order::hessian);
  Matrix j = restrict(G.hess, coords);
  j.diagonal() += z.lambda(0) * term.d2(z.w);
  const Vector d1 = term.d1(z.w);
  const Matrix dr = smooth_term_gradients(*problem, w);

  Vector out(2 * m + nf);
  out.head(m) = restrict(eval_f(*problem, w).grad, coords) + j * z.zeta;
  for (Eigen::Index a = 0; a < nf; ++a) {
    const int l = free_lambda[static_cast<std::size_t>(a)];
    out(m + a) =
        (l == 0 ? d1 : restrict(Vector(dr.col(l - 1)), coords)).dot(z.zeta);
  }
  out.tail(m) = restrict(G.grad, coords) + z.lambda(0) * d1;
  return out;
}

std::optional<KKTPoint> kkt_newton(const KKTSystem& sys, KKTPoint z,
                                   double target, int max_steps) {
  const BilevelProblem& problem = *sys.problem;
  const auto m = static_cast<Eigen::Index>(sys.coords.size());
  const auto nf = static_cast<Eigen::Index>(sys.free_lambda.size());
  const Eigen::Index dim = 2 * m + nf;
  if (m == 0) return std::nullopt;

  Vector res;
  try {
    res = sys.residual(z);
  } catch (const NumericalDomainError&) {
    return std::nullopt;
  }
  for (int step = 0; step < max_steps; ++step) {
    const double norm = res.norm();
    if (!std::isfinite(norm)) return std::nullopt;
    if (norm <= target) return z;

    const Vector w = sys.embed(z.w);
    const Vector zeta_full = sys.embed(z.zeta);
    const Evaluation G =
        eval_G(problem, w, lambda_bar(z.lambda), Order::hessian);
    Matrix jw = restrict(G.hess, sys.coords);
    const Vector d2 = sys.term.d2(z.w);
    jw.diagonal() += z.lambda(0) * d2;
    Matrix hww = restrict(Matrix(problem.upper.evaluate(w, Order::hessian).hess +
                                 eval_G_third_contracted(problem, w, zeta_full)),
                          sys.coords);
    hww.diagonal() += z.lambda(0) * sys.term.d3(z.w).cwiseProduct(z.zeta);
    const Vector d1 = sys.term.d1(z.w);
    const Matrix dr = smooth_term_gradients(problem, w);

    Matrix k = Matrix::Zero(dim, dim);
    k.topLeftCorner(m, m) = hww;
    k.block(0, m + nf, m, m) = jw.transpose();
    k.bottomLeftCorner(m, m) = jw;
    for (Eigen::Index a = 0; a < nf; ++a) {
      const int l = sys.free_lambda[static_cast<std::size_t>(a)];
      Vector mixed;  // d(J_w zeta)/d lambda_l
      Vector dc;     // d c / d lambda_l
      if (l == 0) {
        mixed = d2.cwiseProduct(z.zeta);
        dc = d1;
      } else {
        const SmoothTerm t =
            problem.regularizers.smooth_terms[static_cast<std::size_t>(l - 1)];
        mixed = restrict(Vector(eval_smooth_term(t, w, Order::hessian).hess *
                                zeta_full),
                         sys.coords);
        dc = restrict(Vector(dr.col(l - 1)), sys.coords);
      }
      k.block(0, m + a, m, 1) = mixed;
      k.block(m + a, 0, 1, m) = mixed.transpose();
      k.block(m + a, m + nf, 1, m) = dc.transpose();
      k.block(m + nf, m + a, m, 1) = dc;
    }
    const Eigen::FullPivLU<Matrix> lu(k);
    const Vector delta = lu.solve(-res);
    if (!delta.allFinite()) return std::nullopt;

    // Fraction to the boundary for lambda >= 0 and, when required, for the
    // signs of w.
    double alpha = 1.0;
    for (Eigen::Index a = 0; a < nf; ++a) {
      const double lam = z.lambda(sys.free_lambda[static_cast<std::size_t>(a)]);
      const double dl = delta(m + a);
      if (dl < 0.0) alpha = std::min(alpha, -0.99 * lam / dl);
    }
    if (sys.term.keep_signs) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const double dw = delta(i);
        if (dw * z.w(i) < 0.0) alpha = std::min(alpha, -0.99 * z.w(i) / dw);
      }
    }
    bool accepted = false;
    for (int b = 0; b < 30 && alpha > 0.0; ++b, alpha *= 0.5) {
      KKTPoint trial = z;
      trial.w += alpha * delta.head(m);
      for (Eigen::Index a = 0; a < nf; ++a) {
        trial.lambda(sys.free_lambda[static_cast<std::size_t>(a)]) +=
            alpha * delta(m + a);
      }
      trial.zeta += alpha * delta.tail(m);
      Vector tres;
      try {
        tres = sys.residual(trial);
      } catch (const NumericalDomainError&) {
        continue;
      }
      if (tres.allFinite() && tres.norm() <= (1.0 - 1e-4 * alpha) * norm) {
        z = std::move(trial);
        res = std::move(tres);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (res.norm() <= target) return z;
  return std::nullopt;
}

}  // namespace sbl::detail
