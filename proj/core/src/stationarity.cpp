#include "sbl/stationarity.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace sbl {

namespace {

void check_dims(const BilevelProblem& problem, const Vector& w,
                const Vector& lambda) {
  require(w.size() == problem.dims(), "w has the wrong length");
  require(lambda.size() == problem.r(), "lambda has the wrong length");
}

void check_mult(const BilevelProblem& problem, const Multipliers& mult) {
  require(mult.zeta.size() == problem.dims(), "zeta has the wrong length");
  require(mult.eta.size() == problem.r(), "eta has the wrong length");
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// |x|^e with 0^e = 0 for e > 0.
double abs_pow(double x, double e) {
  if (x == 0.0) return 0.0;
  return e == 1.0 ? std::abs(x) : std::pow(std::abs(x), e);
}

double inf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

}  // namespace

ApproxKKTResidual approx_kkt_residual(const BilevelProblem& problem,
                                      const Vector& w, const Vector& lambda,
                                      const Multipliers& mult,
                                      const SmoothingParams& sp) {
  check_dims(problem, w, lambda);
  check_mult(problem, mult);

  const Evaluation G = detail::eval_G_unchecked(problem, w, lambda_bar(lambda),
                                                Order::hessian);
  const Evaluation f = eval_f(problem, w);
  const Vector dphi = phi_grad(w, sp);
  const Vector d2phi = phi_hess_diag(w, sp);
  const double lam1 = lambda(0);

  ApproxKKTResidual res;
  res.eps1 = f.grad + G.hess * mult.zeta +
             lam1 * d2phi.cwiseProduct(mult.zeta);
  res.eps2 = dphi.dot(mult.zeta) - mult.eta(0);
  const Matrix dR = smooth_term_gradients(problem, w);
  res.eps3 = dR.transpose() * mult.zeta - mult.eta.tail(problem.r() - 1);
  res.eps4 = G.grad + lam1 * dphi;
  res.eps5 = lambda.dot(mult.eta);
  res.norm = std::sqrt(res.eps1.squaredNorm() + res.eps2 * res.eps2 +
                       res.eps3.squaredNorm() + res.eps4.squaredNorm() +
                       res.eps5 * res.eps5);
  res.feasible = (lambda.array() >= 0.0).all() && (mult.eta.array() >= 0.0).all();
  return res;
}

ActiveSet ActiveSet::classify(const Vector& w, double tau) {
  require(tau >= 0.0, "zero threshold must be >= 0");
  ActiveSet a;
  a.threshold = tau;
  a.dims = w.size();
  const double cutoff = tau * inf_norm(w);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (std::abs(w(i)) <= cutoff) a.indices.push_back(i);
  }
  return a;
}

bool ActiveSet::contains(Eigen::Index i) const {
  return std::binary_search(indices.begin(), indices.end(), i);
}

std::vector<bool> ActiveSet::mask() const {
  std::vector<bool> m(static_cast<std::size_t>(dims), false);
  for (auto i : indices) m[static_cast<std::size_t>(i)] = true;
  return m;
}

Vector zero_active(const Vector& w, const ActiveSet& active) {
  Vector out = w;
  for (auto i : active.indices) out(i) = 0.0;
  return out;
}

std::string to_string(MultiplierSource src) {
  return src == MultiplierSource::supplied ? "supplied" : "recovered";
}

bool SBKKTReport::all_pass() const {
  return std::all_of(pass.begin(), pass.end(), [](bool b) { return b; });
}

double SBKKTReport::worst() const {
  return *std::max_element(block_violation.begin(), block_violation.end());
}

SBKKTReport sbkkt_residual(const BilevelProblem& problem, const Vector& w,
                           const Vector& lambda, const Multipliers& mult,
                           const ActiveSet& active, SBKKTTolerance tol) {
  check_dims(problem, w, lambda);
  check_mult(problem, mult);
  require(active.dims == w.size(), "active set does not match w");

  const double p = problem.p();
  const double lam1 = lambda(0);
  const Eigen::Index n = w.size();
  const Evaluation G = detail::eval_G_unchecked(problem, w, lambda_bar(lambda),
                                                Order::hessian);
  const Evaluation f = eval_f(problem, w);
  const auto is_active = active.mask();

  Vector absp(n);
  for (Eigen::Index i = 0; i < n; ++i) absp(i) = abs_pow(w(i), p);
  const Vector w2 = w.cwiseAbs2();

  SBKKTReport rep;
  rep.w = w;
  rep.lambda = lambda;
  rep.mult = mult;
  rep.active = active;
  rep.tolerance = tol.tol;

  // (1) W^2 grad f + (W^2 hess G + lambda_1 p (p-1) diag|w|^p) zeta
  rep.res_stationarity_w = w2.cwiseProduct(f.grad) +
                           w2.cwiseProduct(G.hess * mult.zeta) +
                           lam1 * p * (p - 1.0) * absp.cwiseProduct(mult.zeta);
  // (2) W grad G + p lambda_1 |w|^p
  rep.res_scaled_lower = w.cwiseProduct(G.grad) + p * lam1 * absp;
  // (3)
  double s3 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (is_active[static_cast<std::size_t>(i)] || w(i) == 0.0) continue;
    s3 += sgn(w(i)) * abs_pow(w(i), p - 1.0) * mult.zeta(i);
  }
  rep.res_eta1 = p * s3 - mult.eta(0);
  // (4)
  rep.res_zeta_active.resize(static_cast<Eigen::Index>(active.indices.size()));
  for (std::size_t k = 0; k < active.indices.size(); ++k) {
    rep.res_zeta_active(static_cast<Eigen::Index>(k)) =
        mult.zeta(active.indices[k]);
  }
  // (5)
  const Matrix dR = smooth_term_gradients(problem, w);
  rep.res_eta_rest = dR.transpose() * mult.zeta - mult.eta.tail(problem.r() - 1);
  // (6)
  const double neg_lambda = std::max(0.0, -lambda.minCoeff());
  const double neg_eta = std::max(0.0, -mult.eta.minCoeff());
  rep.res_complementarity =
      std::max({std::abs(lambda.dot(mult.eta)), neg_lambda, neg_eta});

  rep.cond = rep.res_scaled_lower.norm();
  const double wmax = inf_norm(w);
  rep.scale = wmax > 0.0 ? wmax : 1.0;

  rep.block_violation = {inf_norm(rep.res_stationarity_w) / rep.scale,
                         inf_norm(rep.res_scaled_lower) / rep.scale,
                         std::abs(rep.res_eta1) / rep.scale,
                         inf_norm(rep.res_zeta_active),
                         inf_norm(rep.res_eta_rest),
                         rep.res_complementarity};
  for (std::size_t b = 0; b < 6; ++b) {
    rep.pass[b] = rep.block_violation[b] <= tol.tol;
  }
  return rep;
}

Multipliers recover_multipliers(const BilevelProblem& problem,
                                const Vector& w, const Vector& lambda,
                                const ActiveSet& active) {
  check_dims(problem, w, lambda);
  const double p = problem.p();
  const double lam1 = lambda(0);
  const Eigen::Index n = w.size();
  const auto is_active = active.mask();

  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!is_active[static_cast<std::size_t>(i)] && w(i) != 0.0) {
      free.push_back(i);
    }
  }

  Multipliers m = Multipliers::zeros(n, problem.r());
  if (!free.empty()) {
    const auto nf = static_cast<Eigen::Index>(free.size());
    const Evaluation G = detail::eval_G_unchecked(
        problem, w, lambda_bar(lambda), Order::hessian);
    const Evaluation f = eval_f(problem, w);
    // Block (1) on the free rows, divided through by w_i^2.
    Matrix a(nf, nf);
    Vector b(nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
      const auto i = free[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < nf; ++c) {
        a(r, c) = G.hess(i, free[static_cast<std::size_t>(c)]);
      }
      a(r, r) += lam1 * p * (p - 1.0) * abs_pow(w(i), p - 2.0);
      b(r) = -f.grad(i);
    }
    const Vector z = a.completeOrthogonalDecomposition().solve(b);
    for (Eigen::Index r = 0; r < nf; ++r) {
      m.zeta(free[static_cast<std::size_t>(r)]) = z(r);
    }
  }

  double s3 = 0.0;
  for (auto i : free) s3 += sgn(w(i)) * abs_pow(w(i), p - 1.0) * m.zeta(i);
  m.eta(0) = p * s3;
  if (problem.r() > 1) {
    m.eta.tail(problem.r() - 1) =
        smooth_term_gradients(problem, w).transpose() * m.zeta;
  }
  return m;
}

SBKKTReport sbkkt_residual_recovered(const BilevelProblem& problem,
                                     const Vector& w, const Vector& lambda,
                                     const ActiveSet& active,
                                     SBKKTTolerance tol) {
  auto rep = sbkkt_residual(problem, w, lambda,
                            recover_multipliers(problem, w, lambda, active),
                            active, tol);
  rep.source = MultiplierSource::recovered;
  return rep;
}

Vector scaled_first_order_residual(const BilevelProblem& problem,
                                   const Vector& w, const Vector& lambda) {
  check_dims(problem, w, lambda);
  const double p = problem.p();
  const Vector dG =
      detail::eval_G_unchecked(problem, w, lambda_bar(lambda), Order::gradient)
          .grad;
  Vector out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out(i) = w(i) * dG(i) + p * lambda(0) * abs_pow(w(i), p);
  }
  return out;
}

StationarityCheck subdiff_stationarity(const BilevelProblem& problem,
                                       const Vector& w, const Vector& lambda,
                                       const ActiveSet& active, double tol) {
  check_dims(problem, w, lambda);
  require(active.dims == w.size(), "active set does not match w");
  const double p = problem.p();
  const double lam1 = lambda(0);
  const Vector dG =
      detail::eval_G_unchecked(problem, w, lambda_bar(lambda), Order::gradient)
          .grad;
  const auto is_active = active.mask();

  StationarityCheck out;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    double v = 0.0;
    if (is_active[static_cast<std::size_t>(i)] || w(i) == 0.0) {
      // For p < 1 the subdifferential at zero is all of R once lambda_1 > 0.
      if (p == 1.0 || lam1 == 0.0) v = std::max(0.0, std::abs(dG(i)) - lam1);
    } else {
      v = std::abs(dG(i) + p * sgn(w(i)) * lam1 * abs_pow(w(i), p - 1.0));
    }
    if (v > out.margin) {
      out.margin = v;
      out.worst_index = i;
    }
  }
  out.stationary = out.margin <= tol;
  return out;
}

}  // namespace sbl
