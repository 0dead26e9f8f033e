#include "sbl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace sbl {

Matrix licq_matrix(const BilevelProblem& problem, const Vector& w,
                   const Vector& lambda, const ActiveSet& active) {
  const Eigen::Index n = w.size();
  const int r = problem.r();
  const double p = problem.p();
  const auto is_active = active.mask();
  const Evaluation G = eval_G(problem, w, lambda_bar(lambda), Order::hessian);
  const Matrix dR = smooth_term_gradients(problem, w);

  std::vector<Vector> cols;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (is_active[static_cast<std::size_t>(i)] || w(i) == 0.0) continue;
    Vector c = Vector::Zero(n + r);
    c.head(n) = G.hess.col(i);
    const double a = std::abs(w(i));
    c(i) += lambda(0) * p * (p - 1.0) * std::pow(a, p - 2.0);
    c(n) = p * (w(i) > 0.0 ? 1.0 : -1.0) * std::pow(a, p - 1.0);
    for (int l = 1; l < r; ++l) c(n + l) = dR(i, l - 1);
    cols.push_back(std::move(c));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(is_active[static_cast<std::size_t>(i)] || w(i) == 0.0)) continue;
    Vector c = Vector::Zero(n + r);
    c(i) = 1.0;
    cols.push_back(std::move(c));
  }
  for (int j = 0; j < r; ++j) {
    if (lambda(j) > 0.0) continue;
    Vector c = Vector::Zero(n + r);
    c(n + j) = 1.0;
    cols.push_back(std::move(c));
  }

  Matrix m(n + r, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    m.col(static_cast<Eigen::Index>(k)) = cols[k];
  }
  return m;
}

AssumptionReport assumption_diagnostics(std::span<const IterateState> trace,
                                        const BilevelProblem& problem,
                                        const DiagnosticsOptions& opts) {
  require(!trace.empty(), "assumption diagnostics need a nonempty trace");
  AssumptionReport rep;

  const auto size = trace.size();
  const auto tail = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(opts.tail_fraction * static_cast<double>(size))));
  rep.a1_tail_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = size - tail; k < size; ++k) {
    rep.a1_tail_min = std::min(rep.a1_tail_min, trace[k].lambda(0));
  }
  rep.a1_margin = rep.a1_tail_min;
  rep.a1_ok = rep.a1_tail_min > opts.a1_threshold;

  for (const auto& s : trace) {
    const double nrm = std::sqrt(s.w.squaredNorm() + s.lambda.squaredNorm());
    rep.a2_max_norm = std::max(rep.a2_max_norm, nrm);
    if (!std::isfinite(nrm)) rep.a2_max_norm = nrm;
  }
  rep.a2_ok = std::isfinite(rep.a2_max_norm) && rep.a2_max_norm < opts.a2_bound;

  const IterateState& last = trace.back();
  const ActiveSet active = ActiveSet::classify(last.w, opts.zero_threshold);
  const Vector w_star = zero_active(last.w, active);

  if (problem.p() == 1.0) {
    rep.a3_applicable = true;
    const Vector dG =
        eval_G(problem, w_star, lambda_bar(last.lambda), Order::gradient).grad;
    for (auto i : active.indices) {
      const double m = std::abs(last.lambda(0) - std::abs(dG(i)));
      rep.a3_margins.push_back(m);
      if (!(m > opts.a3_tolerance)) rep.a3_ok = false;
    }
  }

  const Matrix m = licq_matrix(problem, w_star, last.lambda, active);
  rep.a4_columns = m.cols();
  if (m.cols() == 0) {
    rep.a4_min_singular_value = std::numeric_limits<double>::infinity();
  } else if (m.cols() > m.rows()) {
    rep.a4_min_singular_value = 0.0;
  } else {
    Eigen::JacobiSVD<Matrix> svd(m);
    rep.a4_min_singular_value = svd.singularValues().minCoeff();
  }
  rep.a4_ok = rep.a4_min_singular_value > opts.a4_rank_tolerance;
  return rep;
}

}  // namespace sbl
