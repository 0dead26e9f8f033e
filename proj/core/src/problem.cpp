#include "sbl/problem.hpp"

#include <cmath>

namespace sbl {

std::string to_string(LossKind kind) {
  return kind == LossKind::squared ? "squared" : "logistic";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "squared") return LossKind::squared;
  if (text == "logistic") return LossKind::logistic;
  throw ContractError("unknown loss '" + text + "'");
}

std::string to_string(SmoothTerm term) {
  switch (term) {
    case SmoothTerm::squared_l2:
      return "squared_l2";
  }
  return "unknown";
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// 1 / (1 + exp(-z)) without overflow.
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

BoundLoss::BoundLoss(LossSpec spec, Matrix features, Vector targets)
    : spec_{spec}, x_{std::move(features)}, y_{std::move(targets)} {
  require(x_.rows() == y_.size(), "feature rows must match target length");
  if (spec_.kind == LossKind::logistic) {
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      require(y_(i) == 1.0 || y_(i) == -1.0,
              "logistic loss needs +1/-1 labels");
    }
  } else {
    squared_hess_ = 2.0 * (x_.transpose() * x_);
  }
}

Evaluation BoundLoss::evaluate(const Vector& w, Order order) const {
  require(w.size() == x_.cols(), "weight length does not match features");
  if (!w.allFinite()) throw NumericalDomainError("non-finite weights");
  Evaluation e;
  const Vector xw = x_ * w;
  if (spec_.kind == LossKind::squared) {
    const Vector resid = y_ - xw;
    e.value = resid.squaredNorm();
    if (order >= Order::gradient) e.grad = -2.0 * (x_.transpose() * resid);
    if (order >= Order::hessian) e.hess = squared_hess_;
  } else {
    const Vector margin = y_.cwiseProduct(xw);
    double v = 0.0;
    for (Eigen::Index i = 0; i < margin.size(); ++i) v += softplus(-margin(i));
    e.value = v;
    if (order >= Order::gradient) {
      Vector coef(margin.size());
      for (Eigen::Index i = 0; i < margin.size(); ++i) {
        coef(i) = -y_(i) * sigmoid(-margin(i));
      }
      e.grad = x_.transpose() * coef;
    }
    if (order >= Order::hessian) {
      Vector d(margin.size());
      for (Eigen::Index i = 0; i < margin.size(); ++i) {
        d(i) = sigmoid(margin(i)) * sigmoid(-margin(i));
      }
      e.hess = x_.transpose() * d.asDiagonal() * x_;
    }
  }
  if (!std::isfinite(e.value) || (e.grad.size() && !e.grad.allFinite()) ||
      (e.hess.size() && !e.hess.allFinite())) {
    throw NumericalDomainError("non-finite loss evaluation");
  }
  return e;
}

Matrix BoundLoss::third_contracted(const Vector& w, const Vector& v) const {
  require(w.size() == x_.cols() && v.size() == x_.cols(),
          "vector length does not match features");
  if (spec_.kind == LossKind::squared) {
    return Matrix::Zero(x_.cols(), x_.cols());
  }
  const Vector margin = y_.cwiseProduct(x_ * w);
  const Vector xv = x_ * v;
  Vector d(margin.size());
  for (Eigen::Index i = 0; i < margin.size(); ++i) {
    const double s = sigmoid(margin(i));
    const double t = sigmoid(-margin(i));
    d(i) = s * t * (t - s) * y_(i) * xv(i);
  }
  return x_.transpose() * d.asDiagonal() * x_;
}

Evaluation eval_smooth_term(SmoothTerm term, const Vector& w, Order order) {
  Evaluation e;
  switch (term) {
    case SmoothTerm::squared_l2:
      e.value = w.squaredNorm();
      if (order >= Order::gradient) e.grad = 2.0 * w;
      if (order >= Order::hessian) {
        e.hess = 2.0 * Matrix::Identity(w.size(), w.size());
      }
      break;
  }
  return e;
}

void BilevelProblem::validate() const {
  require(upper.dims() == lower.dims(),
          "upper and lower losses must share the feature dimension");
  require(lower.dims() > 0, "problem needs at least one feature");
  require(regularizers.p > 0.0 && regularizers.p <= 1.0, "p must be in (0, 1]");
  require(upper.kind() == lower.kind(),
          "upper and lower losses must be of the same kind");
}

BilevelProblem make_problem(const Dataset& data, LossSpec loss,
                            RegularizerSpec regularizers) {
  BilevelProblem p{
      BoundLoss(loss, data.validation.features, data.validation.targets),
      BoundLoss(loss, data.train.features, data.train.targets),
      std::move(regularizers)};
  p.validate();
  return p;
}

Evaluation eval_G(const BilevelProblem& problem, const Vector& w,
                  const Vector& lambda_bar, Order order) {
  require((lambda_bar.array() >= 0.0).all(), "lambda_bar must be >= 0");
  return detail::eval_G_unchecked(problem, w, lambda_bar, order);
}

Evaluation detail::eval_G_unchecked(const BilevelProblem& problem,
                                    const Vector& w, const Vector& lambda_bar,
                                    Order order) {
  require(lambda_bar.size() == problem.r() - 1,
          "lambda_bar must have r - 1 entries");
  Evaluation e = problem.lower.evaluate(w, order);
  const auto& terms = problem.regularizers.smooth_terms;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double lam = lambda_bar(static_cast<Eigen::Index>(i));
    const Evaluation t = eval_smooth_term(terms[i], w, order);
    e.value += lam * t.value;
    if (order >= Order::gradient) e.grad += lam * t.grad;
    if (order >= Order::hessian) e.hess += lam * t.hess;
  }
  return e;
}

Matrix eval_G_third_contracted(const BilevelProblem& problem, const Vector& w,
                              const Vector& v) {
  // Every smooth term is quadratic, so only g contributes.
  return problem.lower.third_contracted(w, v);
}

Evaluation eval_f(const BilevelProblem& problem, const Vector& w,
                  Order order) {
  return problem.upper.evaluate(
      w, order > Order::gradient ? Order::gradient : order);
}

Matrix smooth_term_gradients(const BilevelProblem& problem, const Vector& w) {
  const auto& terms = problem.regularizers.smooth_terms;
  Matrix out(w.size(), static_cast<Eigen::Index>(terms.size()));
  for (std::size_t i = 0; i < terms.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) =
        eval_smooth_term(terms[i], w, Order::gradient).grad;
  }
  return out;
}

double lp_norm_p(const Vector& w, double p) {
  if (p == 1.0) return w.lpNorm<1>();
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) != 0.0) s += std::pow(std::abs(w(i)), p);
  }
  return s;
}

}  // namespace sbl
