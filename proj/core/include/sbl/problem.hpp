#pragma once

#include <string>
#include <vector>

#include "sbl/dataset.hpp"
#include "sbl/types.hpp"

namespace sbl {

enum class LossKind { squared, logistic };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

struct LossSpec {
  LossKind kind = LossKind::squared;
};

/// How many derivatives an evaluation should produce.
enum class Order { value = 0, gradient = 1, hessian = 2 };

struct Evaluation {
  double value = 0.0;
  Vector grad;  // empty when not requested
  Matrix hess;  // empty when not requested
};

/// A loss bound to one data split.
///
///   squared:  sum_i (y_i - x_i'w)^2
///   logistic: sum_i log(1 + exp(-y_i x_i'w)),  y_i in {-1, +1}
class BoundLoss {
 public:
  BoundLoss() = default;
  BoundLoss(LossSpec spec, Matrix features, Vector targets);

  Evaluation evaluate(const Vector& w, Order order) const;
  /// d/dw [hess(w) v], the third derivative contracted with v.
  Matrix third_contracted(const Vector& w, const Vector& v) const;
  double value(const Vector& w) const {
    return evaluate(w, Order::value).value;
  }

  LossKind kind() const { return spec_.kind; }
  const Matrix& features() const { return x_; }
  const Vector& targets() const { return y_; }
  Eigen::Index dims() const { return x_.cols(); }
  Eigen::Index samples() const { return x_.rows(); }

 private:
  LossSpec spec_;
  Matrix x_;
  Vector y_;
  Matrix squared_hess_;  // 2 X'X, cached for the squared loss
};

enum class SmoothTerm { squared_l2 };

std::string to_string(SmoothTerm term);

/// Regularizer list. Term 1 is always ||w||_p^p with p in (0, 1]; the
/// remaining terms are twice continuously differentiable.
struct RegularizerSpec {
  double p = 1.0;
  std::vector<SmoothTerm> smooth_terms;

  /// Number of hyperparameters (1 + smooth terms).
  int count() const { return 1 + static_cast<int>(smooth_terms.size()); }

  static RegularizerSpec lp(double p) { return {p, {}}; }
  static RegularizerSpec elastic_net(double p = 1.0) {
    return {p, {SmoothTerm::squared_l2}};
  }
};

/// Value, gradient and Hessian of a smooth regularizer term.
Evaluation eval_smooth_term(SmoothTerm term, const Vector& w, Order order);

/// The bilevel hyperparameter problem
///
///   min_lambda f(w*)  s.t.  w* in argmin_w g(w) + sum_i lambda_i R_i(w),
///   lambda >= 0,
///
/// with f the validation loss, g the training loss and R_1 = ||w||_p^p.
struct BilevelProblem {
  BoundLoss upper;  // f
  BoundLoss lower;  // g
  RegularizerSpec regularizers;

  Eigen::Index dims() const { return lower.dims(); }
  int r() const { return regularizers.count(); }
  double p() const { return regularizers.p; }

  /// Throws ContractError unless the pieces are mutually consistent.
  void validate() const;
};

BilevelProblem make_problem(const Dataset& data, LossSpec loss,
                            RegularizerSpec regularizers);

/// G(w, lambda_bar) = g(w) + sum_{i>=2} lambda_i R_i(w), with
/// lambda_bar = (lambda_2, ..., lambda_r).
Evaluation eval_G(const BilevelProblem& problem, const Vector& w,
                  const Vector& lambda_bar, Order order = Order::hessian);

namespace detail {
/// eval_G without the lambda_bar >= 0 precondition, for residual
/// computations that must report (not reject) infeasible multipliers.
Evaluation eval_G_unchecked(const BilevelProblem& problem, const Vector& w,
                            const Vector& lambda_bar, Order order);
}  // namespace detail

/// d/dw [hess_ww G(w, lambda_bar) v]; independent of lambda_bar because the
/// smooth regularizer terms are quadratic.
Matrix eval_G_third_contracted(const BilevelProblem& problem, const Vector& w,
                              const Vector& v);

/// Upper-level loss f on the validation split (value and gradient).
Evaluation eval_f(const BilevelProblem& problem, const Vector& w,
                  Order order = Order::gradient);

/// Columns are grad R_i(w) for i = 2..r (n x (r-1)).
Matrix smooth_term_gradients(const BilevelProblem& problem, const Vector& w);

/// lambda_bar view of a full hyperparameter vector.
inline Vector lambda_bar(const Vector& lambda) {
  return lambda.tail(lambda.size() - 1);
}

/// sum_i |w_i|^p (p in (0, 1]).
double lp_norm_p(const Vector& w, double p);

}  // namespace sbl
