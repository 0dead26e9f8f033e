#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "sbl/problem.hpp"
#include "sbl/smoothing.hpp"
#include "sbl/types.hpp"

namespace sbl {

/// zeta: multiplier of the equality constraint grad_w G + lambda_1 grad phi
/// = 0 (length n). eta: multipliers of lambda >= 0 (length r).
struct Multipliers {
  Vector zeta;
  Vector eta;

  static Multipliers zeros(Eigen::Index n, int r) {
    return {Vector::Zero(n), Vector::Zero(r)};
  }
};

/// Residual blocks of the approximate KKT system of the smoothed one-level
/// problem
///
///   min_{w,lambda} f(w)  s.t.  grad_w G(w, lambda_bar) + lambda_1 grad
///   phi_mu(w) = 0,  lambda >= 0.
struct ApproxKKTResidual {
  Vector eps1;        // grad f + (hess_ww G + lambda_1 hess phi) zeta
  double eps2 = 0.0;  // grad phi' zeta - eta_1
  Vector eps3;        // grad R_i' zeta - eta_i, i = 2..r
  Vector eps4;        // grad_w G + lambda_1 grad phi
  double eps5 = 0.0;  // lambda' eta
  double norm = 0.0;  // Euclidean norm of (eps1, ..., eps5)
  /// lambda >= 0 and eta >= 0 hold. The residual is computed either way.
  bool feasible = true;
};

ApproxKKTResidual approx_kkt_residual(const BilevelProblem& problem,
                                      const Vector& w, const Vector& lambda,
                                      const Multipliers& mult,
                                      const SmoothingParams& sp);

/// Indices whose weights count as zero: |w_i| <= tau * max_j |w_j|.
/// An all-zero vector yields every index.
struct ActiveSet {
  std::vector<Eigen::Index> indices;
  double threshold = 1e-4;
  Eigen::Index dims = 0;

  static ActiveSet classify(const Vector& w, double tau = 1e-4);

  bool contains(Eigen::Index i) const;
  /// Boolean mask of length dims.
  std::vector<bool> mask() const;
};

/// Copy of w with the entries in `active` set to exactly zero.
Vector zero_active(const Vector& w, const ActiveSet& active);

/// Pass/fail tolerances for an SB-KKT report. Blocks 1-3 are divided by
/// max_i |w_i| (unscaled when w = 0) before comparison; blocks 4-6 are
/// compared as they are.
struct SBKKTTolerance {
  double tol = 1e-5;
};

enum class MultiplierSource { supplied, recovered };

std::string to_string(MultiplierSource src);

/// Residuals of the scaled bilevel KKT conditions at (w, lambda, zeta, eta):
///
///   (1) W^2 grad f + H(w, lambda) zeta = 0,
///       H = W^2 hess_ww G + lambda_1 p (p-1) diag(|w|^p)
///   (2) W grad_w G + p lambda_1 |w|^p = 0
///   (3) p sum_{i not in I} sgn(w_i) |w_i|^(p-1) zeta_i = eta_1
///   (4) zeta_i = 0, i in I
///   (5) grad R_i' zeta = eta_i, i = 2..r
///   (6) lambda >= 0, eta >= 0, lambda' eta = 0
///
/// with W = diag(w).
struct SBKKTReport {
  Vector res_stationarity_w;  // (1), length n
  Vector res_scaled_lower;    // (2), length n
  double res_eta1 = 0.0;      // (3)
  Vector res_zeta_active;     // (4), one entry per active index
  Vector res_eta_rest;        // (5), length r-1
  /// (6): max(|lambda' eta|, negative parts of lambda and eta).
  double res_complementarity = 0.0;

  /// ||res_scaled_lower||_2, the optimality-violation metric "cond".
  double cond = 0.0;
  /// max_i |w_i| used for scaling blocks 1-3 (1 when w = 0).
  double scale = 1.0;

  std::array<double, 6> block_violation{};  // after scaling
  std::array<bool, 6> pass{};
  double tolerance = 1e-5;

  ActiveSet active;
  Vector w;
  Vector lambda;
  Multipliers mult;
  MultiplierSource source = MultiplierSource::supplied;

  bool all_pass() const;
  /// max over blocks of block_violation.
  double worst() const;
};

SBKKTReport sbkkt_residual(const BilevelProblem& problem, const Vector& w,
                           const Vector& lambda, const Multipliers& mult,
                           const ActiveSet& active,
                           SBKKTTolerance tol = {});

/// Multipliers for (w, lambda) when none are available: zeta = 0 on the
/// active set, zeta solves block (1) off the active set (least squares if
/// singular), eta from blocks (3) and (5).
Multipliers recover_multipliers(const BilevelProblem& problem,
                                const Vector& w, const Vector& lambda,
                                const ActiveSet& active);

/// sbkkt_residual with recovered multipliers.
SBKKTReport sbkkt_residual_recovered(const BilevelProblem& problem,
                                     const Vector& w, const Vector& lambda,
                                     const ActiveSet& active,
                                     SBKKTTolerance tol = {});

/// W grad_w G(w, lambda_bar) + p lambda_1 |w|^p.
Vector scaled_first_order_residual(const BilevelProblem& problem,
                                   const Vector& w, const Vector& lambda);

struct StationarityCheck {
  bool stationary = false;
  /// Worst violation of 0 in the (regular) subdifferential; stationary iff
  /// margin <= tolerance.
  double margin = 0.0;
  Eigen::Index worst_index = -1;
};

/// 0 in d_w(G + lambda_1 ||w||_p^p) up to `tol`:
///   i not in I:  |dG/dw_i + p sgn(w_i) lambda_1 |w_i|^(p-1)| <= tol
///   i in I:      p < 1: no condition;  p = 1: |dG/dw_i| <= lambda_1 + tol
StationarityCheck subdiff_stationarity(const BilevelProblem& problem,
                                       const Vector& w, const Vector& lambda,
                                       const ActiveSet& active,
                                       double tol = 1e-6);

}  // namespace sbl
