#pragma once

#include "sbl/types.hpp"

namespace sbl {

/// Smoothing parameter mu >= 0 and exponent p in (0, 1].
struct SmoothingParams {
  double mu = 1.0;
  double p = 1.0;
};

/// Smallest mu accepted by the derivative routines.
inline constexpr double kMinSmoothingMu = 1e-300;

/// phi_mu(w) = sum_i (w_i^2 + mu^2)^(p/2). At mu = 0 this is ||w||_p^p.
double phi_value(const Vector& w, const SmoothingParams& sp);

/// (grad phi_mu(w))_i = p w_i (w_i^2 + mu^2)^(p/2 - 1).
/// Throws NumericalDomainError when mu < kMinSmoothingMu.
Vector phi_grad(const Vector& w, const SmoothingParams& sp);

/// Diagonal of the (diagonal) Hessian of phi_mu:
///   p (w_i^2+mu^2)^(p/2-1) + p (p-2) w_i^2 (w_i^2+mu^2)^(p/2-2).
/// Throws NumericalDomainError when mu < kMinSmoothingMu.
Vector phi_hess_diag(const Vector& w, const SmoothingParams& sp);

void validate(const SmoothingParams& sp);

/// Diagonal of the third derivative of phi_mu (it has no off-diagonal
/// entries): p w h^(p-6) ((3p - 6) mu^2 + (p - 1)(p - 2) w^2), h^2 = w^2 + mu^2.
Vector phi_third_diag(const Vector& w, const SmoothingParams& sp);

}  // namespace sbl
