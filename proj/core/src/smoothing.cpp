#include "sbl/smoothing.hpp"

#include <cmath>

namespace sbl {

namespace {

// (w^2 + mu^2)^(e/2) for a generic exponent e, given h = sqrt(w^2 + mu^2).
double hpow(double h, double e, double p) {
  if (p == 1.0) {
    if (e == 1.0) return h;
    if (e == -1.0) return 1.0 / h;
  }
  return std::exp(e * std::log(h));
}

void check_derivative_domain(const SmoothingParams& sp) {
  validate(sp);
  if (!(sp.mu >= kMinSmoothingMu)) {
    throw NumericalDomainError(
        "smoothing derivatives need mu > 0 (got mu = " +
        std::to_string(sp.mu) + ")");
  }
}

}  // namespace

void validate(const SmoothingParams& sp) {
  if (!(sp.p > 0.0 && sp.p <= 1.0)) throw ContractError("p must be in (0, 1]");
  if (!(sp.mu >= 0.0) || !std::isfinite(sp.mu)) {
    throw ContractError("mu must be finite and >= 0");
  }
}

double phi_value(const Vector& w, const SmoothingParams& sp) {
  validate(sp);
  if (!w.allFinite()) throw NumericalDomainError("non-finite weights");
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double h = std::hypot(w(i), sp.mu);
    if (h == 0.0) continue;  // 0^(p/2) = 0
    s += hpow(h, sp.p, sp.p);
  }
  return s;
}

Vector phi_grad(const Vector& w, const SmoothingParams& sp) {
  check_derivative_domain(sp);
  if (!w.allFinite()) throw NumericalDomainError("non-finite weights");
  Vector g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double h = std::hypot(w(i), sp.mu);
    g(i) = sp.p * w(i) * hpow(h, sp.p - 2.0, sp.p);
  }
  return g;
}

Vector phi_hess_diag(const Vector& w, const SmoothingParams& sp) {
  check_derivative_domain(sp);
  if (!w.allFinite()) throw NumericalDomainError("non-finite weights");
  Vector d(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double h = std::hypot(w(i), sp.mu);
    const double t = hpow(h, sp.p - 2.0, sp.p);
    const double ratio = w(i) / h;
    d(i) = sp.p * t + sp.p * (sp.p - 2.0) * ratio * ratio * t;
  }
  return d;
}

Vector phi_third_diag(const Vector& w, const SmoothingParams& sp) {
  check_derivative_domain(sp);
  if (!w.allFinite()) throw NumericalDomainError("non-finite weights");
  const double p = sp.p;
  Vector d(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double h = std::hypot(w(i), sp.mu);
    const double t = hpow(h, p - 2.0, p);
    const double c = w(i) / h;
    const double s = sp.mu / h;
    d(i) = p * t * c / h *
           ((3.0 * p - 6.0) * s * s + (p - 1.0) * (p - 2.0) * c * c);
  }
  return d;
}

}  // namespace sbl
