#include "sbl/gaussian_process.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace sbl {

namespace {

Matrix correlation(const Matrix& a, const Matrix& b, const Vector& length) {
  Matrix c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double d2 =
          ((a.row(i) - b.row(j)).transpose().cwiseQuotient(length)).squaredNorm();
      c(i, j) = std::exp(-0.5 * d2);
    }
  }
  return c;
}

struct Fitted {
  double nll = std::numeric_limits<double>::infinity();
  Eigen::LLT<Matrix> chol;
  double noise = 0.0;
  double signal = 1.0;
};

// Profile negative log likelihood with the signal variance in closed form.
Fitted profile(const Matrix& x, const Vector& y, const Vector& length,
               double noise) {
  Fitted f;
  const Matrix c = correlation(x, x, length);
  const auto m = static_cast<double>(x.rows());
  for (double jitter : {0.0, 1e-10, 1e-8, 1e-6, 1e-4}) {
    Matrix k = c;
    k.diagonal().array() += noise + jitter;
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) continue;
    const Vector a = llt.solve(y);
    const double s2 = std::max(y.dot(a) / m, 1e-300);
    const double logdet =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    f.nll = 0.5 * m * std::log(s2) + 0.5 * logdet;
    if (!std::isfinite(f.nll)) continue;
    f.chol = std::move(llt);
    f.noise = noise + jitter;
    f.signal = s2;
    return f;
  }
  f.nll = std::numeric_limits<double>::infinity();
  return f;
}

}  // namespace

std::optional<GaussianProcess> GaussianProcess::fit(const Matrix& x,
                                                    const Vector& y) {
  require(x.rows() == y.size() && x.rows() >= 1, "GP needs matching data");
  require(x.allFinite() && y.allFinite(), "GP data must be finite");
  GaussianProcess gp;
  gp.x_ = x;
  gp.y_mean_ = y.mean();
  const double var = (y.array() - gp.y_mean_).square().mean();
  gp.y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  const Vector ys = (y.array() - gp.y_mean_) / gp.y_scale_;

  const Eigen::Index d = x.cols();
  const std::vector<double> scales = {0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4};
  const std::vector<double> noises = {1e-6, 1e-4, 1e-2, 1e-1};

  // Isotropic search, then one coordinate sweep per input dimension.
  Vector best_len = Vector::Constant(d, 1.0);
  Fitted best;
  for (double s : scales) {
    for (double g : noises) {
      const Vector len = Vector::Constant(d, s);
      Fitted f = profile(x, ys, len, g);
      if (f.nll < best.nll) {
        best = std::move(f);
        best_len = len;
      }
    }
  }
  if (!std::isfinite(best.nll)) return std::nullopt;
  if (d > 1) {
    for (Eigen::Index dim = 0; dim < d; ++dim) {
      for (double s : scales) {
        Vector len = best_len;
        len(dim) = s;
        Fitted f = profile(x, ys, len, best.noise);
        if (f.nll < best.nll) {
          best = std::move(f);
          best_len = len;
        }
      }
    }
  }
  gp.length_ = best_len;
  gp.noise_ = best.noise;
  gp.signal_ = best.signal;
  gp.chol_ = std::move(best.chol);
  gp.alpha_ = gp.chol_.solve(ys);
  return gp;
}

GPPrediction GaussianProcess::predict(const Vector& x) const {
  require(x.size() == x_.cols(), "GP query has the wrong dimension");
  const Vector kx = correlation(x_, x.transpose(), length_).col(0);
  const double mean = kx.dot(alpha_);
  const Vector v = chol_.matrixL().solve(kx);
  const double var = std::max(0.0, signal_ * (1.0 - v.squaredNorm()));
  return {y_mean_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

double expected_improvement(double mean, double stddev, double best) {
  if (!(stddev > 0.0)) return std::max(best - mean, 0.0);
  const double z = (best - mean) / stddev;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return (best - mean) * cdf + stddev * pdf;
}

}  // namespace sbl
