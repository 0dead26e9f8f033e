#pragma once

#include <optional>

#include <Eigen/Cholesky>

#include "sbl/types.hpp"

namespace sbl {

struct GPPrediction {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Gaussian-process regression with a squared-exponential ARD kernel
///
///   k(x, x') = s2 exp(-0.5 sum_d ((x_d - x'_d) / l_d)^2),
///
/// noise variance s2 * g, and targets standardized internally. Length
/// scales and g are chosen on a log grid by profile likelihood (s2 in
/// closed form).
class GaussianProcess {
 public:
  /// Rows of x are inputs. Returns nullopt when no kernel matrix could be
  /// factorized even after jitter escalation.
  static std::optional<GaussianProcess> fit(const Matrix& x, const Vector& y);

  GPPrediction predict(const Vector& x) const;

  const Vector& length_scales() const { return length_; }
  double noise_ratio() const { return noise_; }
  double signal_variance() const { return signal_; }

 private:
  Matrix x_;
  Vector length_;
  double noise_ = 0.0;
  double signal_ = 1.0;  // in standardized units
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  Eigen::LLT<Matrix> chol_;
  Vector alpha_;  // (C + gI)^{-1} y_standardized
};

/// E[max(best - Y, 0)] for Y ~ N(mean, stddev^2) (minimization).
double expected_improvement(double mean, double stddev, double best);

}  // namespace sbl
