#pragma once

#include "sbl/stationarity.hpp"
#include "sbl/types.hpp"

namespace sbl {

/// State of the smoothing continuation between outer iterations. Entry k of
/// a trace holds (w^k, lambda^k, zeta^k, eta^k) together with the smoothing
/// parameter mu_k and inner tolerance eps_hat_k to be used next.
struct IterateState {
  int k = 0;
  Vector w;
  Vector lambda;
  Multipliers mult;
  double mu = 1.0;
  double eps_hat = 0.0;
  int inner_iterations = 0;
  bool inner_converged = true;
  /// Wall time of the inner solve that produced this iterate.
  double inner_seconds = 0.0;
};

}  // namespace sbl
