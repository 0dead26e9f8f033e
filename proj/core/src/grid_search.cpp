#include "sbl/grid_search.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbl {

std::size_t GridSpec::size() const {
  if (axes.empty()) return 0;
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.size();
  return total;
}

std::vector<Vector> GridSpec::points() const {
  std::vector<Vector> out;
  const std::size_t total = size();
  out.reserve(total);
  const auto dims = static_cast<Eigen::Index>(axes.size());
  for (std::size_t flat = 0; flat < total; ++flat) {
    Vector pt(dims);
    std::size_t rest = flat;
    for (Eigen::Index d = dims - 1; d >= 0; --d) {
      const auto& axis = axes[static_cast<std::size_t>(d)];
      pt(d) = axis[rest % axis.size()];
      rest /= axis.size();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<double> log_grid(double lo_exponent, double hi_exponent,
                             int count) {
  require(count >= 1, "grid count must be positive");
  require(std::isfinite(lo_exponent) && std::isfinite(hi_exponent),
          "grid exponents must be finite");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double e =
        count == 1 ? lo_exponent
                   : lo_exponent + (hi_exponent - lo_exponent) * i / (count - 1);
    out.push_back(std::pow(10.0, e));
  }
  return out;
}

GridSpec default_lp_grid() { return {{log_grid(-4.0, 4.0, 30)}}; }

GridSpec default_elastic_net_grid() {
  return {{log_grid(-4.0, 4.0, 5), log_grid(-4.0, 4.0, 6)}};
}

GridSpec default_grid(const RegularizerSpec& regs) {
  require(regs.count() <= 2, "no default grid for more than two hyperparameters");
  return regs.count() == 1 ? default_lp_grid() : default_elastic_net_grid();
}

double validation_error(const BilevelProblem& problem, const Vector& w) {
  return eval_f(problem, w, Order::value).value /
         static_cast<double>(problem.upper.samples());
}

bool preferred(double err_a, const Vector& lambda_a, double err_b,
               const Vector& lambda_b) {
  if (err_a != err_b) return err_a < err_b;
  return std::lexicographical_compare(lambda_a.begin(), lambda_a.end(),
                                      lambda_b.begin(), lambda_b.end());
}

BaselineResult grid_search(const BilevelProblem& problem, const GridSpec& grid,
                           const LowerSolveOptions& lower) {
  require(grid.size() > 0, "grid must be nonempty");
  require(static_cast<int>(grid.axes.size()) == problem.r(),
          "grid arity differs from the hyperparameter count");
  for (const auto& axis : grid.axes) {
    for (double v : axis) {
      require(std::isfinite(v) && v >= 0.0, "grid values must be finite and >= 0");
    }
  }

  BaselineResult out;
  const Vector zero = Vector::Zero(problem.dims());
  bool found = false;
  for (const Vector& lambda : grid.points()) {
    LowerResult lr = solve_lower(problem, lambda, zero, lower);
    Evaluated e{lambda, lr.w, validation_error(problem, lr.w), lr.converged};
    if (e.converged && (!found || preferred(e.err_val, e.lambda, out.err_val,
                                            out.lambda))) {
      found = true;
      out.lambda = e.lambda;
      out.w = e.w;
      out.err_val = e.err_val;
      out.converged = true;
    }
    out.history.push_back(std::move(e));
  }
  if (!found) throw std::runtime_error("grid search: no grid point converged");
  return out;
}

}  // namespace sbl
