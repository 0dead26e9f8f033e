#include <doctest.h>

#include <algorithm>
#include <random>

#include <sbl/bayes_opt.hpp>
#include <sbl/dataset.hpp>
#include <sbl/driver.hpp>
#include <sbl/gaussian_process.hpp>
#include <sbl/grid_search.hpp>
#include <sbl/lower_solver.hpp>

#include "oracles.hpp"

using namespace sbl;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

BilevelProblem desk_problem(RegularizerSpec regs, std::uint64_t seed = 1) {
  const Table t = make_synthetic({.samples = 60, .noise = 0.5, .seed = seed});
  return make_problem(split_three_way(t, {.shuffle_seed = seed}), {}, regs);
}

// Identity-feature l1 problem: w*(lambda) is the coordinatewise soft
// threshold of the training targets.
BilevelProblem closed_form_problem() {
  Vector a(3), b(3);
  a << 2.0, -0.6, 0.9;
  b << 1.2, -0.1, 0.2;
  return oracle::separable_problem(a, b, RegularizerSpec::lp(1.0));
}

double closed_form_err(const BilevelProblem& p, double lam) {
  const Vector& a = p.lower.targets();
  const Vector& b = p.upper.targets();
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double w = oracle::soft_threshold(a(i), lam);
    s += (w - b(i)) * (w - b(i));
  }
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("lower solver matches the soft threshold") {
  for (double a : {-2.0, 0.1, 3.0}) {
    for (double lam : {0.1, 1.0, 10.0}) {
      const BilevelProblem p = oracle::scalar_problem(a, 0.0);
      const LowerResult r = solve_lower(p, scalar(lam), scalar(0.0));
      CAPTURE(a);
      CAPTURE(lam);
      CHECK(r.converged);
      CHECK(std::abs(r.w(0) - oracle::soft_threshold(a, lam)) <= 1e-6);
    }
  }
}

TEST_CASE("lambda = 0 gives a critical point of g") {
  std::mt19937_64 rng(8);
  for (auto kind : {LossKind::squared, LossKind::logistic}) {
    const BilevelProblem p =
        oracle::random_problem(rng, 4, 20, RegularizerSpec::lp(0.5), kind);
    const LowerResult r = solve_lower(p, scalar(0.0), Vector::Zero(4));
    CHECK(r.converged);
    CHECK(p.lower.evaluate(r.w, Order::gradient).grad.lpNorm<Eigen::Infinity>() <=
          1e-6);
  }
}

TEST_CASE("p = 0.5 scalar problems match a brute-force scan") {
  for (double a : {2.0, -1.5, 0.4}) {
    for (double lam : {0.3, 1.0}) {
      const BilevelProblem p = oracle::scalar_problem(a, 0.0, 0.5);
      auto obj = [&](double w) {
        return (w - a) * (w - a) + lam * std::sqrt(std::abs(w));
      };
      const double scan = oracle::scan_argmin(obj, -4.0, 4.0, 10000001);
      const LowerResult r = solve_lower(p, scalar(lam), scalar(0.0));
      CAPTURE(a);
      CAPTURE(lam);
      CHECK(r.converged);
      CHECK(obj(r.w(0)) <= obj(scan) + 1e-4);
    }
  }
}

TEST_CASE("lower solutions pass both stationarity checks") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> logu(-3.0, 2.0);
  for (int t = 0; t < 40; ++t) {
    const double p = (t % 3 == 0) ? 1.0 : (t % 3 == 1 ? 0.8 : 0.5);
    const RegularizerSpec regs =
        t % 2 ? RegularizerSpec::elastic_net(p) : RegularizerSpec::lp(p);
    const BilevelProblem prob = oracle::random_problem(rng, 5, 15, regs);
    Vector lambda(regs.count());
    for (auto& v : lambda) v = std::pow(10.0, logu(rng));
    const LowerResult r = solve_lower(prob, lambda, Vector::Zero(5));
    CAPTURE(t);
    REQUIRE(r.converged);
    const ActiveSet act = ActiveSet::classify(r.w);
    CHECK(subdiff_stationarity(prob, r.w, lambda, act).stationary);
    if (p < 1.0) {
      CHECK(scaled_first_order_residual(prob, r.w, lambda).lpNorm<Eigen::Infinity>() <=
            1e-5);
    }
  }
}

TEST_CASE("grids") {
  const std::vector<double> g = default_lp_grid().axes.at(0);
  REQUIRE(g.size() == 30);
  for (int i = 0; i < 30; ++i) {
    const double expect = std::pow(10.0, -4.0 + 8.0 * i / 29.0);
    CHECK(std::abs(g[static_cast<std::size_t>(i)] - expect) <= 1e-12 * expect);
  }
  const GridSpec en = default_elastic_net_grid();
  REQUIRE(en.axes.size() == 2);
  CHECK(en.axes[0] == std::vector<double>{1e-4, 1e-2, 1.0, 1e2, 1e4});
  REQUIRE(en.axes[1].size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(en.axes[1][static_cast<std::size_t>(i)] ==
          doctest::Approx(std::pow(10.0, -4.0 + 8.0 * i / 5.0)));
  }
  CHECK(en.size() == 30);
  CHECK(en.points()[1] == (Vector(2) << 1e-4, en.axes[1][1]).finished());
  CHECK(log_grid(2.0, 5.0, 1) == std::vector<double>{100.0});
}

TEST_CASE("grid search examples") {
  const BilevelProblem p = closed_form_problem();
  SUBCASE("single point") {
    const BaselineResult r = grid_search(p, GridSpec{{{0.7}}});
    CHECK(r.lambda(0) == 0.7);
    CHECK(r.history.size() == 1);
  }
  SUBCASE("closed-form sweep") {
    const BaselineResult r = grid_search(p, default_lp_grid());
    double best = std::numeric_limits<double>::infinity(), arg = 0.0;
    const GridSpec grid = default_lp_grid();
    for (double lam : grid.axes[0]) {
      const double e = closed_form_err(p, lam);
      if (e < best - 1e-12) {
        best = e;
        arg = lam;
      }
    }
    CHECK(r.lambda(0) == arg);
    CHECK(r.err_val == doctest::Approx(best).epsilon(1e-9));
  }
  SUBCASE("order independence") {
    GridSpec shuffled = default_lp_grid();
    std::mt19937_64 rng(3);
    std::shuffle(shuffled.axes[0].begin(), shuffled.axes[0].end(), rng);
    const BaselineResult a = grid_search(p, default_lp_grid());
    const BaselineResult b = grid_search(p, shuffled);
    CHECK(a.lambda == b.lambda);
    CHECK(a.err_val == b.err_val);
  }
  SUBCASE("ties go to the smaller lambda") {
    // Every lambda >= 4 zeroes all coordinates.
    const BaselineResult r = grid_search(p, GridSpec{{{100.0, 10.0, 50.0}}});
    CHECK(r.lambda(0) == 10.0);
  }
}

TEST_CASE("a grid that contains the bilevel answer does at least as well") {
  const BilevelProblem p = desk_problem(RegularizerSpec::lp(1.0), 2);
  const DriverResult d = run_bilevel(p);
  GridSpec grid = default_lp_grid();
  grid.axes[0].push_back(d.lambda_star(0));
  const BaselineResult r = grid_search(p, grid);
  CHECK(r.err_val <= validation_error(p, d.w_star) + 1e-9);
}

TEST_CASE("grid search contract errors") {
  const BilevelProblem p = closed_form_problem();
  CHECK_THROWS_AS(grid_search(p, GridSpec{}), ContractError);
  CHECK_THROWS_AS(grid_search(p, default_elastic_net_grid()), ContractError);
  LowerSolveOptions hopeless;
  hopeless.newton.max_iterations = 0;
  hopeless.mu_stop = 0.5;
  hopeless.mu_min = 0.5;
  CHECK_THROWS_AS(grid_search(p, GridSpec{{{1.0, 2.0}}}, hopeless),
                  std::runtime_error);
}

TEST_CASE("Gaussian process regression") {
  Matrix x(6, 1);
  Vector y(6);
  for (int i = 0; i < 6; ++i) {
    x(i, 0) = -2.0 + 0.8 * i;
    y(i) = std::sin(x(i, 0));
  }
  const auto gp = GaussianProcess::fit(x, y);
  REQUIRE(gp.has_value());
  for (int i = 0; i < 6; ++i) {
    const GPPrediction pr = gp->predict(x.row(i).transpose());
    CHECK(pr.mean == doctest::Approx(y(i)).epsilon(1e-2));
  }
  const GPPrediction far = gp->predict(Vector::Constant(1, 30.0));
  const GPPrediction near = gp->predict(Vector::Constant(1, 0.4));
  CHECK(far.stddev > near.stddev);
}

TEST_CASE("expected improvement") {
  CHECK(expected_improvement(1.0, 0.0, 3.0) == 2.0);
  CHECK(expected_improvement(5.0, 0.0, 3.0) == 0.0);
  // Numerical integral of max(best - y, 0) under N(mean, sd^2).
  const double mean = 0.3, sd = 0.7, best = 0.1;
  double integral = 0.0;
  const int steps = 200000;
  const double lo = mean - 12 * sd, hi = mean + 12 * sd, h = (hi - lo) / steps;
  for (int i = 0; i < steps; ++i) {
    const double y = lo + (i + 0.5) * h;
    const double dens = std::exp(-0.5 * std::pow((y - mean) / sd, 2)) /
                        (sd * std::sqrt(2.0 * M_PI));
    integral += std::max(best - y, 0.0) * dens * h;
  }
  CHECK(expected_improvement(mean, sd, best) == doctest::Approx(integral).epsilon(1e-6));
}

TEST_CASE("Bayesian optimization on a smooth 1-d objective") {
  auto objective = [](const Vector& x) {
    return 1.0 + (x(0) - 1.3) * (x(0) - 1.3);
  };
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    BOConfig cfg;
    cfg.seed = seed;
    const BOResult r = bayes_opt_minimize(objective, 1, cfg);
    CAPTURE(seed);
    CHECK(r.ys.size() == 30);
    CHECK(r.best_y <= 1.05);
    CHECK_FALSE(r.fell_back);
    for (std::size_t i = 0; i < r.xs.size(); ++i) {
      CHECK(r.xs[i](0) >= -4.0);
      CHECK(r.xs[i](0) <= 4.0);
      if (i) CHECK(r.incumbent[i] <= r.incumbent[i - 1]);
    }
  }
}

TEST_CASE("Bayesian optimization design and determinism") {
  auto objective = [](const Vector& x) { return x.squaredNorm(); };
  BOConfig design_only;
  design_only.budget = 5;
  design_only.initial = 5;
  const BOResult a = bayes_opt_minimize(objective, 2, design_only);
  const BOResult b = bayes_opt_minimize(objective, 2, BOConfig{});
  const BOResult c = bayes_opt_minimize(objective, 2, BOConfig{});
  REQUIRE(a.xs.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a.xs[i] == b.xs[i]);
  CHECK(a.best_y == *std::min_element(a.ys.begin(), a.ys.end()));
  for (std::size_t i = 0; i < b.xs.size(); ++i) CHECK(b.xs[i] == c.xs[i]);

  BOConfig bad;
  bad.initial = 1;
  CHECK_THROWS_AS(validate(bad), ContractError);
  bad = {};
  bad.budget = 3;
  CHECK_THROWS_AS(validate(bad), ContractError);
}

TEST_CASE("Bayesian optimization cannot beat a dense sweep") {
  const BilevelProblem p = closed_form_problem();
  double floor = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 100000; ++i) {
    floor = std::min(floor, closed_form_err(p, std::pow(10.0, -4.0 + 8.0 * i / 1e5)));
  }
  const BaselineResult r = bayes_opt(p);
  CHECK(r.err_val >= floor - 1e-12);
  CHECK(r.err_val <= floor + 1e-2);
  CHECK(r.history.size() == 30);
}

}  // TEST_SUITE
