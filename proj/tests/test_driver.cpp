#include <doctest.h>

#include <sbl/dataset.hpp>
#include <sbl/driver.hpp>

#include "oracles.hpp"

using namespace sbl;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

BilevelProblem desk_problem(RegularizerSpec regs, std::uint64_t seed = 1) {
  const Table t = make_synthetic({.samples = 60, .noise = 0.5, .seed = seed});
  return make_problem(split_three_way(t, {.shuffle_seed = seed}), {}, regs);
}

}  // namespace

TEST_SUITE("bilevel_driver") {

TEST_CASE("smoothing schedule follows mu0 beta1^k") {
  const BilevelProblem p = desk_problem(RegularizerSpec::lp(1.0));
  const DriverResult r = run_bilevel(p);
  REQUIRE(r.trace.size() > 10);
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    CHECK(r.trace[k].mu == std::pow(0.95, static_cast<double>(k)));
    CHECK(r.trace[k].k == static_cast<int>(k));
  }

  DriverConfig faithful;
  faithful.tolerance_mode = InnerToleranceMode::faithful;
  faithful.eps_hat0 = 1e-2;
  faithful.beta2 = 0.9;
  faithful.max_outer = 30;
  const DriverResult f = run_bilevel(p, faithful);
  for (std::size_t k = 0; k < f.trace.size(); ++k) {
    CHECK(f.trace[k].eps_hat ==
          std::max(1e-10, 1e-2 * std::pow(0.9, static_cast<double>(k))));
  }
}

TEST_CASE("scalar problem matches a brute-force lambda sweep") {
  // Lower: (w - 1)^2 + lambda |w|, so w*(lambda) = max(1 - lambda/2, 0).
  // Upper: (w - 0.3)^2.
  const BilevelProblem p = oracle::scalar_problem(1.0, 0.3);
  const double best_lambda = oracle::scan_argmin(
      [](double lam) {
        const double w = oracle::soft_threshold(1.0, lam);
        return (w - 0.3) * (w - 0.3);
      },
      0.0, 4.0, 1000000);
  const double best_w = oracle::soft_threshold(1.0, best_lambda);

  const DriverResult r = run_bilevel(p);
  CHECK(r.terminated_normally());
  CHECK(std::abs(r.w_star(0) - best_w) <= 1e-3);
  CHECK(std::abs(r.lambda_star(0) - best_lambda) <= 1e-3);
  const SBKKTReport rep = sbkkt_residual(p, r.w_star, r.lambda_star, r.report.mult,
                                         ActiveSet::classify(r.w_star), {1e-4});
  CHECK(rep.all_pass());
}

TEST_CASE("validation equal to training drives lambda to zero") {
  std::mt19937_64 rng(5);
  BilevelProblem p = oracle::random_problem(rng, 3, 12, RegularizerSpec::lp(1.0));
  p.upper = p.lower;
  // lambda reaches the boundary in the first outer iteration, where the
  // SB-KKT blocks already vanish, so rule (a) fires before rule (b) can.
  const DriverResult r = run_bilevel(p);
  CHECK(r.terminated_normally());
  CHECK(r.lambda_star(0) <= 1e-5);
}

TEST_CASE("sparsity examples") {
  CHECK(sparsity(Vector::Zero(4)) == 1.0);
  Vector w(4);
  w << 1.0, 5e-5, 0.0, -2.0;
  CHECK(sparsity(w) == 0.5);
  CHECK(sparsity(Vector::Constant(5, -3.0)) == 0.0);
}

TEST_CASE("trace invariants on the desk suite") {
  for (std::uint64_t seed : {1u, 2u}) {
    for (const RegularizerSpec& regs :
         {RegularizerSpec::lp(0.5), RegularizerSpec::elastic_net()}) {
      const BilevelProblem p = desk_problem(regs, seed);
      const DriverResult a = run_bilevel(p);
      const DriverResult b = run_bilevel(p);
      REQUIRE(a.trace.size() == b.trace.size());
      for (std::size_t k = 0; k < a.trace.size(); ++k) {
        CHECK((a.trace[k].lambda.array() >= 0.0).all());
        CHECK(a.trace[k].w == b.trace[k].w);
        CHECK(a.trace[k].lambda == b.trace[k].lambda);
      }
      const auto rows = trace_rows(p, a.trace);
      REQUIRE(rows.size() == a.trace.size());
      CHECK(rows.back().cond <= 1e-3 * std::sqrt(5.0));
      CHECK(rows[0].lambda_change == 0.0);
    }
  }
}

TEST_CASE("stopping safeguards") {
  const BilevelProblem p = desk_problem(RegularizerSpec::lp(1.0));
  DriverConfig capped;
  capped.max_outer = 3;
  const DriverResult r = run_bilevel(p, capped);
  CHECK(r.reason == StopReason::max_outer);
  CHECK(r.trace.size() == 4);
  CHECK_FALSE(r.terminated_normally());

  DriverConfig hurried;
  hurried.time_budget_s = 1e-9;
  CHECK(run_bilevel(p, hurried).reason == StopReason::time_budget);
}

TEST_CASE("configuration checks") {
  const BilevelProblem p = oracle::scalar_problem(1.0, 0.3);
  DriverConfig cfg;
  CHECK_NOTHROW(validate(cfg, p));
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(validate(cfg, p), ContractError);
  cfg = {};
  cfg.mu0 = 0.0;
  CHECK_THROWS_AS(validate(cfg, p), ContractError);
  cfg = {};
  cfg.lambda0 = Vector::Constant(2, 1.0);
  CHECK_THROWS_AS(validate(cfg, p), ContractError);
  cfg = {};
  cfg.lambda0 = scalar(-1.0);
  CHECK_THROWS_AS(validate(cfg, p), ContractError);
}

TEST_CASE("a negative mu0 runs the same schedule in magnitude") {
  const BilevelProblem p = oracle::scalar_problem(1.0, 0.3);
  DriverConfig neg;
  neg.mu0 = -1.0;
  const DriverResult a = run_bilevel(p, neg);
  const DriverResult b = run_bilevel(p);
  CHECK(a.lambda_star(0) == doctest::Approx(b.lambda_star(0)));
}

}  // TEST_SUITE
