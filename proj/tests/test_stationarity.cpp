#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <random>

#include <json.hpp>

#include <sbl/diagnostics.hpp>
#include <sbl/driver.hpp>
#include <sbl/report_io.hpp>
#include <sbl/stationarity.hpp>

#include "oracles.hpp"

using namespace sbl;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Vector scalar(double x) { return Vector::Constant(1, x); }

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Separable problem g = sum (w_i - a_i)^2 whose nonzero coordinates of w
// satisfy the smooth stationarity equation at lambda_1, by choice of a.
Vector stationary_targets(const Vector& w, double lam1, double p,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Vector a(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    a(i) = w(i) == 0.0 ? z(rng)
                       : w(i) + 0.5 * p * lam1 * sgn(w(i)) *
                                    std::pow(std::abs(w(i)), p - 1.0);
  }
  return a;
}

}  // namespace

TEST_SUITE("stationarity") {

TEST_CASE("approximate KKT residual, plug-in example") {
  const BilevelProblem p = oracle::scalar_problem(1.0, 0.0);
  const ApproxKKTResidual r = approx_kkt_residual(
      p, scalar(1.0), scalar(0.0), Multipliers::zeros(1, 1), {1.0, 1.0});
  CHECK(r.eps1(0) == doctest::Approx(2.0));
  CHECK(r.eps2 == 0.0);
  CHECK(r.eps3.size() == 0);
  CHECK(r.eps4(0) == 0.0);
  CHECK(r.eps5 == 0.0);
  CHECK(r.feasible);
}

TEST_CASE("approximate KKT residual: norm and the constraint block") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  BilevelProblem p =
      oracle::random_problem(rng, 4, 9, RegularizerSpec::elastic_net(0.5));
  // A critical point of g with lambda = 0 satisfies the constraint exactly.
  const Matrix& x = p.lower.features();
  const Vector wg = (x.transpose() * x).ldlt().solve(x.transpose() * p.lower.targets());
  const ApproxKKTResidual at_crit = approx_kkt_residual(
      p, wg, Vector::Zero(2), Multipliers::zeros(4, 2), {0.1, 0.5});
  CHECK(at_crit.eps4.cwiseAbs().maxCoeff() <= 1e-10);

  for (int t = 0; t < 20; ++t) {
    Vector w(4), zeta(4);
    for (auto& v : w) v = z(rng);
    for (auto& v : zeta) v = z(rng);
    const Vector lambda = vec({std::abs(z(rng)), std::abs(z(rng))});
    const Multipliers m{zeta, vec({std::abs(z(rng)), std::abs(z(rng))})};
    const ApproxKKTResidual r = approx_kkt_residual(p, w, lambda, m, {0.3, 0.5});
    const double sq = r.eps1.squaredNorm() + r.eps2 * r.eps2 +
                      r.eps3.squaredNorm() + r.eps4.squaredNorm() +
                      r.eps5 * r.eps5;
    CHECK(r.norm * r.norm == doctest::Approx(sq).epsilon(1e-12));
  }
  const ApproxKKTResidual neg = approx_kkt_residual(
      p, wg, vec({-1.0, 0.0}), Multipliers::zeros(4, 2), {0.1, 0.5});
  CHECK_FALSE(neg.feasible);
  CHECK_THROWS_AS(approx_kkt_residual(p, Vector::Zero(3), Vector::Zero(2),
                                      Multipliers::zeros(4, 2), {0.1, 0.5}),
                  ContractError);
}

TEST_CASE("SB-KKT at the soft-threshold zero") {
  // g = (w - 1)^2 with lambda_1 = 2 puts the lower minimizer at 0.
  REQUIRE(oracle::soft_threshold(1.0, 2.0) == 0.0);
  const BilevelProblem p = oracle::scalar_problem(1.0, 0.3);
  const Vector w = scalar(0.0);
  const SBKKTReport rep = sbkkt_residual(p, w, scalar(2.0), Multipliers::zeros(1, 1),
                                         ActiveSet::classify(w));
  for (double v : rep.block_violation) CHECK(v == 0.0);
  CHECK(rep.all_pass());
}

TEST_CASE("SB-KKT with multipliers from a direct linear solve") {
  std::mt19937_64 rng(12);
  for (double p : {0.5, 1.0}) {
    BilevelProblem prob =
        oracle::random_problem(rng, 4, 10, RegularizerSpec::elastic_net(p));
    const Vector w = vec({0.7, -1.2, 0.4, 2.0});
    const Vector lambda = vec({0.8, 0.3});
    const Evaluation G = eval_G(prob, w, lambda.tail(1));
    const Vector wp = w.cwiseAbs().array().pow(p);
    const Matrix W2 = w.cwiseAbs2().asDiagonal();
    Matrix H = W2 * G.hess;
    H.diagonal() += lambda(0) * p * (p - 1.0) * wp;
    const Vector zeta = H.lu().solve(-W2 * eval_f(prob, w).grad);
    double eta1 = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i) {
      eta1 += p * sgn(w(i)) * std::pow(std::abs(w(i)), p - 1.0) * zeta(i);
    }
    const Vector eta = vec({eta1, 2.0 * w.dot(zeta)});
    const SBKKTReport rep =
        sbkkt_residual(prob, w, lambda, {zeta, eta}, ActiveSet::classify(w));
    CHECK(rep.res_stationarity_w.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(std::abs(rep.res_eta1) <= 1e-10);
    CHECK(rep.res_zeta_active.size() == 0);
    CHECK(rep.res_eta_rest.cwiseAbs().maxCoeff() <= 1e-10);
    // Recovery reproduces the same multipliers when H is nonsingular.
    const Multipliers rec = recover_multipliers(prob, w, lambda, ActiveSet::classify(w));
    CHECK((rec.zeta - zeta).norm() <= 1e-8 * (1.0 + zeta.norm()));
  }
}

TEST_CASE("SB-KKT at w = 0") {
  std::mt19937_64 rng(13);
  const BilevelProblem p = oracle::random_problem(rng, 3, 6, RegularizerSpec::lp(0.5));
  const Vector w = Vector::Zero(3);
  const Multipliers m{vec({0.1, -0.2, 0.0}), scalar(0.0)};
  const SBKKTReport rep = sbkkt_residual(p, w, scalar(4.0), m, ActiveSet::classify(w));
  CHECK(rep.res_scaled_lower.isZero());
  CHECK(rep.active.indices.size() == 3);
  CHECK(rep.res_zeta_active.cwiseAbs().maxCoeff() == doctest::Approx(0.2));
  CHECK_FALSE(rep.pass[3]);
  CHECK(rep.scale == 1.0);
}

TEST_CASE("scaled first-order residual examples") {
  for (double a : {-2.0, 0.1, 3.0}) {
    for (double lam : {0.1, 1.0, 10.0}) {
      const BilevelProblem p = oracle::scalar_problem(a, 0.0);
      const Vector w = scalar(oracle::soft_threshold(a, lam));
      CHECK(scaled_first_order_residual(p, w, scalar(lam)).norm() <= 1e-10);
    }
  }
  std::mt19937_64 rng(1);
  const BilevelProblem p = oracle::random_problem(rng, 3, 5, RegularizerSpec::lp(0.8));
  CHECK(scaled_first_order_residual(p, Vector::Zero(3), scalar(7.0)).isZero());
  const Matrix& x = p.lower.features();
  const Vector crit = (x.transpose() * x).ldlt().solve(x.transpose() * p.lower.targets());
  CHECK(scaled_first_order_residual(p, crit, scalar(0.0)).norm() <= 1e-10);
}

TEST_CASE("subdifferential stationarity examples") {
  const BilevelProblem p1 = oracle::scalar_problem(3.0, 0.0);
  const Vector w = scalar(oracle::soft_threshold(3.0, 1.0));
  CHECK(subdiff_stationarity(p1, w, scalar(1.0), ActiveSet::classify(w)).stationary);

  // dG/dw(0) = -6, so lambda_1 = 5 leaves 0 outside the subdifferential.
  const Vector zero = scalar(0.0);
  const StationarityCheck off =
      subdiff_stationarity(p1, zero, scalar(5.0), ActiveSet::classify(zero));
  CHECK_FALSE(off.stationary);
  CHECK(off.margin == doctest::Approx(1.0));

  // p < 1: zero coordinates impose nothing.
  std::mt19937_64 rng(4);
  const Vector wz = vec({0.0, 0.8, -1.5});
  const BilevelProblem p05 = oracle::separable_problem(
      stationary_targets(wz, 2.0, 0.5, rng), Vector::Zero(3),
      RegularizerSpec::lp(0.5));
  CHECK(subdiff_stationarity(p05, wz, scalar(2.0), ActiveSet::classify(wz)).stationary);
}

TEST_CASE("the two stationarity notions agree for p < 1") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::bernoulli_distribution zero(0.4), perturb(0.5), neg(0.5);
  int disagreements = 0, stationary = 0;
  for (int t = 0; t < 1000; ++t) {
    const double p = t % 2 ? 0.5 : 0.8;
    Vector w(4);
    for (auto& v : w) v = zero(rng) ? 0.0 : (neg(rng) ? -u(rng) : u(rng));
    const double lam = u(rng);
    Vector a = stationary_targets(w, lam, p, rng);
    if (perturb(rng)) a(t % 4) += 0.05;
    const BilevelProblem prob =
        oracle::separable_problem(a, Vector::Zero(4), RegularizerSpec::lp(p));
    const bool sub =
        subdiff_stationarity(prob, w, scalar(lam), ActiveSet::classify(w), 1e-9)
            .stationary;
    const bool scaled =
        scaled_first_order_residual(prob, w, scalar(lam)).lpNorm<Eigen::Infinity>() <=
        1e-9;
    disagreements += sub != scaled;
    stationary += sub;
  }
  CHECK(disagreements == 0);
  CHECK(stationary > 200);
  CHECK(stationary < 800);
}

TEST_CASE("subdifferential stationarity implies the scaled condition for p = 1") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::normal_distribution<double> z;
  int stationary = 0;
  for (int t = 0; t < 500; ++t) {
    Vector a(3);
    for (auto& v : a) v = 2.0 * z(rng);
    const double lam = u(rng);
    Vector w(3);
    for (Eigen::Index i = 0; i < 3; ++i) w(i) = oracle::soft_threshold(a(i), lam);
    if (t % 2) w(t % 3) += 0.01;
    const BilevelProblem prob =
        oracle::separable_problem(a, Vector::Zero(3), RegularizerSpec::lp(1.0));
    if (subdiff_stationarity(prob, w, scalar(lam), ActiveSet::classify(w), 1e-9)
            .stationary) {
      ++stationary;
      CHECK(scaled_first_order_residual(prob, w, scalar(lam))
                .lpNorm<Eigen::Infinity>() <= 1e-9);
    }
  }
  CHECK(stationary >= 250);
}

TEST_CASE("cond agrees across the two code paths") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  const BilevelProblem p =
      oracle::random_problem(rng, 5, 8, RegularizerSpec::elastic_net(0.8));
  for (int t = 0; t < 50; ++t) {
    Vector w(5);
    for (auto& v : w) v = z(rng);
    const Vector lambda = vec({std::abs(z(rng)), std::abs(z(rng))});
    const SBKKTReport rep = sbkkt_residual_recovered(p, w, lambda, ActiveSet::classify(w));
    const double direct = scaled_first_order_residual(p, w, lambda).norm();
    CHECK(std::abs(rep.cond - direct) <= 1e-14 * std::max(1.0, direct));
    CHECK(std::abs(rep.res_scaled_lower.norm() - direct) <= 1e-14 * std::max(1.0, direct));
    CHECK(cond_metric(p, w, lambda) == doctest::Approx(direct).epsilon(1e-14));
  }
}

TEST_CASE("complementarity is symmetric in (lambda, eta)") {
  const BilevelProblem p = oracle::separable_problem(
      vec({1.0, -2.0}), vec({0.5, 0.5}), RegularizerSpec::elastic_net());
  const Vector w = vec({0.3, -0.7});
  const ActiveSet act = ActiveSet::classify(w);
  const Vector lam = vec({0.4, 1.5}), eta = vec({-0.1, 2.0});
  const Vector zeta = vec({0.2, 0.1});
  const double a = sbkkt_residual(p, w, lam, {zeta, eta}, act).res_complementarity;
  const double b = sbkkt_residual(p, w, eta, {zeta, lam}, act).res_complementarity;
  CHECK(a == b);
  CHECK(a == doctest::Approx(std::abs(lam.dot(eta))));
}

TEST_CASE("local optimum of the one-level problem satisfies SB-KKT") {
  // Two variables (w, lambda_1). On the constraint manifold of the scalar
  // lower problem g = (w - a)^2, each w in (0, a) has a unique lambda_1 >= 0;
  // minimize f = (w - b)^2 over it by grid refinement.
  const double a = 1.0, b = 0.3;
  for (double p : {0.5, 0.8, 1.0}) {
    auto lambda_of = [&](double w) {
      return 2.0 * (a - w) * std::pow(w, 1.0 - p) / p;
    };
    auto upper = [&](double w) { return (w - b) * (w - b); };
    double lo = 1e-6, hi = a - 1e-6, best = 0.0;
    for (int round = 0; round < 6; ++round) {
      best = oracle::scan_argmin(upper, lo, hi, 2001);
      const double span = (hi - lo) / 100.0;
      lo = std::max(1e-9, best - span);
      hi = std::min(a, best + span);
    }
    const BilevelProblem prob = oracle::scalar_problem(a, b, p);
    const Vector w = scalar(best);
    const SBKKTReport rep = sbkkt_residual_recovered(
        prob, w, scalar(lambda_of(best)), ActiveSet::classify(w), {1e-4});
    CAPTURE(p);
    CHECK(rep.all_pass());
  }
}

TEST_CASE("active set rule and zeroing") {
  const Vector w = vec({1.0, 5e-5, 0.0, -2.0});
  const ActiveSet a = ActiveSet::classify(w);
  CHECK(a.indices == std::vector<Eigen::Index>{1, 2});
  CHECK(a.contains(1));
  CHECK_FALSE(a.contains(3));
  CHECK(a.mask() == std::vector<bool>{false, true, true, false});
  CHECK(zero_active(w, a) == vec({1.0, 0.0, 0.0, -2.0}));
  CHECK(ActiveSet::classify(Vector::Zero(3)).indices.size() == 3);
}

TEST_CASE("assumption diagnostics on synthetic traces") {
  const BilevelProblem p = oracle::scalar_problem(1.0, 0.3);
  std::vector<IterateState> flat, decaying;
  for (int k = 0; k < 400; ++k) {
    IterateState s;
    s.k = k;
    s.w = scalar(0.3);
    s.lambda = scalar(10.0);
    s.mult = Multipliers::zeros(1, 1);
    flat.push_back(s);
    s.lambda = scalar(10.0 * std::pow(0.95, k));
    decaying.push_back(s);
  }
  const AssumptionReport a = assumption_diagnostics(flat, p);
  CHECK(a.a1_ok);
  CHECK(a.a1_margin == doctest::Approx(10.0));
  CHECK(a.a2_ok);
  CHECK_FALSE(assumption_diagnostics(decaying, p).a1_ok);
}

TEST_CASE("A4 holds on a desk-scale l1 run") {
  const Table t = make_synthetic({.samples = 60, .noise = 0.5, .seed = 1});
  const Dataset d = split_three_way(t, {.shuffle_seed = 1});
  const BilevelProblem p = make_problem(d, {}, RegularizerSpec::lp(1.0));
  const DriverResult r = run_bilevel(p);
  std::vector<IterateState> trace = r.trace;
  trace.back().w = r.w_star;
  trace.back().lambda = r.lambda_star;
  const AssumptionReport rep = assumption_diagnostics(trace, p);
  CHECK(rep.a4_min_singular_value > 1e-8);
  CHECK(rep.a4_ok);
}

TEST_CASE("report serialization") {
  const BilevelProblem p = oracle::scalar_problem(1.0, 0.3);
  const Vector w = scalar(0.3);
  const SBKKTReport rep =
      sbkkt_residual_recovered(p, w, scalar(1.4), ActiveSet::classify(w));
  const std::string kv = report_to_key_value(rep);
  CHECK(kv.find("cond=") != std::string::npos);
  CHECK(kv.find("block6.complementarity.pass=") != std::string::npos);
  CHECK(kv.find("multipliers=recovered") != std::string::npos);
  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j["blocks"].size() == 6);
  CHECK(j["all_pass"].get<bool>() == rep.all_pass());

  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Vector v(20);
  for (auto& x : v) x = z(rng) * std::pow(10.0, static_cast<int>(z(rng) * 50));
  CHECK(parse_vector_text(vector_to_text(v)) == v);
  CHECK(parse_vector_text("1, 2  3\n4") == vec({1, 2, 3, 4}));
  CHECK_THROWS_AS(parse_vector_text("1,x"), ParseError);
}

}  // TEST_SUITE
