#include <benchmark/benchmark.h>

#include <random>

#include <sbl/dataset.hpp>
#include <sbl/driver.hpp>
#include <sbl/gaussian_process.hpp>
#include <sbl/inner_solver.hpp>
#include <sbl/lower_solver.hpp>
#include <sbl/smoothing.hpp>

using namespace sbl;

namespace {

Vector random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Vector v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

BilevelProblem synthetic_problem(Eigen::Index features, Eigen::Index samples,
                                 RegularizerSpec regs = RegularizerSpec::lp(0.5)) {
  const Table t = make_synthetic(
      {.samples = samples, .features = features, .noise = 0.5, .seed = 1});
  return make_problem(split_three_way(t, {.shuffle_seed = 1}), {}, regs);
}

void BM_PhiDerivatives(benchmark::State& state) {
  const Vector w = random_vector(state.range(0), 1);
  const SmoothingParams sp{1e-2, 0.5};
  for (auto _ : state) {
    benchmark::DoNotOptimize(phi_grad(w, sp));
    benchmark::DoNotOptimize(phi_hess_diag(w, sp));
    benchmark::DoNotOptimize(phi_third_diag(w, sp));
  }
}
BENCHMARK(BM_PhiDerivatives)->Arg(50)->Arg(200)->Arg(1000);

void BM_EvalG(benchmark::State& state) {
  const BilevelProblem p =
      synthetic_problem(state.range(0), 1000, RegularizerSpec::elastic_net(0.5));
  const Vector w = random_vector(p.dims(), 2);
  const Vector lam_bar = Vector::Constant(1, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(eval_G(p, w, lam_bar));
}
BENCHMARK(BM_EvalG)->Arg(50)->Arg(200);

void BM_SolveLower(benchmark::State& state) {
  const BilevelProblem p = synthetic_problem(state.range(0), 300);
  const Vector lambda = Vector::Constant(1, 1.0);
  const Vector start = Vector::Zero(p.dims());
  for (auto _ : state) benchmark::DoNotOptimize(solve_lower(p, lambda, start));
}
BENCHMARK(BM_SolveLower)->Arg(5)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_SolveInner(benchmark::State& state) {
  const BilevelProblem p = synthetic_problem(state.range(0), 300);
  const Vector start = Vector::Zero(p.dims());
  const Vector lambda = Vector::Constant(1, 10.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_inner(p, {0.5, 0.5}, start, lambda, {}));
  }
}
BENCHMARK(BM_SolveInner)->Arg(5)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_GaussianProcessFit(benchmark::State& state) {
  const Eigen::Index points = state.range(0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  Matrix x(points, 2);
  Vector y(points);
  for (Eigen::Index i = 0; i < points; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y(i) = std::sin(x(i, 0)) + 0.1 * x(i, 1) * x(i, 1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(GaussianProcess::fit(x, y));
}
BENCHMARK(BM_GaussianProcessFit)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_BilevelDesk(benchmark::State& state) {
  const BilevelProblem p = synthetic_problem(5, 60);
  for (auto _ : state) benchmark::DoNotOptimize(run_bilevel(p));
}
BENCHMARK(BM_BilevelDesk)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
