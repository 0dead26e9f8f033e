#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include <sbl/harness.hpp>
#include <sbl/report_io.hpp>

#include "oracles.hpp"

using namespace sbl;
using namespace sbl::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fresh, empty directory under the system temp path.
fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sbl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig desk_config(std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.data.synthetic.samples = 60;
  cfg.data.synthetic.noise = 0.5;
  cfg.seed = seed;
  return cfg;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string field;
  while (std::getline(s, field, delim)) out.push_back(field);
  return out;
}

}  // namespace

TEST_SUITE("cli_harness") {

TEST_CASE("repeated runs write byte-identical artifacts") {
  for (Method m : {Method::bilevel, Method::grid, Method::bayes}) {
    RunConfig cfg = desk_config(2);
    cfg.method = m;
    cfg.regs = RegularizerSpec::lp(0.8);
    cfg.out_dir = scratch_dir("det_a");
    const RunOutcome a = cmd_run(cfg);
    cfg.out_dir = scratch_dir("det_b");
    const RunOutcome b = cmd_run(cfg);
    REQUIRE(a.artifacts.size() == b.artifacts.size());
    for (std::size_t i = 0; i < a.artifacts.size(); ++i) {
      const std::string name = a.artifacts[i].filename().string();
      if (name == "timing.json") continue;
      CAPTURE(name);
      CHECK(slurp(a.artifacts[i]) == slurp(b.artifacts[i]));
    }
  }
}

TEST_CASE("every artifact records the seed") {
  RunConfig cfg = desk_config(7);
  cfg.out_dir = scratch_dir("seed");
  for (const fs::path& f : cmd_run(cfg).artifacts) {
    const std::string text = slurp(f);
    const std::string name = f.filename().string();
    if (name == "w.txt" || name == "lambda.txt") continue;
    CAPTURE(name);
    CHECK((text.find("\"seed\": 7") != std::string::npos ||
           text.find("seed=7") != std::string::npos ||
           text.find("\t7\t") != std::string::npos ||
           text.find("\n7,") != std::string::npos));
  }
}

TEST_CASE("metrics recomputed from the stored weights agree") {
  RunConfig cfg = desk_config(3);
  cfg.regs = RegularizerSpec::lp(0.5);
  cfg.out_dir = scratch_dir("purity");
  const RunOutcome out = cmd_run(cfg);
  const Vector w = parse_vector_text(slurp(cfg.out_dir / "w.txt"));
  const Dataset data = load_dataset(cfg.data, cfg.seed);
  const BilevelProblem p = make_problem(data, cfg.loss, cfg.regs);
  const BoundLoss test({}, data.test.features, data.test.targets);
  CHECK(std::abs(mean_loss(p.upper, w) - out.experiment.record.err_val) <= 1e-12);
  CHECK(std::abs(mean_loss(test, w) - out.experiment.record.err_te) <= 1e-12);
}

TEST_CASE("the flag rule is exact at the boundary") {
  for (Eigen::Index n : {1, 5, 200}) {
    const double edge = 1e-3 * std::sqrt(static_cast<double>(n));
    CHECK_FALSE(violates_optimality(edge, n));
    CHECK(violates_optimality(std::nextafter(edge, 1.0), n));
    CHECK_FALSE(violates_optimality(0.0, n));
  }
}

TEST_CASE("wall time covers the inner solves") {
  const RunOutcome out = cmd_run(desk_config(1));
  REQUIRE(out.experiment.driver.has_value());
  double inner = 0.0;
  for (const auto& s : out.experiment.driver->trace) inner += s.inner_seconds;
  CHECK(out.experiment.record.wall_time_s >= inner);
}

TEST_CASE("audit examples") {
  SUBCASE("the driver's final point passes") {
    for (const char* reg : {"1", "0.5", "EN"}) {
      RunConfig cfg = desk_config(1);
      cfg.regs = parse_regularizer(reg);
      const RunOutcome out = cmd_run(cfg);
      const ExperimentOutcome& ex = out.experiment;
      const SBKKTReport rep = cmd_audit(
          ex.problem, {ex.w, ex.record.lambda, ex.report.mult.zeta, ex.report.mult.eta},
          1e-4, {1e-4});
      CAPTURE(reg);
      CHECK(rep.all_pass());
    }
  }
  SUBCASE("zero weights above the soft threshold pass") {
    const Dataset data = load_dataset(desk_config().data, 1);
    const BilevelProblem p = make_problem(data, {}, RegularizerSpec::lp(1.0));
    const double big =
        p.lower.evaluate(Vector::Zero(5), Order::gradient).grad.lpNorm<Eigen::Infinity>() +
        1.0;
    const SBKKTReport rep =
        cmd_audit(p, {Vector::Zero(5), Vector::Constant(1, big), {}, {}});
    CHECK(rep.all_pass());
    CHECK(rep.source == MultiplierSource::recovered);
  }
  SUBCASE("a generic point fails the lower-level block") {
    const Dataset data = load_dataset(desk_config().data, 1);
    const BilevelProblem p = make_problem(data, {}, RegularizerSpec::lp(1.0));
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    Vector w(5);
    for (auto& v : w) v = z(rng);
    const SBKKTReport rep = cmd_audit(p, {w, Vector::Constant(1, 0.5), {}, {}});
    CHECK_FALSE(rep.pass[1]);
    CHECK(rep.block_violation[1] > 0.0);
  }
  SUBCASE("dimension mismatch") {
    const BilevelProblem p = oracle::scalar_problem(1.0, 0.0);
    CHECK_THROWS_AS(cmd_audit(p, {Vector::Zero(2), Vector::Ones(1), {}, {}}),
                    ContractError);
    CHECK_THROWS_AS(cmd_audit(p, {Vector::Zero(1), Vector::Ones(2), {}, {}}),
                    ContractError);
  }
}

TEST_CASE("a one-point grid equals a direct lower solve") {
  RunConfig cfg = desk_config(2);
  cfg.method = Method::grid;
  cfg.methods.grid.axes = {parse_grid_axis("0.5:0.5:1")};
  const ExperimentRecord rec = cmd_run(cfg).experiment.record;

  const Dataset data = load_dataset(cfg.data, cfg.seed);
  const BilevelProblem p = make_problem(data, {}, cfg.regs);
  const Vector lambda = Vector::Constant(1, std::pow(10.0, 0.5));
  const LowerResult lr = solve_lower(p, lambda, Vector::Zero(5));
  const Vector w = zero_active(lr.w, ActiveSet::classify(lr.w));
  const ExperimentRecord direct = make_record(Method::grid, data, p, w, lambda, 1e-4);
  CHECK(rec.lambda == lambda);
  CHECK(rec.err_val == direct.err_val);
  CHECK(rec.err_te == direct.err_te);
  CHECK(rec.sparsity == direct.sparsity);
  CHECK(rec.cond == direct.cond);
}

TEST_CASE("bilevel and grid tie on a well-conditioned regression") {
  RunConfig cfg;
  cfg.data.synthetic.samples = 600;
  cfg.data.synthetic.features = 8;
  cfg.data.synthetic.noise = 0.3;
  cfg.seed = 4;
  cfg.method = Method::bilevel;
  const double bilevel = cmd_run(cfg).experiment.record.err_val;
  cfg.method = Method::grid;
  const double grid = cmd_run(cfg).experiment.record.err_val;
  CHECK(bilevel <= grid * 1.0001);
  CHECK(std::abs(bilevel - grid) <= 0.01 * grid);
}

TEST_CASE("comparison table layout") {
  RunConfig cfg = desk_config(1);
  const auto cells = cmd_compare(cfg, {Method::bilevel, Method::grid},
                                 {RegularizerSpec::lp(1.0)});
  REQUIRE(cells.size() == 2);
  std::istringstream tsv(compare_to_tsv(cells));
  std::string line;
  std::getline(tsv, line);
  CHECK(split(line, '\t') ==
        std::vector<std::string>{"method", "p", "Err_te", "Err_val", "time_s",
                                 "sparsity", "flag"});
  int rows = 0;
  while (std::getline(tsv, line)) {
    ++rows;
    CHECK(split(line + "\t.", '\t').size() == 8);
  }
  CHECK(rows == 2);
  CHECK(all_clean(cells, false));
  CHECK_THROWS_AS(cmd_compare(cfg, {Method::grid}, {RegularizerSpec::lp(1.0)}),
                  ContractError);
}

TEST_CASE("runs over the time budget become dashed cells") {
  RunConfig cfg = desk_config(1);
  cfg.time_budget_s = 1e-9;
  const auto cells = cmd_compare(cfg, {Method::bilevel, Method::grid},
                                 {RegularizerSpec::lp(1.0)});
  for (const auto& c : cells) {
    CHECK_FALSE(c.record.has_value());
    CHECK(c.note == "exceeded the time budget");
  }
  const std::string tsv = compare_to_tsv(cells);
  CHECK(tsv.find("bilevel\t1\t-\t-\t-\t-\t-") != std::string::npos);
  CHECK_FALSE(all_clean(cells, true));
  const std::string text = compare_to_text(cells);
  CHECK(text.find("-") != std::string::npos);
}

TEST_CASE("scaling sweep emits one row per cell") {
  RunConfig cfg = desk_config(1);
  SweepConfig sweep;
  sweep.axis = SweepAxis::samples;
  sweep.sizes = {45, 90};
  sweep.seeds = {1, 2};
  sweep.methods = {Method::bilevel, Method::grid};
  const auto points = cmd_sweep(cfg, sweep);
  CHECK(points.size() == 8);
  const std::string csv = sweep_to_csv(points);
  CHECK(csv.rfind("size,seed,method,time_s,Err_te,Err_val,status\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  cfg.data.kind = DataKind::csv;
  CHECK_THROWS_AS(cmd_sweep(cfg, sweep), ContractError);
}

TEST_CASE("configuration parsing and validation") {
  CHECK(parse_regularizer("1").p == 1.0);
  CHECK(parse_regularizer("0.5").smooth_terms.empty());
  CHECK(parse_regularizer("EN").count() == 2);
  CHECK(parse_regularizer("EN0.5").p == 0.5);
  CHECK_THROWS_AS(parse_regularizer("2"), ContractError);
  CHECK_THROWS_AS(parse_regularizer("abc"), ParseError);

  const auto axis = parse_grid_axis("-4:4:30");
  CHECK(axis == log_grid(-4, 4, 30));
  CHECK_THROWS_AS(parse_grid_axis("1:2"), ParseError);
  CHECK_THROWS_AS(parse_grid_axis("1:2:0"), ContractError);

  RunConfig cfg = desk_config();
  CHECK_NOTHROW(validate(cfg));
  cfg.methods.grid.axes = {axis, axis};
  CHECK_THROWS_AS(validate(cfg), ContractError);
  cfg = desk_config();
  cfg.data.kind = DataKind::csv;
  CHECK_THROWS_AS(validate(cfg), ContractError);
  cfg.data.csv_path = "/nonexistent/data.csv";
  CHECK_THROWS_AS(cmd_run(cfg), ParseError);

  CHECK(read_vector_arg("1,2.5") == (Vector(2) << 1.0, 2.5).finished());
  const fs::path dir = scratch_dir("vec");
  std::ofstream(dir / "v.txt") << "3\n4\n";
  CHECK(read_vector_arg((dir / "v.txt").string()) == (Vector(2) << 3.0, 4.0).finished());
}

TEST_CASE("CSV input runs end to end") {
  const Table t = make_synthetic({.samples = 45, .features = 3, .seed = 9});
  const fs::path dir = scratch_dir("csv");
  {
    std::ofstream out(dir / "data.csv");
    out << "x1,x2,x3,y\n";
    for (Eigen::Index i = 0; i < t.features.rows(); ++i) {
      for (Eigen::Index j = 0; j < 3; ++j) out << format_double(t.features(i, j)) << ',';
      out << format_double(t.targets(i)) << '\n';
    }
  }
  RunConfig cfg;
  cfg.data.kind = DataKind::csv;
  cfg.data.csv_path = dir / "data.csv";
  cfg.data.csv.has_header = true;
  cfg.method = Method::grid;
  const ExperimentRecord rec = cmd_run(cfg).experiment.record;
  CHECK(rec.n == 3);
  CHECK(rec.status == "ok");
}

}  // TEST_SUITE
