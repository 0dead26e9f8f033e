#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbl/harness.hpp"
#include "sbl/report_io.hpp"

namespace {

using namespace sbl;
using namespace sbl::harness;

// Exit codes.
constexpr int kOk = 0;
constexpr int kUnclean = 1;  // flagged, failed or non-passing results
constexpr int kInputError = 2;

// Flag storage shared by every subcommand that builds a problem.
struct ProblemFlags {
  std::string csv;
  bool header = false;
  int target_column = -1;
  char delimiter = ',';
  SyntheticOptions synthetic;
  bool no_shuffle = false;
  bool no_standardize = false;
  bool intercept = false;
  std::string loss = "squared";
  std::string reg = "1";
  std::uint64_t seed = 1;
  double zero_threshold = 1e-4;

  void add(CLI::App& app) {
    app.add_option("--csv", csv, "Dataset CSV (default: synthetic data)");
    app.add_flag("--header", header, "The CSV has a header row");
    app.add_option("--target-column", target_column,
                   "Target column; negative counts from the end")
        ->capture_default_str();
    app.add_option("--delimiter", delimiter, "CSV field delimiter")
        ->capture_default_str();
    app.add_option("--samples", synthetic.samples,
                   "Synthetic rows before splitting")
        ->capture_default_str();
    app.add_option("--features", synthetic.features, "Synthetic features")
        ->capture_default_str();
    app.add_option("--zero-fraction", synthetic.zero_fraction,
                   "Synthetic fraction of zero coefficients")
        ->capture_default_str();
    app.add_option("--noise", synthetic.noise, "Synthetic noise level")
        ->capture_default_str();
    app.add_option("--correlation", synthetic.correlation,
                   "Synthetic pairwise feature correlation")
        ->capture_default_str();
    app.add_flag("--classification", synthetic.classification,
                 "Synthetic labels in {-1, +1}");
    app.add_flag("--no-shuffle", no_shuffle, "Split rows in file order");
    app.add_flag("--no-standardize", no_standardize,
                 "Skip feature standardization");
    app.add_flag("--intercept", intercept, "Append a column of ones");
    app.add_option("--loss", loss, "squared | logistic")->capture_default_str();
    app.add_option("--reg", reg, "Regularizer: 1, 0.8, 0.5 (any p), EN, EN<p>")
        ->capture_default_str();
    app.add_option("--seed", seed, "Seed for splits, synthetic data and BO")
        ->capture_default_str();
    app.add_option("--zero-threshold", zero_threshold,
                   "Relative threshold below which weights count as zero")
        ->capture_default_str();
  }

  void apply(RunConfig& cfg) const {
    if (!csv.empty()) {
      cfg.data.kind = DataKind::csv;
      cfg.data.csv_path = csv;
    }
    cfg.data.csv.has_header = header;
    cfg.data.csv.target_column = target_column;
    cfg.data.csv.delimiter = delimiter;
    cfg.data.synthetic = synthetic;
    cfg.data.shuffle = !no_shuffle;
    cfg.data.standardize = !no_standardize;
    cfg.data.add_intercept = intercept;
    cfg.loss.kind = parse_loss_kind(loss);
    cfg.regs = parse_regularizer(reg);
    cfg.seed = seed;
    cfg.methods.zero_threshold = zero_threshold;
  }
};

// Solver settings; defaults follow the published experimental protocol.
struct MethodFlags {
  MethodConfigs m;
  double lambda0 = 10.0;
  std::vector<std::string> grid_axes;
  double time_budget = 27000.0;
  bool allow_flagged = false;
  std::string out;

  void add(CLI::App& app) {
    auto& d = m.driver;
    app.add_option("--mu0", d.mu0, "Initial smoothing parameter")
        ->capture_default_str();
    app.add_option("--beta1", d.beta1, "Smoothing decrease factor")
        ->capture_default_str();
    app.add_option("--stop-eps", d.stop_epsilon, "Outer stopping tolerance")
        ->capture_default_str();
    app.add_option("--max-outer", d.max_outer, "Outer iteration cap")
        ->capture_default_str();
    app.add_option("--lambda0", lambda0, "Starting value of every lambda_i")
        ->capture_default_str();
    app.add_option("--inner-tol", d.fixed_inner_tolerance,
                   "Inner approximate-KKT tolerance")
        ->capture_default_str();
    app.add_option("--grid-axis", grid_axes,
                   "Grid axis lo:hi:count in log10 units, one per "
                   "hyperparameter (write --grid-axis=-4:4:30)");
    app.add_option("--bo-budget", m.bo.budget, "BO evaluations")
        ->capture_default_str();
    app.add_option("--bo-initial", m.bo.initial, "BO initial design size")
        ->capture_default_str();
    app.add_option("--time-budget", time_budget,
                   "Seconds per run before the cell is reported as failed")
        ->capture_default_str();
    app.add_flag("--allow-flagged", allow_flagged,
                 "Do not fail the exit status on (F) records");
    app.add_option("--out", out, "Output directory for artifacts");
  }

  void apply(RunConfig& cfg) const {
    cfg.methods.driver = m.driver;
    cfg.methods.bo = m.bo;
    cfg.methods.driver.lambda0 = Vector::Constant(cfg.regs.count(), lambda0);
    cfg.methods.grid = {};
    for (const auto& axis : grid_axes) {
      cfg.methods.grid.axes.push_back(parse_grid_axis(axis));
    }
    cfg.time_budget_s = time_budget;
    cfg.allow_flagged = allow_flagged;
    cfg.out_dir = out;
  }
};

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!(out << text)) throw std::runtime_error("cannot write " + path.string());
}

void print_record(const ExperimentRecord& rec) {
  std::printf("method=%s p=%s Err_te=%.6g Err_val=%.6g time_s=%.3f "
              "sparsity=%.3f cond=%.3g%s status=%s\n",
              to_string(rec.method).c_str(), rec.reg_tag.c_str(), rec.err_te,
              rec.err_val, rec.wall_time_s, rec.sparsity, rec.cond,
              rec.flagged ? " (F)" : "", rec.status.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperparameter selection for l_p-regularized regression by "
               "smoothing continuation, with grid and Bayesian baselines"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML or INI file with flag values");

  // run
  ProblemFlags run_problem;
  MethodFlags run_methods;
  std::string run_method = "bilevel";
  auto* run = app.add_subcommand("run", "Run one method and write artifacts");
  run_problem.add(*run);
  run_methods.add(*run);
  run->add_option("--method", run_method, "bilevel | grid | bayes")
      ->capture_default_str();

  // audit
  ProblemFlags audit_problem;
  std::string audit_w, audit_lambda, audit_zeta, audit_eta, audit_out;
  double audit_tol = 1e-5;
  auto* audit = app.add_subcommand(
      "audit", "Check the scaled bilevel KKT conditions at a given point");
  audit_problem.add(*audit);
  audit->add_option("--w", audit_w, "Weights: file or comma list")->required();
  audit->add_option("--lambda", audit_lambda,
                    "Hyperparameters: file or comma list")
      ->required();
  audit->add_option("--zeta", audit_zeta, "Multiplier zeta: file or list");
  audit->add_option("--eta", audit_eta, "Multiplier eta: file or list");
  audit->add_option("--tol", audit_tol, "Pass tolerance per block")
      ->capture_default_str();
  audit->add_option("--out", audit_out, "Write the report as JSON here");

  // compare
  ProblemFlags cmp_problem;
  MethodFlags cmp_methods;
  std::vector<std::string> cmp_method_names{"bilevel", "grid", "bayes"};
  std::vector<std::string> cmp_regs{"1", "0.8", "0.5", "EN"};
  auto* compare =
      app.add_subcommand("compare", "Compare methods across regularizers");
  cmp_problem.add(*compare);
  cmp_methods.add(*compare);
  compare->add_option("--methods", cmp_method_names, "Methods to compare")
      ->delimiter(',')
      ->capture_default_str();
  compare->add_option("--regs", cmp_regs, "Regularizers to compare")
      ->delimiter(',')
      ->capture_default_str();

  // sweep
  ProblemFlags sweep_problem;
  MethodFlags sweep_methods;
  std::string sweep_axis = "features";
  std::vector<Eigen::Index> sweep_sizes{50, 100, 200};
  std::vector<std::uint64_t> sweep_seeds{1, 2, 3};
  std::vector<std::string> sweep_method_names{"bilevel", "bayes"};
  auto* sweep = app.add_subcommand(
      "sweep", "Scaling study on synthetic data; emits a CSV series");
  sweep_problem.add(*sweep);
  sweep_methods.add(*sweep);
  sweep->add_option("--axis", sweep_axis, "features | samples")
      ->capture_default_str();
  sweep->add_option("--sizes", sweep_sizes, "Values along the axis")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--seeds", sweep_seeds, "Seeds per size")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--methods", sweep_method_names, "Methods to time")
      ->delimiter(',')
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      RunConfig cfg;
      run_problem.apply(cfg);
      run_methods.apply(cfg);
      cfg.method = parse_method(run_method);
      const RunOutcome out = cmd_run(cfg);
      const ExperimentRecord& rec = out.experiment.record;
      print_record(rec);
      const bool clean =
          rec.status == "ok" && (cfg.allow_flagged || !rec.flagged);
      return clean ? kOk : kUnclean;
    }

    if (audit->parsed()) {
      RunConfig cfg;
      audit_problem.apply(cfg);
      validate(cfg);
      const Dataset data = load_dataset(cfg.data, cfg.seed);
      const BilevelProblem problem = make_problem(data, cfg.loss, cfg.regs);
      AuditInput in;
      in.w = read_vector_arg(audit_w);
      in.lambda = read_vector_arg(audit_lambda);
      if (!audit_zeta.empty()) in.zeta = read_vector_arg(audit_zeta);
      if (!audit_eta.empty()) in.eta = read_vector_arg(audit_eta);
      const SBKKTReport rep =
          cmd_audit(problem, in, cfg.methods.zero_threshold, {audit_tol});
      std::cout << report_to_key_value(rep);
      if (!audit_out.empty()) write_text(audit_out, report_to_json(rep));
      return rep.all_pass() ? kOk : kUnclean;
    }

    if (compare->parsed()) {
      RunConfig cfg;
      cmp_problem.apply(cfg);
      cmp_methods.apply(cfg);
      std::vector<RegularizerSpec> regs;
      for (const auto& tag : cmp_regs) regs.push_back(parse_regularizer(tag));
      validate(cfg);
      const auto cells = cmd_compare(cfg, parse_methods(cmp_method_names), regs);
      std::cout << compare_to_text(cells);
      for (const auto& c : cells) {
        if (!c.note.empty()) {
          std::cerr << to_string(c.method) << " p=" << c.reg_tag << ": "
                    << c.note << '\n';
        }
      }
      if (!cfg.out_dir.empty()) {
        write_text(cfg.out_dir / "table.tsv", compare_to_tsv(cells));
        write_text(cfg.out_dir / "table.txt", compare_to_text(cells));
      }
      return all_clean(cells, cfg.allow_flagged) ? kOk : kUnclean;
    }

    if (sweep->parsed()) {
      RunConfig cfg;
      sweep_problem.apply(cfg);
      sweep_methods.apply(cfg);
      validate(cfg);
      SweepConfig sc;
      sc.axis = parse_sweep_axis(sweep_axis);
      sc.sizes = sweep_sizes;
      sc.seeds = sweep_seeds;
      sc.methods = parse_methods(sweep_method_names);
      const auto points = cmd_sweep(cfg, sc);
      const std::string csv = sweep_to_csv(points);
      std::cout << csv;
      if (!cfg.out_dir.empty()) write_text(cfg.out_dir / "sweep.csv", csv);
      for (const auto& pt : points) {
        if (pt.status != "ok") return kUnclean;
      }
      return kOk;
    }
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnclean;
  }
  return kOk;
}
