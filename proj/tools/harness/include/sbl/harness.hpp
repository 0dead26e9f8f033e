#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sbl/experiment.hpp"

namespace sbl::harness {

enum class DataKind { csv, synthetic };

struct DataConfig {
  DataKind kind = DataKind::synthetic;
  std::filesystem::path csv_path;
  CsvOptions csv;
  /// The seed field is ignored; synthetic data is keyed to RunConfig::seed.
  SyntheticOptions synthetic;
  bool shuffle = true;
  bool standardize = true;
  bool add_intercept = false;
};

struct RunConfig {
  DataConfig data;
  LossSpec loss;
  RegularizerSpec regs;
  Method method = Method::bilevel;
  MethodConfigs methods;
  /// Empty: nothing is written.
  std::filesystem::path out_dir;
  /// Drives the row shuffle, synthetic data and the BO design.
  std::uint64_t seed = 1;
  /// Runs that exceed this are reported as failed cells.
  double time_budget_s = 27000.0;
  /// Flagged records still count as success for the exit status.
  bool allow_flagged = false;
};

/// Throws ContractError on the first invalid setting.
void validate(const RunConfig& cfg);

/// "1", "0.8", "0.5" (any p in (0, 1]), "EN" or "EN<p>".
RegularizerSpec parse_regularizer(const std::string& tag);

/// "lo:hi:count" in log10 units, e.g. "-4:4:30".
std::vector<double> parse_grid_axis(const std::string& text);

/// Reads or generates the table and splits it; every random choice is
/// keyed to `seed`.
Dataset load_dataset(const DataConfig& data, std::uint64_t seed);

/// The configuration with the seed pushed into every stochastic component.
MethodConfigs seeded(const RunConfig& cfg);

struct RunOutcome {
  ExperimentOutcome experiment;
  std::vector<std::filesystem::path> artifacts;
};

/// Runs the configured method and, when out_dir is set, writes
///   record.json, record.tsv   metrics (no wall times)
///   report.json, report.txt   final SB-KKT report
///   w.txt, lambda.txt         final weights and hyperparameters
///   trace.csv, trace.json     outer iterations (bilevel)
///   assumptions.json          assumption diagnostics (bilevel)
///   history.csv               evaluated hyperparameters (grid, bayes)
///   timing.json               wall times
///   config.json               the resolved configuration
/// Every file except timing.json is a deterministic function of cfg.
RunOutcome cmd_run(const RunConfig& cfg);

std::string record_to_json(const ExperimentRecord& rec);
std::string record_tsv_header(Eigen::Index lambda_count);
std::string record_to_tsv_row(const ExperimentRecord& rec);
std::string config_to_json(const RunConfig& cfg);

/// A point to audit. Missing multipliers are recovered.
struct AuditInput {
  Vector w;
  Vector lambda;
  std::optional<Vector> zeta;
  std::optional<Vector> eta;
};

/// `spec` is either a path to a vector file or an inline list "1,2,3".
Vector read_vector_arg(const std::string& spec);

SBKKTReport cmd_audit(const BilevelProblem& problem, const AuditInput& in,
                      double zero_threshold = 1e-4,
                      SBKKTTolerance tol = {});

/// One row of the comparison table. `record` is empty when the cell
/// failed; `note` then says why.
struct CompareCell {
  Method method = Method::bilevel;
  std::string reg_tag;
  std::optional<ExperimentRecord> record;
  std::string note;
};

/// Runs every (regularizer, method) pair on the dataset of `base`. Cell
/// artifacts go to out_dir/<reg>_<method>/ when out_dir is set.
std::vector<CompareCell> cmd_compare(const RunConfig& base,
                                     const std::vector<Method>& methods,
                                     const std::vector<RegularizerSpec>& regs);

/// Columns: method, p, Err_te, Err_val, time_s, sparsity, flag. Failed
/// cells show an em dash.
std::string compare_to_tsv(const std::vector<CompareCell>& cells);
std::string compare_to_text(const std::vector<CompareCell>& cells);

/// True when every cell completed with status "ok" and, unless
/// `allow_flagged`, without the (F) flag.
bool all_clean(const std::vector<CompareCell>& cells, bool allow_flagged);

enum class SweepAxis { features, samples };

SweepAxis parse_sweep_axis(const std::string& text);

struct SweepConfig {
  SweepAxis axis = SweepAxis::features;
  std::vector<Eigen::Index> sizes;
  std::vector<std::uint64_t> seeds{1};
  std::vector<Method> methods{Method::bilevel, Method::bayes};
};

struct SweepPoint {
  Eigen::Index size = 0;
  std::uint64_t seed = 0;
  Method method = Method::bilevel;
  double time_s = 0.0;
  double err_te = 0.0;
  double err_val = 0.0;
  std::string status;
};

/// Scaling study on synthetic data: one run per (size, seed, method).
std::vector<SweepPoint> cmd_sweep(const RunConfig& base,
                                  const SweepConfig& sweep);

/// Header `size,seed,method,time_s,Err_te,Err_val,status`.
std::string sweep_to_csv(const std::vector<SweepPoint>& points);

}  // namespace sbl::harness
