#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sbl/diagnostics.hpp"
#include "sbl/harness.hpp"
#include "sbl/report_io.hpp"

namespace sbl::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ParseError("invalid " + what + " '" + text + "'");
  }
  return v;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

void write_file(const fs::path& path, const std::string& text,
                std::vector<fs::path>& written) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
  written.push_back(path);
}

std::string history_to_csv(const BaselineResult& br) {
  std::ostringstream out;
  out << "index";
  const Eigen::Index r = br.history.empty() ? 0 : br.history.front().lambda.size();
  for (Eigen::Index j = 0; j < r; ++j) out << ",lambda_" << j + 1;
  out << ",Err_val,converged\n";
  for (std::size_t i = 0; i < br.history.size(); ++i) {
    const Evaluated& e = br.history[i];
    out << i;
    for (Eigen::Index j = 0; j < e.lambda.size(); ++j) {
      out << ',' << format_double(e.lambda(j));
    }
    out << ',' << format_double(e.err_val) << ','
        << (e.converged ? "true" : "false") << '\n';
  }
  return out.str();
}

// trace.csv with a leading seed column.
std::string seeded_trace_csv(const std::vector<TraceRow>& rows,
                             std::uint64_t seed) {
  std::istringstream in(trace_to_csv(rows));
  std::ostringstream out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    out << (header ? std::string("seed") : std::to_string(seed)) << ','
        << line << '\n';
    header = false;
  }
  return out.str();
}

std::string with_seed(const std::string& json_text, std::uint64_t seed) {
  json j = json::parse(json_text);
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

}  // namespace

RegularizerSpec parse_regularizer(const std::string& tag) {
  std::string rest = tag;
  const bool elastic = rest.rfind("EN", 0) == 0;
  if (elastic) rest = rest.substr(2);
  const double p = rest.empty() && elastic ? 1.0 : parse_number(rest, "regularizer");
  if (!(p > 0.0 && p <= 1.0)) {
    throw ContractError("regularizer exponent must be in (0, 1], got '" + tag + "'");
  }
  return elastic ? RegularizerSpec::elastic_net(p) : RegularizerSpec::lp(p);
}

std::vector<double> parse_grid_axis(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) {
    throw ParseError("grid axis must look like lo:hi:count, got '" + text + "'");
  }
  const double lo = parse_number(text.substr(0, a), "grid bound");
  const double hi = parse_number(text.substr(a + 1, b - a - 1), "grid bound");
  const double count = parse_number(text.substr(b + 1), "grid count");
  if (!(count >= 1.0) || count != std::floor(count)) {
    throw ContractError("grid count must be a positive integer in '" + text + "'");
  }
  return log_grid(lo, hi, static_cast<int>(count));
}

void validate(const RunConfig& cfg) {
  if (cfg.data.kind == DataKind::csv) {
    require(!cfg.data.csv_path.empty(), "no CSV path given");
  } else {
    require(cfg.data.synthetic.samples >= 3,
            "synthetic data needs at least 3 samples");
    require(cfg.data.synthetic.features >= 1,
            "synthetic data needs at least 1 feature");
    require(cfg.data.synthetic.zero_fraction >= 0.0 &&
                cfg.data.synthetic.zero_fraction <= 1.0,
            "zero fraction must be in [0, 1]");
    require(cfg.data.synthetic.noise >= 0.0, "noise must be >= 0");
    require(cfg.data.synthetic.correlation >= 0.0 &&
                cfg.data.synthetic.correlation < 1.0,
            "correlation must be in [0, 1)");
  }
  require(cfg.regs.p > 0.0 && cfg.regs.p <= 1.0, "p must be in (0, 1]");
  require(cfg.time_budget_s > 0.0, "time budget must be positive");
  const MethodConfigs& m = cfg.methods;
  require(m.zero_threshold > 0.0 && m.zero_threshold < 1.0,
          "zero threshold must be in (0, 1)");
  if (!m.grid.axes.empty()) {
    require(static_cast<int>(m.grid.axes.size()) == cfg.regs.count(),
            "the grid needs one axis per hyperparameter");
  }
  validate(m.bo);
  validate(m.lower);
  validate(m.driver.inner);
  require(m.driver.max_outer >= 1, "max_outer must be >= 1");
  require(m.driver.stop_epsilon > 0.0, "stop epsilon must be positive");
}

Dataset load_dataset(const DataConfig& data, std::uint64_t seed) {
  Table table;
  if (data.kind == DataKind::csv) {
    table = read_csv(data.csv_path, data.csv);
  } else {
    SyntheticOptions so = data.synthetic;
    so.seed = seed;
    table = make_synthetic(so);
  }
  SplitOptions so;
  if (data.shuffle) so.shuffle_seed = seed;
  so.standardize = data.standardize;
  so.add_intercept = data.add_intercept;
  return split_three_way(table, so);
}

MethodConfigs seeded(const RunConfig& cfg) {
  MethodConfigs m = cfg.methods;
  m.bo.seed = cfg.seed;
  m.driver.time_budget_s = cfg.time_budget_s;
  m.driver.zero_threshold = m.zero_threshold;
  m.lower.zero_threshold = m.zero_threshold;
  return m;
}

std::string record_to_json(const ExperimentRecord& rec) {
  json j;
  j["method"] = to_string(rec.method);
  j["p"] = rec.reg_tag;
  j["Err_te"] = rec.err_te;
  j["Err_val"] = rec.err_val;
  j["sparsity"] = rec.sparsity;
  j["cond"] = rec.cond;
  j["flagged"] = rec.flagged;
  j["lambda"] = vector_json(rec.lambda);
  j["n"] = rec.n;
  j["status"] = rec.status;
  j["seed"] = rec.seed;
  return j.dump(2) + "\n";
}

std::string record_tsv_header(Eigen::Index lambda_count) {
  std::string s = "method\tp\tErr_te\tErr_val\tsparsity\tcond\tflag\tstatus\tseed";
  for (Eigen::Index j = 0; j < lambda_count; ++j) {
    s += "\tlambda_" + std::to_string(j + 1);
  }
  return s + "\n";
}

std::string record_to_tsv_row(const ExperimentRecord& rec) {
  std::string s = to_string(rec.method) + '\t' + rec.reg_tag + '\t' +
                  format_double(rec.err_te) + '\t' + format_double(rec.err_val) +
                  '\t' + format_double(rec.sparsity) + '\t' +
                  format_double(rec.cond) + '\t' + (rec.flagged ? "(F)" : "") +
                  '\t' + rec.status + '\t' + std::to_string(rec.seed);
  for (Eigen::Index j = 0; j < rec.lambda.size(); ++j) {
    s += '\t' + format_double(rec.lambda(j));
  }
  return s + "\n";
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  json d;
  if (cfg.data.kind == DataKind::csv) {
    d["csv"] = cfg.data.csv_path.string();
    d["header"] = cfg.data.csv.has_header;
    d["target_column"] = cfg.data.csv.target_column;
    d["delimiter"] = std::string(1, cfg.data.csv.delimiter);
  } else {
    const SyntheticOptions& s = cfg.data.synthetic;
    d["synthetic"] = {{"samples", s.samples},
                      {"features", s.features},
                      {"zero_fraction", s.zero_fraction},
                      {"noise", s.noise},
                      {"correlation", s.correlation},
                      {"classification", s.classification}};
  }
  d["shuffle"] = cfg.data.shuffle;
  d["standardize"] = cfg.data.standardize;
  d["intercept"] = cfg.data.add_intercept;
  j["data"] = d;
  j["loss"] = to_string(cfg.loss.kind);
  j["regularizer"] = regularizer_tag(cfg.regs);
  j["method"] = to_string(cfg.method);
  j["seed"] = cfg.seed;
  j["time_budget_s"] = cfg.time_budget_s;
  j["zero_threshold"] = cfg.methods.zero_threshold;

  const DriverConfig& dc = cfg.methods.driver;
  j["bilevel"] = {{"mu0", dc.mu0},
                  {"beta1", dc.beta1},
                  {"stop_epsilon", dc.stop_epsilon},
                  {"max_outer", dc.max_outer},
                  {"lambda0", vector_json(dc.lambda0)},
                  {"inner_tolerance", dc.fixed_inner_tolerance}};
  json axes = json::array();
  for (const auto& axis : cfg.methods.grid.axes) axes.push_back(axis);
  j["grid"] = axes;
  j["bayes"] = {{"budget", cfg.methods.bo.budget},
                {"initial", cfg.methods.bo.initial},
                {"box", {cfg.methods.bo.box_lo, cfg.methods.bo.box_hi}}};
  return j.dump(2) + "\n";
}

RunOutcome cmd_run(const RunConfig& cfg) {
  validate(cfg);
  const Dataset data = load_dataset(cfg.data, cfg.seed);
  const MethodConfigs mc = seeded(cfg);

  RunOutcome out;
  out.experiment = run_experiment(data, cfg.loss, cfg.regs, cfg.method, mc);
  ExperimentOutcome& ex = out.experiment;
  ex.record.seed = cfg.seed;
  if (ex.record.wall_time_s > cfg.time_budget_s) ex.record.status = "time_budget";

  if (cfg.out_dir.empty()) return out;
  fs::create_directories(cfg.out_dir);
  auto& files = out.artifacts;
  const fs::path& dir = cfg.out_dir;

  write_file(dir / "record.json", record_to_json(ex.record), files);
  write_file(dir / "record.tsv",
             record_tsv_header(ex.record.lambda.size()) +
                 record_to_tsv_row(ex.record),
             files);
  write_file(dir / "report.json", with_seed(report_to_json(ex.report), cfg.seed),
             files);
  write_file(dir / "report.txt",
             "seed=" + std::to_string(cfg.seed) + "\n" +
                 report_to_key_value(ex.report),
             files);
  write_file(dir / "w.txt", vector_to_text(ex.w), files);
  write_file(dir / "lambda.txt", vector_to_text(ex.record.lambda), files);
  write_file(dir / "config.json", config_to_json(cfg), files);

  double inner_seconds = 0.0;
  json timing;
  if (ex.driver) {
    const DriverResult& dr = *ex.driver;
    const auto rows = trace_rows(ex.problem, dr.trace, mc.zero_threshold);
    write_file(dir / "trace.csv", seeded_trace_csv(rows, cfg.seed), files);
    json tj;
    tj["seed"] = cfg.seed;
    tj["stop_reason"] = to_string(dr.reason);
    tj["rows"] = json::parse(trace_to_json(rows));
    write_file(dir / "trace.json", tj.dump(2) + "\n", files);
    DiagnosticsOptions dopt;
    dopt.zero_threshold = mc.zero_threshold;
    write_file(dir / "assumptions.json",
               with_seed(assumptions_to_json(
                             assumption_diagnostics(dr.trace, ex.problem, dopt)),
                         cfg.seed),
               files);
    for (const auto& s : dr.trace) inner_seconds += s.inner_seconds;
    timing["outer_iterations"] = dr.trace.size() - 1;
  }
  if (ex.baseline) {
    write_file(dir / "history.csv", history_to_csv(*ex.baseline), files);
  }
  timing["seed"] = cfg.seed;
  timing["wall_time_s"] = ex.record.wall_time_s;
  timing["inner_seconds_total"] = inner_seconds;
  write_file(dir / "timing.json", timing.dump(2) + "\n", files);
  return out;
}

Vector read_vector_arg(const std::string& spec) {
  std::error_code ec;
  if (fs::is_regular_file(spec, ec)) {
    std::ifstream in(spec, std::ios::binary);
    if (!in) throw ParseError("cannot open " + spec);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_vector_text(text.str());
  }
  return parse_vector_text(spec);
}

SBKKTReport cmd_audit(const BilevelProblem& problem, const AuditInput& in,
                      double zero_threshold, SBKKTTolerance tol) {
  const Eigen::Index n = problem.dims();
  auto check = [](Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want) {
      throw ContractError(std::string(what) + " has length " +
                          std::to_string(got) + ", the problem needs " +
                          std::to_string(want));
    }
  };
  check(in.w.size(), n, "w");
  check(in.lambda.size(), problem.r(), "lambda");
  if (in.zeta) check(in.zeta->size(), n, "zeta");
  if (in.eta) check(in.eta->size(), problem.r(), "eta");

  const ActiveSet active = ActiveSet::classify(in.w, zero_threshold);
  if (in.zeta && in.eta) {
    return sbkkt_residual(problem, in.w, in.lambda, {*in.zeta, *in.eta},
                          active, tol);
  }
  require(!in.zeta && !in.eta, "zeta and eta must be given together");
  return sbkkt_residual_recovered(problem, in.w, in.lambda, active, tol);
}

}  // namespace sbl::harness
