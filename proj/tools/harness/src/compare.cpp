#include <algorithm>
#include <cstdio>
#include <sstream>

#include "sbl/harness.hpp"
#include "sbl/report_io.hpp"

namespace sbl::harness {

namespace {

constexpr const char* kDash = "-";
const char* kColumns[7] = {"method", "p",        "Err_te", "Err_val",
                           "time_s", "sparsity", "flag"};

using Row = std::vector<std::string>;

std::string fixed(double x, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, x);
  return buf;
}

Row cells_of(const CompareCell& c, bool exact) {
  Row row{to_string(c.method), c.reg_tag};
  if (!c.record) {
    row.insert(row.end(), {kDash, kDash, kDash, kDash, kDash});
    return row;
  }
  const ExperimentRecord& r = *c.record;
  if (exact) {
    row.push_back(format_double(r.err_te));
    row.push_back(format_double(r.err_val));
    row.push_back(format_double(r.wall_time_s));
    row.push_back(format_double(r.sparsity));
  } else {
    row.push_back(fixed(r.err_te, "%.4f"));
    row.push_back(fixed(r.err_val, "%.4f"));
    row.push_back(fixed(r.wall_time_s, "%.3f"));
    row.push_back(fixed(r.sparsity, "%.3f"));
  }
  row.push_back(r.flagged ? "(F)" : "");
  return row;
}

// Display width of UTF-8 text: one column per code point.
std::size_t width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; }));
}

}  // namespace

std::vector<CompareCell> cmd_compare(const RunConfig& base,
                                     const std::vector<Method>& methods,
                                     const std::vector<RegularizerSpec>& regs) {
  require(!methods.empty() && !regs.empty(),
          "compare needs at least one method and one regularizer");
  require(methods.size() * regs.size() >= 2,
          "compare needs at least two cells");
  std::vector<CompareCell> cells;
  for (const RegularizerSpec& reg : regs) {
    for (Method method : methods) {
      RunConfig cfg = base;
      cfg.regs = reg;
      cfg.method = method;
      // A grid given on the command line only fits regularizers of its arity.
      if (static_cast<int>(cfg.methods.grid.axes.size()) != reg.count()) {
        cfg.methods.grid = {};
      }
      Vector& lambda0 = cfg.methods.driver.lambda0;
      if (lambda0.size() != 0 && lambda0.size() != reg.count()) {
        lambda0 = Vector::Constant(reg.count(), lambda0(0));
      }
      CompareCell cell;
      cell.method = method;
      cell.reg_tag = regularizer_tag(reg);
      if (!base.out_dir.empty()) {
        cfg.out_dir = base.out_dir / (cell.reg_tag + "_" + to_string(method));
      }
      try {
        ExperimentRecord rec = cmd_run(cfg).experiment.record;
        if (rec.status == "time_budget") {
          cell.note = "exceeded the time budget";
        } else {
          if (rec.status != "ok") cell.note = rec.status;
          cell.record = std::move(rec);
        }
      } catch (const std::exception& e) {
        cell.note = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::string compare_to_tsv(const std::vector<CompareCell>& cells) {
  std::ostringstream out;
  for (int c = 0; c < 7; ++c) out << (c ? "\t" : "") << kColumns[c];
  out << '\n';
  for (const auto& cell : cells) {
    const Row row = cells_of(cell, true);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "\t" : "") << row[c];
    out << '\n';
  }
  return out.str();
}

std::string compare_to_text(const std::vector<CompareCell>& cells) {
  std::vector<Row> rows{Row(kColumns, kColumns + 7)};
  for (const auto& cell : cells) rows.push_back(cells_of(cell, false));
  std::vector<std::size_t> widths(7, 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], width(row[c]));
    }
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(widths[c] - width(row[c]), ' ');
      // Text columns left-aligned, numbers right-aligned.
      line += c < 2 || c == 6 ? row[c] + pad : pad + row[c];
      if (c + 1 < row.size()) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  return out.str();
}

bool all_clean(const std::vector<CompareCell>& cells, bool allow_flagged) {
  return std::all_of(cells.begin(), cells.end(), [&](const CompareCell& c) {
    return c.record && c.record->status == "ok" &&
           (allow_flagged || !c.record->flagged);
  });
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "features") return SweepAxis::features;
  if (text == "samples") return SweepAxis::samples;
  throw ContractError("unknown sweep axis '" + text + "'");
}

std::vector<SweepPoint> cmd_sweep(const RunConfig& base,
                                  const SweepConfig& sweep) {
  require(base.data.kind == DataKind::synthetic,
          "sweeps run on synthetic data");
  require(!sweep.sizes.empty() && !sweep.seeds.empty() && !sweep.methods.empty(),
          "sweep needs sizes, seeds and methods");
  std::vector<SweepPoint> points;
  for (Eigen::Index size : sweep.sizes) {
    for (std::uint64_t seed : sweep.seeds) {
      for (Method method : sweep.methods) {
        RunConfig cfg = base;
        cfg.seed = seed;
        cfg.method = method;
        if (sweep.axis == SweepAxis::features) {
          cfg.data.synthetic.features = size;
        } else {
          cfg.data.synthetic.samples = size;
        }
        if (!base.out_dir.empty()) {
          cfg.out_dir = base.out_dir / (std::to_string(size) + "_" +
                                        std::to_string(seed) + "_" +
                                        to_string(method));
        }
        SweepPoint pt;
        pt.size = size;
        pt.seed = seed;
        pt.method = method;
        try {
          const ExperimentRecord rec = cmd_run(cfg).experiment.record;
          pt.time_s = rec.wall_time_s;
          pt.err_te = rec.err_te;
          pt.err_val = rec.err_val;
          pt.status = rec.status;
        } catch (const std::exception&) {
          pt.status = "error";
        }
        points.push_back(pt);
      }
    }
  }
  return points;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << "size,seed,method,time_s,Err_te,Err_val,status\n";
  for (const auto& pt : points) {
    out << pt.size << ',' << pt.seed << ',' << to_string(pt.method) << ','
        << format_double(pt.time_s) << ',' << format_double(pt.err_te) << ','
        << format_double(pt.err_val) << ',' << pt.status << '\n';
  }
  return out.str();
}

}  // namespace sbl::harness
