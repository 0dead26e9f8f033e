#include "sbl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

namespace sbl {

std::string to_string(SplitRole role) {
  switch (role) {
    case SplitRole::train:
      return "train";
    case SplitRole::validation:
      return "validation";
    case SplitRole::test:
      return "test";
  }
  return "unknown";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view field, std::size_t line,
                    std::size_t column) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("invalid number '" + std::string(field) + "'", line,
                     column);
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite value '" + std::string(field) + "'", line,
                     column);
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

Table parse_csv(const std::string& text, const CsvOptions& opts) {
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::size_t line_no = 0;
  bool header_pending = opts.has_header;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    auto fields = split_fields(view, opts.delimiter);
    if (width == 0) {
      width = fields.size();
      if (width < 2) {
        throw ParseError("need at least one feature and one target column",
                         line_no);
      }
    } else if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      row[c] = parse_double(fields[c], line_no, c + 1);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no data rows");

  const auto w = static_cast<int>(width);
  int target = opts.target_column < 0 ? w + opts.target_column
                                      : opts.target_column;
  if (target < 0 || target >= w) {
    throw ContractError("target column out of range");
  }

  Table t;
  const auto m = static_cast<Eigen::Index>(rows.size());
  t.features.resize(m, w - 1);
  t.targets.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index col = 0;
    for (int c = 0; c < w; ++c) {
      if (c == target) {
        t.targets(i) = rows[i][c];
      } else {
        t.features(i, col++) = rows[i][c];
      }
    }
  }
  return t;
}

Table read_csv(const std::filesystem::path& path, const CsvOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), opts);
}

void standardize_with_train_stats(Dataset& data) {
  const Eigen::Index n = data.train.dims();
  const Eigen::Index m = data.train.samples();
  require(m > 0, "standardization needs at least one training sample");
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mean = data.train.features.col(j).mean();
    const double var =
        (data.train.features.col(j).array() - mean).square().sum() /
        static_cast<double>(m);
    const double sd = std::sqrt(var);
    for (DatasetSplit* s : {&data.train, &data.validation, &data.test}) {
      if (s->samples() == 0) continue;
      if (sd > 0.0) {
        s->features.col(j) = (s->features.col(j).array() - mean) / sd;
      } else {
        s->features.col(j).setZero();
      }
    }
  }
}

Dataset split_three_way(const Table& table, const SplitOptions& opts) {
  const Eigen::Index m = table.features.rows();
  require(m == table.targets.size(), "feature rows must match target length");
  require(m >= 3, "need at least three samples to split");
  require(table.features.allFinite() && table.targets.allFinite(),
          "non-finite values in table");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (opts.shuffle_seed) {
    std::mt19937_64 rng(*opts.shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  const Eigen::Index group = (m + 2) / 3;
  const Eigen::Index sizes[3] = {group, std::min(group, m - group),
                                 std::max<Eigen::Index>(m - 2 * group, 0)};
  Dataset data;
  DatasetSplit* parts[3] = {&data.train, &data.validation, &data.test};
  const SplitRole roles[3] = {SplitRole::train, SplitRole::validation,
                              SplitRole::test};
  Eigen::Index offset = 0;
  for (int s = 0; s < 3; ++s) {
    DatasetSplit& part = *parts[s];
    part.role = roles[s];
    part.features.resize(sizes[s], table.features.cols());
    part.targets.resize(sizes[s]);
    for (Eigen::Index i = 0; i < sizes[s]; ++i) {
      const auto src = order[static_cast<std::size_t>(offset + i)];
      part.features.row(i) = table.features.row(src);
      part.targets(i) = table.targets(src);
    }
    offset += sizes[s];
  }

  if (opts.standardize) standardize_with_train_stats(data);
  if (opts.add_intercept) {
    for (DatasetSplit* s : parts) {
      Matrix x(s->samples(), s->dims() + 1);
      x << s->features, Vector::Ones(s->samples());
      s->features = std::move(x);
    }
  }
  return data;
}

Table make_synthetic(const SyntheticOptions& opts) {
  require(opts.samples >= 3 && opts.features >= 1, "synthetic size too small");
  require(opts.correlation >= 0.0 && opts.correlation < 1.0,
          "correlation must be in [0, 1)");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.5, 2.0);

  const Eigen::Index n = opts.features;
  const Eigen::Index m = opts.samples;

  // Equicorrelated features: x = sqrt(1-c) z + sqrt(c) s, shared factor s.
  const double a = std::sqrt(1.0 - opts.correlation);
  const double b = std::sqrt(opts.correlation);
  Table t;
  t.features.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double shared = normal(rng);
    for (Eigen::Index j = 0; j < n; ++j) {
      t.features(i, j) = a * normal(rng) + b * shared;
    }
  }

  Vector truth = Vector::Zero(n);
  const auto zeros = static_cast<Eigen::Index>(
      std::floor(opts.zero_fraction * static_cast<double>(n)));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  for (Eigen::Index k = zeros; k < n; ++k) {
    const double sign = normal(rng) < 0.0 ? -1.0 : 1.0;
    truth(idx[static_cast<std::size_t>(k)]) = sign * uniform(rng);
  }

  t.targets = t.features * truth;
  for (Eigen::Index i = 0; i < m; ++i) {
    t.targets(i) += opts.noise * normal(rng);
    if (opts.classification) t.targets(i) = t.targets(i) >= 0.0 ? 1.0 : -1.0;
  }
  return t;
}

}  // namespace sbl
