#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sbl/types.hpp"

namespace sbl {

enum class SplitRole { train, validation, test };

std::string to_string(SplitRole role);

/// One block of samples. Rows of `features` are samples.
struct DatasetSplit {
  Matrix features;
  Vector targets;
  SplitRole role = SplitRole::train;

  Eigen::Index samples() const { return features.rows(); }
  Eigen::Index dims() const { return features.cols(); }
};

/// Train/validation/test triple sharing one feature space.
struct Dataset {
  DatasetSplit train;
  DatasetSplit validation;
  DatasetSplit test;

  Eigen::Index dims() const { return train.dims(); }
};

struct CsvOptions {
  bool has_header = false;
  /// Column holding the target; negative values count from the end
  /// (-1 = last column).
  int target_column = -1;
  char delimiter = ',';
};

/// Raw table: all non-target columns as features.
struct Table {
  Matrix features;
  Vector targets;
};

Table read_csv(const std::filesystem::path& path, const CsvOptions& opts);
Table parse_csv(const std::string& text, const CsvOptions& opts);

struct SplitOptions {
  /// Seed for the row shuffle; no shuffle when empty.
  std::optional<std::uint64_t> shuffle_seed;
  bool standardize = true;
  bool add_intercept = false;
};

/// Partitions rows into three contiguous groups of ceil(m/3) rows
/// (train, validation, test; the last group takes the remainder), then
/// standardizes with train statistics and optionally appends a ones column.
Dataset split_three_way(const Table& table, const SplitOptions& opts);

/// Column-wise standardization using the statistics of `train`. Columns
/// with zero variance on train are mapped to 0 in every split.
void standardize_with_train_stats(Dataset& data);

struct SyntheticOptions {
  Eigen::Index samples = 90;  // total, before the three-way split
  Eigen::Index features = 5;
  /// Fraction of ground-truth coefficients that are exactly zero.
  double zero_fraction = 0.4;
  double noise = 0.5;
  /// Pairwise correlation between features.
  double correlation = 0.3;
  bool classification = false;
  std::uint64_t seed = 1;
};

/// Sparse linear-model data for tests, sweeps and demos.
Table make_synthetic(const SyntheticOptions& opts);

}  // namespace sbl
