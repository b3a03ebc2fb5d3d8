// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "epiforge/errors.hpp"

namespace epiforge::data {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Calendar day as days since 1970-01-01.
using Day = int;

Day parse_date(const std::string& iso);
std::string format_date(Day day);

enum class TargetMode { Covid, Flu };

TargetMode target_mode_from_string(const std::string& name);
std::string to_string(TargetMode mode);

/// One region's daily multivariate series. Immutable after ingestion.
struct RegionDataset {
  std::string region;
  Day start = 0;
  std::vector<std::string> feature_names;
  Matrix features;  // T x D_x, raw units
  Vector target;    // T, daily deaths or ILI
  double population = 0.0;
  /// One entry per imputed cell ("feature@date: forward-filled").
  std::vector<std::string> imputations;

  int days() const { return static_cast<int>(target.size()); }
  Day last_day() const { return start + days() - 1; }
  /// First `n` days only.
  RegionDataset head(int n) const;
};

struct CsvSchema {
  std::string date_column = "date";
  std::string region_column = "region";
  std::string target_column = "target";
  /// Empty means every remaining column.
  std::vector<std::string> feature_columns;
};

/// Parses a UTF-8 CSV with a header row, one row per (region, date).
/// Missing cells (empty, NA, NaN) are forward-filled, then zero-filled at the
/// series start; every imputation is recorded on the dataset.
std::vector<RegionDataset> load_csv(const std::string& path, const CsvSchema& schema = {});
std::vector<RegionDataset> parse_csv(std::istream& in, const CsvSchema& schema = {});
void write_csv(const std::string& path, const std::vector<RegionDataset>& datasets, const CsvSchema& schema = {});
void write_csv(std::ostream& out, const std::vector<RegionDataset>& datasets, const CsvSchema& schema = {});

/// Per-column standard scaling fitted on a training slice.
struct Scaler {
  Vector mean;
  Vector stddev;  // population standard deviation
  std::vector<int> kept;     // indices of retained columns
  std::vector<int> dropped;  // zero-variance columns

  Matrix transform(const Matrix& x) const;
  Matrix inverse(const Matrix& scaled) const;
};

struct ScaledSeries {
  Matrix values;  // rows x kept columns
  Scaler scaler;
};

/// Fits mean/std on rows [0, train_rows) and transforms every row.
ScaledSeries standard_scale(const Matrix& series, int train_rows);

/// Weekly aggregation of a daily series: sum (COVID) or mean (flu) over
/// consecutive 7-day blocks. A partial trailing week is dropped.
Vector weekly_target(const Vector& daily, TargetMode mode);

}  // namespace epiforge::data
