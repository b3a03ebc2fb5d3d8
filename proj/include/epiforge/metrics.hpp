// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Point-forecast scores: two normalized RMSEs, normalized deviation and the
// per-week Pearson correlation over horizons, plus their aggregation into a
// short/long score table.

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace epiforge::eval {

/// One scored point forecast.
struct ForecastRecord {
  std::string region;
  std::string model;
  int week = 0;     // prediction week
  int horizon = 0;  // 1..K
  double predicted = 0.0;
  double truth = 0.0;
  /// Horizon extends past the range the model was trained to cover.
  bool beyond_range = false;
};

/// Adds one death to the NR1 and ND denominators (COVID mode only).
struct MetricOptions {
  bool plus_one_guard = false;
};

/// RMSE / mean |y|. Undefined for an empty set or a zero denominator.
std::optional<double> nr1(std::span<const double> truth, std::span<const double> predicted, MetricOptions opt = {});
/// RMSE / (max y - min y). Undefined when y is constant.
std::optional<double> nr2(std::span<const double> truth, std::span<const double> predicted);
/// sum |y - yhat| / sum |y|.
std::optional<double> nd(std::span<const double> truth, std::span<const double> predicted, MetricOptions opt = {});
/// Pearson correlation; undefined when either side has zero variance.
std::optional<double> pearson(std::span<const double> truth, std::span<const double> predicted);

/// Record-set convenience overloads.
std::optional<double> nr1(std::span<const ForecastRecord> records, MetricOptions opt = {});
std::optional<double> nr2(std::span<const ForecastRecord> records);
std::optional<double> nd(std::span<const ForecastRecord> records, MetricOptions opt = {});

/// Correlation over the horizon sequence of one (region, model, week).
std::optional<double> pearson_per_week(std::span<const ForecastRecord> week_records);

/// Median of the defined values; undefined if none.
std::optional<double> median_defined(std::vector<std::optional<double>> values);

struct ScoreRow {
  std::string model;
  /// Empty for the all-regions row.
  std::string region;
  std::optional<double> nr1_short, nr2_short, nd_short;
  std::optional<double> nr1_long, nr2_long, nd_long;
  std::optional<double> pc;
  int records = 0;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;
  const ScoreRow* find(const std::string& model, const std::string& region = "") const;
};

/// Horizons 1..short_max are short term, the rest long term. Error metrics
/// pool records; PC is the median over weeks per region, averaged over
/// regions. Emits one row per (model, region) and one all-regions row per
/// model.
ScoreTable aggregate_scores(std::span<const ForecastRecord> records, MetricOptions opt = {}, int short_max = 4);

/// "NaN" for undefined values, otherwise shortest round-trip text.
std::string format_metric(const std::optional<double>& v);

}  // namespace epiforge::eval
