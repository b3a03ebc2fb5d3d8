// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Rolling real-time evaluation: for each prediction week every model is
// retrained on the data available through that week and forecasts the next
// K weekly targets, which are scored against the full series.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "epiforge/calibration.hpp"
#include "epiforge/config.hpp"
#include "epiforge/metrics.hpp"

namespace epiforge::eval {

using ad::Matrix;

/// Everything a model may see for one (region, week) cell.
struct ForecastContext {
  const data::RegionDataset& train;  // days [0, 7 * week)
  const Matrix& scaled_features;     // scaler fitted on `train` only
  const data::Scaler& scaler;
  /// Null for models that do not need one.
  const calib::CalibrationResult* calibration = nullptr;
  double outpatient_ratio = 0.0;
  int week = 0;
  int horizon = 8;
  std::uint64_t seed = 0;
};

class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::string name() const = 0;
  virtual bool needs_calibration() const { return true; }
  virtual einn::WeeklyForecast forecast(const ForecastContext& ctx) const = 0;
};

/// "EINN", "EINN-NoGradMatching" or a baseline name.
std::unique_ptr<Forecaster> make_forecaster(const std::string& name, const cfg::Config& config);

/// What a cell exposed to its models, for leakage checks.
struct CellView {
  std::string region;
  int week = 0;
  /// Last day of the prediction week.
  data::Day cutoff = 0;
  data::Day last_training_day = 0;
  int feature_rows = 0;
  data::Scaler scaler;
};

class CalibrationCache {
 public:
  /// Calibrates on first use; later calls for the same key return the copy.
  calib::CalibrationResult get(const std::string& region, int week,
                               const std::function<calib::CalibrationResult()>& compute);
  void put(const std::string& region, int week, calib::CalibrationResult result);
  std::map<std::pair<std::string, int>, calib::CalibrationResult> entries() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, int>, calib::CalibrationResult> entries_;
};

struct ProtocolOptions {
  std::vector<int> weeks;
  int horizon = 8;
  int jobs = 1;
  ode::ModelKind kind = ode::ModelKind::Seirm;
  data::TargetMode mode = data::TargetMode::Covid;
  std::map<std::string, double> outpatient_ratio;
  std::uint64_t seed = 0;
  int calibration_restarts = 2;
  double calibration_proximal = 1e-2;
  std::function<void(const CellView&)> observer;
  CalibrationCache* cache = nullptr;
};

struct ProtocolResult {
  std::vector<ForecastRecord> records;
  /// One line per dropped record with the reason.
  std::vector<std::string> dropped;
};

ProtocolOptions protocol_options(const cfg::Config& config);

/// Calibration of the first 7 * week days of `region`.
calib::CalibrationResult calibrate_prefix(const data::RegionDataset& region, int week, ode::ModelKind kind,
                                          double outpatient_ratio, int restarts, double proximal);

ProtocolResult rolling_protocol(const std::vector<const Forecaster*>& models,
                                const std::vector<data::RegionDataset>& regions, const ProtocolOptions& options);

/// Weekly truth of `region` for prediction week `week` and horizon k, or
/// nothing if the series ends first.
std::optional<double> weekly_truth(const data::RegionDataset& region, data::TargetMode mode, int week, int k);

/// Weekly means of each column over complete weeks, W x D.
Matrix weekly_feature_means(const Matrix& daily);

}  // namespace epiforge::eval
