// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The composed model: a time module and a feature module sharing one output
// head and one parameter table, plus the per-region problem they are
// trained on.

#include <cstdint>
#include <vector>

#include "epiforge/calibration.hpp"
#include "epiforge/dataset.hpp"
#include "epiforge/feature_module.hpp"
#include "epiforge/time_module.hpp"

namespace epiforge::einn {

/// One region's training problem in network units.
struct Problem {
  Physics physics;
  data::TargetMode mode = data::TargetMode::Covid;
  int train_days = 0;
  int horizon_days = 0;
  /// Days [0, collocation_days) carry the unsupervised terms.
  int collocation_days = 0;
  Matrix features;  // train_days x D_x, scaled
  std::vector<bool> mask;
  /// 1 x train_days observable target in scaled units (cumulative deaths for
  /// SEIRM, ILI for SIRS).
  Matrix target;
  /// D_s x train_days calibrated trajectory (end of each day), scaled.
  Matrix reference;
  /// Calibrated per-day parameters over the whole table.
  std::vector<ode::Params> daily_params;
};

struct ProblemOptions {
  int horizon_weeks = 8;
  /// Extend the unsupervised terms over the forecast horizon.
  bool collocate_horizon = true;
  double outpatient_ratio = 0.0;
};

/// Builds the scaled problem from a training slice, its scaled features and
/// a calibration of the same slice.
Problem make_problem(ode::ModelKind kind, data::TargetMode mode, const data::RegionDataset& train,
                     const Matrix& scaled_features, const calib::CalibrationResult& calibration,
                     const ProblemOptions& options);

struct EinnConfig {
  TimeNetConfig time;
  FeatureNetConfig feature;
};

struct WeeklyForecast {
  std::vector<double> values;
  /// True where the horizon reaches past the collocated range.
  std::vector<bool> beyond_range;
};

class Einn {
 public:
  Einn(const Problem& problem, const EinnConfig& config, std::uint64_t seed);

  /// Feature-module forecast of the next `weeks` weekly targets, natural units.
  WeeklyForecast forecast(const Problem& problem, int weeks);

  /// Scaled states of each module over days [first, first + n), D_s x n.
  Matrix time_states(const Problem& problem, int first, int n);
  Matrix feature_states(const Problem& problem, int first, int n);

  void collect(nn::ParamList& out);

  TimeNet time;
  FeatureNet feature;
};

/// Weekly targets in natural units from scaled states over 1 + 7 * weeks
/// consecutive days. Column 0 is the last training day, which anchors the
/// cumulative-death difference of the first week.
std::vector<double> weekly_from_states(const Physics& physics, data::TargetMode mode, const Matrix& scaled_states,
                                       const Matrix& omega, int weeks);

}  // namespace epiforge::einn
