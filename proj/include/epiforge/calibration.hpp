// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Derivative-free calibration of compartmental parameters to an observed
// daily series, with weekly piecewise-constant parameters.

#include <optional>
#include <string>
#include <vector>

#include "epiforge/dataset.hpp"
#include "epiforge/nelder_mead.hpp"
#include "epiforge/ode.hpp"

namespace epiforge::calib {

using Vector = Eigen::VectorXd;

struct CalibrationProblem {
  ode::ModelKind kind = ode::ModelKind::Seirm;
  double population = 0.0;
  /// Daily observable: deaths (SEIRM) or ILI fraction (SIRS).
  Vector observations;
  int window_days = 7;
  ode::ParamBounds bounds;
  double outpatient_ratio = 0.0;
  /// One parameter vector shared by every window.
  bool tie_windows = false;
  /// Fixes the initial state instead of fitting it.
  std::optional<ode::State> initial_state;
  /// Order in which window errors are accumulated (identity when empty).
  std::vector<int> window_order;
  /// Weight of the squared step from the previous window's unconstrained
  /// parameters, added to each per-window objective.
  double proximal_weight = 1e-2;
  NelderMeadOptions optimizer{1e-12, 1500, 0.5};
  int restarts = 2;

  static CalibrationProblem make(ode::ModelKind kind, double population, Vector observations,
                                 double outpatient_ratio = 0.0);
  int windows() const;
};

struct CalibrationResult {
  ode::ModelKind kind = ode::ModelKind::Seirm;
  int window_days = 7;
  /// One parameter vector per window, each inside its box.
  std::vector<ode::Params> schedule;
  ode::State initial_state;
  /// Sum of squared daily observation errors over all windows.
  double fit_loss = 0.0;

  /// Per-day parameters over `days` days; the last window's values are
  /// held beyond the calibrated range.
  std::vector<ode::Params> daily_schedule(int days) const;
  /// states[0] is the initial state, states[d + 1] the end of day d.
  std::vector<ode::State> trajectory(int days, double population) const;
  /// Daily observable along the trajectory.
  Vector observable(int days, double population, double outpatient_ratio) const;
};

CalibrationResult calibrate_ode(const CalibrationProblem& problem);

/// Sum of squared errors of `result` against the problem's observations.
double fit_loss(const CalibrationProblem& problem, const CalibrationResult& result);

}  // namespace epiforge::calib
