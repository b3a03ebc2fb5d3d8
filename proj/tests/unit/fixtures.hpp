// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// A small scaled SEIRM problem on the two-regime world, shared by the
// training and baseline tests.

#include "epiforge/einn.hpp"
#include "epiforge/protocol.hpp"
#include "epiforge/synthetic.hpp"

namespace testutil {

struct ToyProblem {
  epiforge::data::RegionDataset train;
  epiforge::data::Scaler scaler;
  epiforge::calib::CalibrationResult calibration;
  epiforge::einn::Problem problem;
};

inline ToyProblem toy_problem(int weeks = 6, int horizon_weeks = 2) {
  using namespace epiforge;
  static const data::SyntheticWorld world = data::make_synthetic_world(data::two_regime_world(0));
  ToyProblem out;
  out.train = world.dataset.head(7 * weeks);
  data::ScaledSeries scaled = data::standard_scale(out.train.features, out.train.days());
  out.scaler = scaled.scaler;
  out.calibration = eval::calibrate_prefix(world.dataset, weeks, ode::ModelKind::Seirm, 0.0, 0, 1e-2);
  einn::ProblemOptions options;
  options.horizon_weeks = horizon_weeks;
  out.problem = einn::make_problem(ode::ModelKind::Seirm, data::TargetMode::Covid, out.train, scaled.values,
                                   out.calibration, options);
  return out;
}

inline epiforge::einn::EinnConfig toy_config() {
  epiforge::einn::EinnConfig cfg;
  cfg.time.fourier_rows = 4;
  cfg.time.trunk = {8, 8, 6};
  cfg.time.head_hidden = {8};
  cfg.feature = {4, 1, 6};
  return cfg;
}

}  // namespace testutil
