// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Simulated surveillance data from a compartmental model with known
// parameters, for tests and the desk-scale evaluation study.

#include <cstdint>
#include <vector>

#include "epiforge/dataset.hpp"
#include "epiforge/ode.hpp"

namespace epiforge::data {

struct Regime {
  int start_day = 0;
  ode::Params params;
};

struct SyntheticWorldSpec {
  ode::ModelKind model = ode::ModelKind::Seirm;
  double population = 1e6;
  int days = 180;
  /// Piecewise-constant parameters; the first regime must start at day 0.
  std::vector<Regime> regimes;
  /// Defaults to E = I = 50 (SEIRM) or I = 1000 (SIRS) when empty.
  ode::State initial_state;
  /// Observation noise as a fraction of the true weekly target.
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string region = "synthetic";
  Day start = 18414;  // 2020-06-01
  double outpatient_ratio = 0.05;
};

struct SyntheticWorld {
  RegionDataset dataset;
  /// states[0] is the initial condition; states[d + 1] is the end of day d.
  std::vector<ode::State> states;
  std::vector<ode::Params> params;  // per day
  Vector clean_target;
};

/// Daily observable of a trajectory: M increments (SEIRM) or ILI (SIRS).
Vector trajectory_observable(ode::ModelKind kind, const std::vector<ode::State>& states,
                             const std::vector<ode::Params>& params, double population, double outpatient_ratio);

SyntheticWorld make_synthetic_world(const SyntheticWorldSpec& spec);

/// The two-regime SEIRM world of the evaluation study: N = 1e6, 180 days,
/// beta drops from 0.3 to 0.15 at day 90, 5% weekly observation noise.
SyntheticWorldSpec two_regime_world(std::uint64_t seed);

}  // namespace epiforge::data
