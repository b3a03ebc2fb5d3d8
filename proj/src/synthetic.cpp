// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace epiforge::data {

Vector trajectory_observable(ode::ModelKind kind, const std::vector<ode::State>& states,
                             const std::vector<ode::Params>& params, double population, double outpatient_ratio) {
  const auto days = static_cast<Eigen::Index>(states.size()) - 1;
  Vector y(days);
  for (Eigen::Index d = 0; d < days; ++d) {
    const auto i = static_cast<std::size_t>(d);
    if (kind == ode::ModelKind::Seirm) {
      y(d) = states[i + 1](ode::seirm::M) - states[i](ode::seirm::M);
    } else {
      y(d) = ode::ili_observable(states[i + 1], params[i], population, outpatient_ratio);
    }
  }
  return y;
}

SyntheticWorld make_synthetic_world(const SyntheticWorldSpec& spec) {
  if (spec.regimes.empty() || spec.regimes.front().start_day != 0) {
    throw ConfigError("synthetic world: first regime must start at day 0");
  }
  if (spec.days < 1) throw ConfigError("synthetic world: days must be positive");
  const double N = spec.population;
  const ode::ModelKind kind = spec.model;

  SyntheticWorld world;
  world.params.resize(static_cast<std::size_t>(spec.days));
  for (int d = 0; d < spec.days; ++d) {
    for (const Regime& r : spec.regimes) {
      if (r.start_day <= d) world.params[static_cast<std::size_t>(d)] = r.params;
    }
  }

  ode::State s0 = spec.initial_state;
  if (s0.size() == 0) {
    if (kind == ode::ModelKind::Seirm) {
      s0 = ode::State{{N - 100.0, 50.0, 50.0, 0.0, 0.0}};
    } else {
      s0 = ode::State{{0.6 * N, 1000.0, 0.4 * N - 1000.0}};
    }
  }
  auto f = [&](const ode::State& s, const ode::Params& p) { return ode::rhs(kind, s, p, N); };
  world.states = ode::rk4_integrate(f, s0, world.params, 1.0, spec.days, N);
  world.clean_target = trajectory_observable(kind, world.states, world.params, N, spec.outpatient_ratio);

  Vector y = world.clean_target;
  if (spec.noise > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (int d = 0; d < spec.days; ++d) {
      const int w0 = (d / 7) * 7;
      const int len = std::min(7, spec.days - w0);
      const double block = world.clean_target.segment(w0, len).sum() * 7.0 / len;
      // Daily sd chosen so the weekly aggregate has sd = noise * weekly value.
      const double sd = kind == ode::ModelKind::Seirm ? spec.noise * block / std::sqrt(7.0)
                                                      : spec.noise * (block / 7.0) * std::sqrt(7.0);
      y(d) = std::max(0.0, y(d) + sd * unit(rng));
    }
  }

  RegionDataset& ds = world.dataset;
  ds.region = spec.region;
  ds.start = spec.start;
  ds.population = N;
  ds.target = y;
  const int I = kind == ode::ModelKind::Seirm ? ode::seirm::I : ode::sirs::I;
  const int S = kind == ode::ModelKind::Seirm ? ode::seirm::S : ode::sirs::S;
  ds.feature_names = {"infected_lag3", "incidence_7d", "mobility", "symptoms_lag1"};
  ds.features.resize(spec.days, 4);
  const double beta0 = spec.regimes.front().params(0);
  auto state_at = [&](int d) -> const ode::State& {
    return world.states[static_cast<std::size_t>(std::clamp(d + 1, 0, spec.days))];
  };
  for (int d = 0; d < spec.days; ++d) {
    ds.features(d, 0) = 1e3 * state_at(d - 3)(I) / N;
    double inc = 0.0;
    int n = 0;
    for (int k = std::max(0, d - 6); k <= d; ++k, ++n) inc += state_at(k - 1)(S) - state_at(k)(S);
    ds.features(d, 1) = 1e5 * inc / n / N;
    ds.features(d, 2) = world.params[static_cast<std::size_t>(d)](0) / beta0;
    ds.features(d, 3) = 1e3 * state_at(d - 1)(I) / N;
  }
  return world;
}

SyntheticWorldSpec two_regime_world(std::uint64_t seed) {
  SyntheticWorldSpec spec;
  spec.model = ode::ModelKind::Seirm;
  spec.population = 1e6;
  spec.days = 180;
  spec.regimes = {{0, ode::Params{{0.30, 0.2, 0.1, 0.01}}}, {90, ode::Params{{0.15, 0.2, 0.1, 0.01}}}};
  spec.noise = 0.05;
  spec.seed = seed;
  return spec;
}

}  // namespace epiforge::data
