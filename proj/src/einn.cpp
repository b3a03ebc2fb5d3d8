// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/einn.hpp"

#include <algorithm>
#include <cmath>

#include "epiforge/log.hpp"

namespace epiforge::einn {

Problem make_problem(ode::ModelKind kind, data::TargetMode mode, const data::RegionDataset& train,
                     const Matrix& scaled_features, const calib::CalibrationResult& calibration,
                     const ProblemOptions& options) {
  const int T = train.days();
  if (T < 2) throw DimensionError("make_problem: need at least two training days");
  if (!(train.population > 0.0)) throw ConfigError("make_problem: region '" + train.region + "' has no population");
  if (scaled_features.rows() != T) throw DimensionError("make_problem: scaled features do not cover the training days");
  if (options.horizon_weeks < 1) throw ConfigError("make_problem: horizon must be at least one week");

  Problem p;
  p.mode = mode;
  p.train_days = T;
  p.horizon_days = 7 * options.horizon_weeks;
  p.collocation_days = options.collocate_horizon ? T + p.horizon_days : T;
  p.physics.kind = kind;
  p.physics.population = train.population;
  p.physics.outpatient_ratio = options.outpatient_ratio;
  p.physics.t0 = 0.0;
  p.physics.span = static_cast<double>(T - 1);

  const int table = T + p.horizon_days;
  p.daily_params = calibration.daily_schedule(table);
  const std::vector<ode::State> traj = calibration.trajectory(T, train.population);

  const int Ds = ode::state_dim(kind);
  Vector scale = Vector::Ones(Ds);
  for (int d = 0; d < T; ++d) scale = scale.cwiseMax(traj[static_cast<std::size_t>(d + 1)].cwiseAbs());
  Vector cumulative(T);
  double running = 0.0;
  for (int d = 0; d < T; ++d) cumulative(d) = running += train.target(d);
  if (kind == ode::ModelKind::Seirm) {
    scale(ode::seirm::M) = std::max(scale(ode::seirm::M), cumulative.cwiseAbs().maxCoeff());
  } else {
    const double ymax = train.target.cwiseAbs().maxCoeff();
    p.physics.target_scale = ymax > 0.0 ? ymax : 1.0;
  }
  p.physics.state_scale = scale;

  p.target.resize(1, T);
  if (kind == ode::ModelKind::Seirm) {
    p.target.row(0) = cumulative.transpose() / scale(ode::seirm::M);
  } else {
    p.target.row(0) = train.target.transpose() / p.physics.target_scale;
  }
  p.reference.resize(Ds, T);
  for (int d = 0; d < T; ++d) p.reference.col(d) = traj[static_cast<std::size_t>(d + 1)].cwiseQuotient(scale);

  if (scaled_features.cols() == 0) {
    log::warn("make_problem: region {} has no usable feature columns; using a constant input", train.region);
    p.features = Matrix::Zero(T, 1);
  } else {
    p.features = scaled_features;
  }
  p.mask.assign(static_cast<std::size_t>(T), true);
  return p;
}

Einn::Einn(const Problem& problem, const EinnConfig& config, std::uint64_t seed) {
  nn::Rng rng(seed);
  time = TimeNet(problem.physics.kind, problem.train_days + problem.horizon_days, config.time, rng);
  time.init_omega(problem.daily_params);
  feature = FeatureNet(static_cast<int>(problem.features.cols()), config.feature, rng);
}

void Einn::collect(nn::ParamList& out) {
  time.collect(out);
  feature.collect(out);
}

namespace {

Matrix tau_row(const Physics& physics, int first, int n) {
  Matrix tau(1, n);
  for (int j = 0; j < n; ++j) tau(0, j) = physics.tau(first + j);
  return tau;
}

/// Squashed parameters for days [first, first + n), holding the table's last
/// day beyond its end.
Matrix omega_clamped(const TimeNet& net, int first, int n) {
  const Matrix all = net.omega_values();
  Matrix out(all.rows(), n);
  for (int j = 0; j < n; ++j) out.col(j) = all.col(std::clamp(first + j, 0, static_cast<int>(all.cols()) - 1));
  return out;
}

}  // namespace

Matrix Einn::time_states(const Problem& problem, int first, int n) {
  Tape tape;
  Var tau = tape.constant(tau_row(problem.physics, first, n));
  return time.head.forward(tape, time.trunk.forward(tape, time.fourier.forward(tape, Dual(tau))).value).value();
}

Matrix Einn::feature_states(const Problem& problem, int first, int n) {
  Tape tape;
  Encoding enc = feature.encode(tape, problem.features, problem.mask);
  Var tau = tape.constant(tau_row(problem.physics, first, n));
  Dual e = feature.decode(tape, enc.summary, Dual(tau));
  return time.head.forward(tape, e.value).value();
}

WeeklyForecast Einn::forecast(const Problem& problem, int weeks) {
  if (weeks < 1) throw ConfigError("forecast: need at least one horizon");
  const int first = problem.train_days - 1;
  const int n = 1 + 7 * weeks;
  const Matrix states = feature_states(problem, first, n);
  const Matrix omega = omega_clamped(time, first, n);
  WeeklyForecast out;
  out.values = weekly_from_states(problem.physics, problem.mode, states, omega, weeks);
  for (int k = 1; k <= weeks; ++k) {
    const int last_day = problem.train_days + 7 * k - 1;
    const bool beyond = last_day >= problem.collocation_days;
    out.beyond_range.push_back(beyond);
    if (beyond) log::debug("forecast: horizon {} reaches past the collocated range", k);
  }
  return out;
}

std::vector<double> weekly_from_states(const Physics& physics, data::TargetMode mode, const Matrix& scaled_states,
                                       const Matrix& omega, int weeks) {
  if (scaled_states.cols() != 1 + 7 * weeks || omega.cols() != scaled_states.cols()) {
    throw DimensionError("weekly_from_states: expected 1 + 7 * weeks columns");
  }
  Tape tape;
  const Matrix obs = observable(physics, tape.constant(scaled_states), tape.constant(omega)).value();
  std::vector<double> out;
  for (int k = 0; k < weeks; ++k) {
    double total = 0.0;
    if (physics.kind == ode::ModelKind::Seirm) {
      total = (obs(0, 7 * (k + 1)) - obs(0, 7 * k)) * physics.state_scale(ode::seirm::M);
    } else {
      for (int j = 1; j <= 7; ++j) total += obs(0, 7 * k + j) * physics.target_scale;
    }
    out.push_back(mode == data::TargetMode::Covid ? total : total / 7.0);
  }
  return out;
}

}  // namespace epiforge::einn
