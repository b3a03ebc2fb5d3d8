// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Time-input PINN: Fourier features, a tanh trunk producing the embedding
// e_t, the shared output head producing scaled ODE states, a learnable
// per-day parameter table, and the time-module losses.
//
// States are produced in scaled units: the network emits s_i / scale_i. All
// residuals are divided by the same per-compartment scale, so every loss is
// O(1) regardless of population size.

#include <random>
#include <vector>

#include "epiforge/autodiff.hpp"
#include "epiforge/nn.hpp"
#include "epiforge/ode.hpp"

namespace epiforge::einn {

using ad::Dual;
using ad::Matrix;
using ad::Tape;
using ad::Var;
using Vector = Eigen::VectorXd;

/// Problem constants shared by every ODE-aware loss.
struct Physics {
  ode::ModelKind kind = ode::ModelKind::Seirm;
  double population = 1.0;
  double outpatient_ratio = 0.0;
  /// Normalized time is (day - t0) / span.
  double t0 = 0.0;
  double span = 1.0;
  Vector state_scale;
  /// Divides the observable in data losses (ILI only; deaths use scale_M).
  double target_scale = 1.0;

  double tau(double day) const { return (day - t0) / span; }
  int state_dim() const { return ode::state_dim(kind); }
  int param_dim() const { return ode::param_dim(kind); }
};

class FourierMap {
 public:
  FourierMap() = default;
  /// Samples B (rows x 1) from N(0, sigma^2).
  FourierMap(int rows, double sigma, nn::Rng& rng);
  explicit FourierMap(Matrix b) : b_(std::move(b)) {}

  /// [cos(2 pi B t); sin(2 pi B t)] for each column of the 1 x n input.
  Dual forward(Tape& tape, const Dual& t) const;
  Vector evaluate(double t) const;

  const Matrix& b() const { return b_; }
  int output_dim() const { return 2 * static_cast<int>(b_.rows()); }

 private:
  Matrix b_;
};

struct TimeNetConfig {
  int fourier_rows = 20;
  double fourier_sigma = 1.0;
  /// Trunk widths including the Fourier output; the last is D_e.
  std::vector<int> trunk{40, 40, 40, 20};
  /// Hidden widths of the head between D_e and D_s.
  std::vector<int> head_hidden{40, 40};
};

/// Outputs of one batched pass over consecutive days.
struct TimeForward {
  int first_day = 0;
  int days = 0;
  Var tau;      // 1 x n
  Dual e;       // D_e x n; tangent is de/dtau
  Dual s;       // D_s x n scaled states; tangent is ds/dtau
  Var omega;    // P x n squashed parameters
};

class TimeNet {
 public:
  TimeNet() = default;
  TimeNet(ode::ModelKind kind, int table_days, const TimeNetConfig& config, nn::Rng& rng);

  /// Forward over days [first_day, first_day + n). With `tangent`, tau is
  /// seeded so e and s carry d/dtau.
  TimeForward forward(Tape& tape, const Physics& physics, int first_day, int n, bool tangent = true);

  /// Squashed parameters for days [first, first + n) as a P x n node.
  Var omega(Tape& tape, int first_day, int n);
  /// Squashed table as plain values (P x table_days).
  Matrix omega_values() const;
  /// Broadcasts a per-day schedule into the unconstrained table.
  void init_omega(const std::vector<ode::Params>& daily);

  void collect(nn::ParamList& out);
  void collect_trunk(nn::ParamList& out);
  void collect_head(nn::ParamList& out);

  int table_days() const { return static_cast<int>(omega_table.value.cols()); }

  ode::ModelKind kind = ode::ModelKind::Seirm;
  ode::ParamBounds bounds;
  FourierMap fourier;
  nn::Mlp trunk;
  /// Shared with the feature module.
  nn::Mlp head;
  ad::Parameter omega_table;
};

/// Columns [first, first + n) of every block of a forward pass.
TimeForward slice_days(const TimeForward& f, int first, int n);

/// Squashes each row of `x` into its box: lo + (hi - lo) * sigmoid(clamp(x)).
Var squash_rows(Tape& tape, const Var& x, const ode::ParamBounds& bounds);

/// Compartment flows (persons/day) at natural-unit states, D_s x n.
Var ode_flows(const Physics& physics, const Var& states, const Var& omega);

/// Per-day residual of scaled states: (ds/dtau) / span - f(scale * s) / scale.
Var ode_residual(const Physics& physics, const Dual& scaled_states, const Var& omega);

/// Model observable in scaled units, 1 x n: M / scale_M for SEIRM,
/// ILI / target_scale for SIRS.
Var observable(const Physics& physics, const Var& scaled_states, const Var& omega);

/// Mean over columns of the squared column norm.
Var mean_column_sq(const Var& diff);

/// Mean squared error between a 1 x n prediction and target.
Var mse(const Var& predicted, const Matrix& target);

Var loss_ode_time(const Physics& physics, const TimeForward& f);
Var loss_data_time(const Physics& physics, const TimeForward& f, const Matrix& target);
/// mean (dS relu(dS))^2 + mean (-dR relu(-dR))^2 for 1 x n rows.
Var monotonicity_penalty(const Var& ds, const Var& dr);
/// Applies the penalty to ds/dtau and dR/dtau (SEIRM); zero for SIRS.
Var loss_monotonicity(const Physics& physics, const TimeForward& f);
Var loss_param_consistency(Tape& tape, TimeNet& net);
/// `reference` is D_s x n in scaled units.
Var loss_helper_analytic(const TimeForward& f, const Matrix& reference);

/// Fraction of days whose dS/dt is positive.
double fraction_increasing_s(const TimeForward& f);

}  // namespace epiforge::einn
