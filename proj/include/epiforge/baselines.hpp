// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Comparison forecasters: recurrent models trained on data, on the
// calibrated trajectory, or with a discrete ODE penalty; an ensembling
// combiner; the mechanistic continuation; persistence, AR and Lasso.

#include <cstdint>
#include <string>
#include <vector>

#include "epiforge/calibration.hpp"
#include "epiforge/einn.hpp"

namespace epiforge::base {

using einn::Problem;
using einn::WeeklyForecast;
using ad::Matrix;
using ad::Var;
using ad::Vector;

enum class BaselineKind { Generation, Regularization, Ensembling, Persistence, AR, LassoFeatures, MechanisticOnly, RnnOnly };

std::string to_string(BaselineKind kind);
/// Accepts the enumerator names case-insensitively. ConfigError otherwise.
BaselineKind baseline_from_string(const std::string& name);
const std::vector<BaselineKind>& all_baselines();

struct RnnConfig {
  einn::FeatureNetConfig net;
  std::vector<int> head_hidden{40, 40};
  int epochs = 1000;
  double lr = 1e-3;
  /// Weight of the discrete ODE penalty (Regularization only).
  double ode_weight = 1.0;
};

/// Encoder, attention and time-conditioned decoder with a private head.
/// With `predict_params` the head also emits the ODE parameters.
class BaseRnn {
 public:
  BaseRnn(const Problem& problem, const RnnConfig& config, std::uint64_t seed, bool predict_params);

  struct Output {
    Var states;  // D_s x n, scaled
    Var omega;   // P x n squashed, invalid without predict_params
  };
  Output forward(ad::Tape& tape, const Problem& problem, int first_day, int n);
  void collect(nn::ParamList& out);

  einn::FeatureNet feature;
  nn::Mlp head;
  ode::ParamBounds bounds;
  bool predict_params = false;
};

/// Mean over consecutive day pairs of |(s_{t+1} - s_t) - f(s_t, Omega_t)|^2
/// in scaled units (f divided by the state scale).
Var discrete_ode_penalty(const einn::Physics& physics, const Var& scaled_states, const Var& omega);

/// Data loss against `target` (1 x train_days, scaled like Problem::target)
/// plus the discrete penalty when the model predicts parameters. Returns
/// the per-epoch total loss.
std::vector<double> train_rnn(BaseRnn& model, const Problem& problem, const Matrix& target, const RnnConfig& config,
                              double ode_weight);

WeeklyForecast forecast_rnn(BaseRnn& model, const Problem& problem, int weeks);

/// Weekly in-sample fit over training weeks [1, train_days / 7).
std::vector<double> rnn_weekly_fit(BaseRnn& model, const Problem& problem);

/// The calibrated trajectory's observable in Problem::target units.
Matrix generation_target(const Problem& problem);

/// RK4 continuation of the calibration past the training days with the last
/// window's parameters.
std::vector<double> mechanistic_forecast(const calib::CalibrationResult& calibration, double population,
                                         double outpatient_ratio, data::TargetMode mode, int train_days, int weeks);
/// Weekly values of the calibrated observable over the training weeks.
std::vector<double> mechanistic_weekly_fit(const calib::CalibrationResult& calibration, double population,
                                           double outpatient_ratio, data::TargetMode mode, int train_days);

/// Last complete week repeated at every horizon.
std::vector<double> persistence_forecast(const Vector& daily_target, data::TargetMode mode, int weeks);

struct ArModel {
  int lags = 4;
  /// Intercept first, then the coefficients of y_{t-1} ... y_{t-lags}.
  Vector coef;
};

/// Minimum-norm least squares on lagged weekly values.
ArModel fit_ar(const Vector& weekly, int lags);
/// Iterated multi-step continuation of `weekly`.
std::vector<double> forecast_ar(const ArModel& model, const Vector& weekly, int weeks);

struct LassoFit {
  double intercept = 0.0;
  Vector coef;
  int iterations = 0;
};

/// Coordinate descent on (1 / 2n) |y - b - X w|^2 + lambda |w|_1 with an
/// unpenalized intercept.
LassoFit lasso(const Matrix& x, const Vector& y, double lambda, int max_iters = 10000, double tol = 1e-12);

/// Soft-threshold operator S(rho, lambda).
double soft_threshold(double rho, double lambda);

/// Direct per-horizon Lasso on `lags` lagged weekly targets and the latest
/// weekly feature means. `weekly_features` is W x D.
std::vector<double> lasso_forecast(const Vector& weekly, const Matrix& weekly_features, int lags, double lambda,
                                   int weeks);

/// Two-input feedforward combiner (2 -> 8 -> 1, tanh hidden layer).
class Combiner {
 public:
  explicit Combiner(std::uint64_t seed);

  /// `inputs` is n x 2, `targets` length n. Returns the final training MSE
  /// in normalized units.
  double fit(const Matrix& inputs, const Vector& targets, int epochs = 2000, double lr = 1e-2);
  double predict(double a, double b);

 private:
  nn::Mlp net_;
  double scale_ = 1.0;
};

/// One combiner per horizon, each trained on the same in-sample pairs.
std::vector<double> ensemble_forecast(const std::vector<double>& rnn, const std::vector<double>& mech,
                                      const Matrix& pair_inputs, const Vector& pair_targets, std::uint64_t seed);

}  // namespace epiforge::base
