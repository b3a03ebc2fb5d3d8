// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "epiforge/log.hpp"
#include "epiforge/optimizer.hpp"

namespace epiforge::base {

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Generation: return "Generation";
    case BaselineKind::Regularization: return "Regularization";
    case BaselineKind::Ensembling: return "Ensembling";
    case BaselineKind::Persistence: return "Persistence";
    case BaselineKind::AR: return "AR";
    case BaselineKind::LassoFeatures: return "LassoFeatures";
    case BaselineKind::MechanisticOnly: return "MechanisticOnly";
    case BaselineKind::RnnOnly: return "RnnOnly";
  }
  throw ConfigError("unknown baseline kind");
}

const std::vector<BaselineKind>& all_baselines() {
  static const std::vector<BaselineKind> kinds{BaselineKind::Generation,      BaselineKind::Regularization,
                                               BaselineKind::Ensembling,      BaselineKind::Persistence,
                                               BaselineKind::AR,              BaselineKind::LassoFeatures,
                                               BaselineKind::MechanisticOnly, BaselineKind::RnnOnly};
  return kinds;
}

BaselineKind baseline_from_string(const std::string& name) {
  auto lower = [](std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  for (BaselineKind k : all_baselines()) {
    if (lower(to_string(k)) == lower(name)) return k;
  }
  throw ConfigError("unknown baseline '" + name + "'");
}

// ---- recurrent baselines ---------------------------------------------------

BaseRnn::BaseRnn(const Problem& problem, const RnnConfig& config, std::uint64_t seed, bool predict_params_)
    : bounds(ode::ParamBounds::defaults(problem.physics.kind)), predict_params(predict_params_) {
  nn::Rng rng(seed);
  feature = einn::FeatureNet(static_cast<int>(problem.features.cols()), config.net, rng);
  std::vector<int> sizes{config.net.embed_dim};
  sizes.insert(sizes.end(), config.head_hidden.begin(), config.head_hidden.end());
  sizes.push_back(problem.physics.state_dim() + (predict_params ? problem.physics.param_dim() : 0));
  head = nn::Mlp("rnn.head", sizes, false, rng);
}

BaseRnn::Output BaseRnn::forward(ad::Tape& tape, const Problem& problem, int first_day, int n) {
  einn::Encoding enc = feature.encode(tape, problem.features, problem.mask);
  Matrix tau(1, n);
  for (int j = 0; j < n; ++j) tau(0, j) = problem.physics.tau(first_day + j);
  Var e = feature.decode(tape, enc.summary, ad::Dual(tape.constant(tau))).value;
  Var out = head.forward(tape, e);
  const int Ds = problem.physics.state_dim();
  Output o;
  o.states = ad::rows(out, 0, Ds);
  if (predict_params) o.omega = einn::squash_rows(tape, ad::rows(out, Ds, problem.physics.param_dim()), bounds);
  return o;
}

void BaseRnn::collect(nn::ParamList& out) {
  feature.collect(out);
  head.collect(out);
}

Var discrete_ode_penalty(const einn::Physics& physics, const Var& s, const Var& omega) {
  const Eigen::Index n = s.cols();
  if (n < 2) return s.tape().constant(0.0);
  ad::Tape& tape = s.tape();
  Var scale = tape.constant(Matrix(physics.state_scale));
  Var now = ad::cols(s, 0, n - 1);
  Var next = ad::cols(s, 1, n - 1);
  Var flows = einn::ode_flows(physics, now * scale, ad::cols(omega, 0, n - 1));
  return einn::mean_column_sq((next - now) - flows / scale);
}

namespace {

/// Parameters for days [first, first + n), holding the last entry past the end.
Matrix daily_param_block(const std::vector<ode::Params>& daily, int first, int n) {
  Matrix out(daily.front().size(), n);
  for (int j = 0; j < n; ++j) {
    out.col(j) = daily[static_cast<std::size_t>(std::clamp(first + j, 0, static_cast<int>(daily.size()) - 1))];
  }
  return out;
}

}  // namespace

std::vector<double> train_rnn(BaseRnn& model, const Problem& problem, const Matrix& target, const RnnConfig& config,
                              double ode_weight) {
  if (config.epochs < 1) throw ConfigError("train_rnn: epochs must be at least 1");
  if (ode_weight < 0.0) throw ConfigError("train_rnn: penalty weight must be non-negative");
  nn::ParamList params;
  model.collect(params);
  Adam adam(params, AdamOptions{config.lr});
  const int T = problem.train_days;
  const Matrix fixed_omega = daily_param_block(problem.daily_params, 0, T);
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ad::Tape tape;
    BaseRnn::Output out = model.forward(tape, problem, 0, T);
    Var omega = model.predict_params ? out.omega : tape.constant(fixed_omega);
    Var loss = einn::mse(einn::observable(problem.physics, out.states, omega), target);
    if (model.predict_params && ode_weight > 0.0) {
      loss = loss + discrete_ode_penalty(problem.physics, out.states, out.omega) * ode_weight;
    }
    const double value = loss.scalar();
    if (!std::isfinite(value)) throw TrainingError("train_rnn: non-finite loss at epoch " + std::to_string(epoch));
    tape.backward(loss);
    for (ad::Parameter* p : params) p->grad = tape.gradient(*p);
    adam.step();
    history.push_back(value);
  }
  return history;
}

WeeklyForecast forecast_rnn(BaseRnn& model, const Problem& problem, int weeks) {
  if (weeks < 1) throw ConfigError("forecast: need at least one horizon");
  const int first = problem.train_days - 1;
  const int n = 1 + 7 * weeks;
  ad::Tape tape;
  BaseRnn::Output out = model.forward(tape, problem, first, n);
  const Matrix omega = model.predict_params ? out.omega.value() : daily_param_block(problem.daily_params, first, n);
  WeeklyForecast f;
  f.values = einn::weekly_from_states(problem.physics, problem.mode, out.states.value(), omega, weeks);
  f.beyond_range.assign(static_cast<std::size_t>(weeks), true);
  return f;
}

std::vector<double> rnn_weekly_fit(BaseRnn& model, const Problem& problem) {
  const int weeks = problem.train_days / 7;
  std::vector<double> out;
  if (weeks < 2) return out;
  ad::Tape tape;
  BaseRnn::Output o = model.forward(tape, problem, 6, 1 + 7 * (weeks - 1));
  const Matrix omega = model.predict_params ? o.omega.value()
                                            : daily_param_block(problem.daily_params, 6, 1 + 7 * (weeks - 1));
  return einn::weekly_from_states(problem.physics, problem.mode, o.states.value(), omega, weeks - 1);
}

Matrix generation_target(const Problem& problem) {
  const int T = problem.train_days;
  if (problem.physics.kind == ode::ModelKind::Seirm) return problem.reference.row(ode::seirm::M);
  ad::Tape tape;
  Var states = tape.constant(problem.reference);
  Var omega = tape.constant(daily_param_block(problem.daily_params, 0, T));
  return einn::observable(problem.physics, states, omega).value();
}

// ---- mechanistic -----------------------------------------------------------

std::vector<double> mechanistic_forecast(const calib::CalibrationResult& calibration, double population,
                                         double outpatient_ratio, data::TargetMode mode, int train_days, int weeks) {
  if (weeks < 1) throw ConfigError("forecast: need at least one horizon");
  const Vector obs = calibration.observable(train_days + 7 * weeks, population, outpatient_ratio);
  const Vector weekly = data::weekly_target(obs.tail(7 * weeks), mode);
  return std::vector<double>(weekly.data(), weekly.data() + weekly.size());
}

std::vector<double> mechanistic_weekly_fit(const calib::CalibrationResult& calibration, double population,
                                           double outpatient_ratio, data::TargetMode mode, int train_days) {
  const Vector weekly = data::weekly_target(calibration.observable(train_days, population, outpatient_ratio), mode);
  return std::vector<double>(weekly.data(), weekly.data() + weekly.size());
}

// ---- simple statistical baselines ------------------------------------------

std::vector<double> persistence_forecast(const Vector& daily_target, data::TargetMode mode, int weeks) {
  const Vector weekly = data::weekly_target(daily_target, mode);
  if (weekly.size() == 0) throw DimensionError("persistence: no complete training week");
  return std::vector<double>(static_cast<std::size_t>(weeks), weekly(weekly.size() - 1));
}

ArModel fit_ar(const Vector& weekly, int lags) {
  if (lags < 1) throw ConfigError("fit_ar: lags must be at least 1");
  const Eigen::Index n = weekly.size() - lags;
  if (n < 1) throw DimensionError("fit_ar: series shorter than lags + 1");
  Matrix x(n, lags + 1);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index t = i + lags;
    x(i, 0) = 1.0;
    for (int l = 1; l <= lags; ++l) x(i, l) = weekly(t - l);
    y(i) = weekly(t);
  }
  ArModel m;
  m.lags = lags;
  m.coef = x.completeOrthogonalDecomposition().solve(y);
  return m;
}

std::vector<double> forecast_ar(const ArModel& model, const Vector& weekly, int weeks) {
  if (weekly.size() < model.lags) throw DimensionError("forecast_ar: history shorter than the lag count");
  std::vector<double> hist(weekly.data(), weekly.data() + weekly.size());
  std::vector<double> out;
  for (int k = 0; k < weeks; ++k) {
    double y = model.coef(0);
    for (int l = 1; l <= model.lags; ++l) y += model.coef(l) * hist[hist.size() - static_cast<std::size_t>(l)];
    hist.push_back(y);
    out.push_back(y);
  }
  return out;
}

double soft_threshold(double rho, double lambda) {
  if (rho > lambda) return rho - lambda;
  if (rho < -lambda) return rho + lambda;
  return 0.0;
}

LassoFit lasso(const Matrix& x, const Vector& y, double lambda, int max_iters, double tol) {
  if (x.rows() != y.size() || x.rows() == 0) throw DimensionError("lasso: design and target sizes differ");
  if (lambda < 0.0) throw ConfigError("lasso: lambda must be non-negative");
  const double n = static_cast<double>(x.rows());
  const Vector xmean = x.colwise().mean();
  const double ymean = y.mean();
  const Matrix xc = x.rowwise() - xmean.transpose();
  const Vector yc = y.array() - ymean;
  const Vector sq = xc.colwise().squaredNorm() / n;
  LassoFit fit;
  fit.coef = Vector::Zero(x.cols());
  Vector resid = yc;
  for (fit.iterations = 0; fit.iterations < max_iters; ++fit.iterations) {
    double max_step = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (sq(j) == 0.0) continue;
      const double old = fit.coef(j);
      const double rho = xc.col(j).dot(resid) / n + sq(j) * old;
      const double updated = soft_threshold(rho, lambda) / sq(j);
      if (updated != old) {
        resid -= xc.col(j) * (updated - old);
        fit.coef(j) = updated;
        max_step = std::max(max_step, std::abs(updated - old));
      }
    }
    if (max_step < tol) break;
  }
  fit.intercept = ymean - xmean.dot(fit.coef);
  return fit;
}

std::vector<double> lasso_forecast(const Vector& weekly, const Matrix& weekly_features, int lags, double lambda,
                                   int weeks) {
  const Eigen::Index W = weekly.size();
  if (weekly_features.rows() != W) throw DimensionError("lasso_forecast: feature weeks differ from target weeks");
  if (W < lags) throw DimensionError("lasso_forecast: history shorter than the lag count");
  const Eigen::Index D = weekly_features.cols();
  double unit = weekly.cwiseAbs().mean();
  if (!(unit > 0.0)) unit = 1.0;
  auto row = [&](Eigen::Index t) {
    Vector r(lags + D);
    for (int l = 0; l < lags; ++l) r(l) = weekly(t - l) / unit;
    r.tail(D) = weekly_features.row(t).transpose();
    return r;
  };
  std::vector<double> out;
  for (int h = 1; h <= weeks; ++h) {
    const Eigen::Index first = lags - 1;
    const Eigen::Index n = W - h - first;
    if (n < 1) {
      log::debug("lasso_forecast: no training pairs for horizon {}; holding the last value", h);
      out.push_back(weekly(W - 1));
      continue;
    }
    Matrix x(n, lags + D);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = row(first + i).transpose();
      y(i) = weekly(first + i + h) / unit;
    }
    const LassoFit fit = lasso(x, y, lambda);
    out.push_back((fit.intercept + row(W - 1).dot(fit.coef)) * unit);
  }
  return out;
}

// ---- ensembling --------------------------------------------------------------

Combiner::Combiner(std::uint64_t seed) {
  nn::Rng rng(seed);
  net_ = nn::Mlp("ensemble", {2, 8, 1}, false, rng);
}

double Combiner::fit(const Matrix& inputs, const Vector& targets, int epochs, double lr) {
  if (inputs.cols() != 2 || inputs.rows() != targets.size() || inputs.rows() == 0) {
    throw DimensionError("Combiner::fit: expected n x 2 inputs and n targets");
  }
  scale_ = std::max(inputs.cwiseAbs().maxCoeff(), targets.cwiseAbs().maxCoeff());
  if (!(scale_ > 0.0)) scale_ = 1.0;
  const Matrix x = inputs.transpose() / scale_;
  const Matrix y = targets.transpose() / scale_;
  nn::ParamList params;
  net_.collect(params);
  Adam adam(params, AdamOptions{lr});
  double last = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    ad::Tape tape;
    Var loss = einn::mse(net_.forward(tape, tape.constant(x)), y);
    last = loss.scalar();
    tape.backward(loss);
    for (ad::Parameter* p : params) p->grad = tape.gradient(*p);
    adam.step();
  }
  return last;
}

double Combiner::predict(double a, double b) {
  ad::Tape tape;
  Matrix x(2, 1);
  x << a / scale_, b / scale_;
  return net_.forward(tape, tape.constant(x)).scalar() * scale_;
}

std::vector<double> ensemble_forecast(const std::vector<double>& rnn, const std::vector<double>& mech,
                                      const Matrix& pair_inputs, const Vector& pair_targets, std::uint64_t seed) {
  if (rnn.size() != mech.size()) throw DimensionError("ensemble_forecast: member forecasts differ in length");
  std::vector<double> out;
  for (std::size_t k = 0; k < rnn.size(); ++k) {
    Combiner c(seed + k);
    c.fit(pair_inputs, pair_targets);
    out.push_back(c.predict(rnn[k], mech[k]));
  }
  return out;
}

}  // namespace epiforge::base
