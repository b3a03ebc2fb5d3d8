// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/ranges.h>

#include "epiforge/log.hpp"
#include "epiforge/synthetic.hpp"

namespace epiforge::calib {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int init_dim(const CalibrationProblem& p) { return p.initial_state ? 0 : 2; }

ode::State decode_state(const CalibrationProblem& p, const Eigen::VectorXd& x) {
  if (p.initial_state) return *p.initial_state;
  const double N = p.population;
  if (p.kind == ode::ModelKind::Seirm) {
    const double e0 = std::exp(std::clamp(x(0), -30.0, std::log(0.25 * N)));
    const double i0 = std::exp(std::clamp(x(1), -30.0, std::log(0.25 * N)));
    return ode::State{{N - e0 - i0, e0, i0, 0.0, 0.0}};
  }
  const double s0 = ode::squash(x(0), {0.0, 1.0}) * N;
  const double i0 = std::min(std::exp(std::clamp(x(1), -30.0, 30.0)), 0.5 * (N - s0));
  return ode::State{{s0, i0, N - s0 - i0}};
}

Eigen::VectorXd encode_state(const CalibrationProblem& p, const ode::State& s) {
  if (p.initial_state) return Eigen::VectorXd(0);
  if (p.kind == ode::ModelKind::Seirm) {
    return Eigen::VectorXd{{std::log(std::max(s(ode::seirm::E), 1e-9)), std::log(std::max(s(ode::seirm::I), 1e-9))}};
  }
  return Eigen::VectorXd{{ode::unsquash(std::clamp(s(ode::sirs::S) / p.population, 1e-6, 1.0 - 1e-6), {0.0, 1.0}),
                          std::log(std::max(s(ode::sirs::I), 1e-9))}};
}

ode::Params initial_params(ode::ModelKind kind) {
  if (kind == ode::ModelKind::Seirm) return ode::Params{{0.4, 0.25, 0.15, 0.005}};
  return ode::Params{{0.8, 3.0, 1000.0}};
}

ode::State initial_state_guess(const CalibrationProblem& p, const ode::Params& params) {
  const double N = p.population;
  const int n = std::min<int>(7, static_cast<int>(p.observations.size()));
  const double y0 = std::max(p.observations.head(n).mean(), 1e-6);
  if (p.kind == ode::ModelKind::Seirm) {
    const double i0 = std::clamp(y0 / params(ode::seirm::mu), 1.0, 0.01 * N);
    return ode::State{{N - 2.0 * i0, i0, i0, 0.0, 0.0}};
  }
  const double s0 = 0.6 * N;
  const double i0 = std::clamp(y0 * N * p.outpatient_ratio / (params(ode::sirs::beta) * s0 / N), 1.0, 0.01 * N);
  return ode::State{{s0, i0, N - s0 - i0}};
}

// Simulates `days` days from `s0` with per-day params and returns the daily
// observable, or nothing if the integration becomes unstable.
std::optional<Vector> simulate(const CalibrationProblem& p, const ode::State& s0,
                               const std::vector<ode::Params>& daily, int first_day, int days,
                               ode::State* end_state = nullptr) {
  const double N = p.population;
  auto f = [&](const ode::State& s, const ode::Params& q) { return ode::rhs(p.kind, s, q, N); };
  std::vector<ode::State> states;
  try {
    states = ode::rk4_integrate(f, s0, std::span<const ode::Params>(daily).subspan(static_cast<std::size_t>(first_day)),
                                1.0, days, N);
  } catch (const StabilityError&) {
    return std::nullopt;
  }
  if (end_state) *end_state = states.back();
  std::vector<ode::Params> sub(daily.begin() + first_day, daily.begin() + first_day + days);
  return data::trajectory_observable(p.kind, states, sub, N, p.outpatient_ratio);
}

double sse(const Vector& predicted, const Vector& observed) { return (predicted - observed).squaredNorm(); }

}  // namespace

CalibrationProblem CalibrationProblem::make(ode::ModelKind kind, double population, Vector observations,
                                            double outpatient_ratio) {
  CalibrationProblem p;
  p.kind = kind;
  p.population = population;
  p.observations = std::move(observations);
  p.bounds = ode::ParamBounds::defaults(kind);
  p.outpatient_ratio = outpatient_ratio;
  return p;
}

int CalibrationProblem::windows() const {
  return static_cast<int>((observations.size() + window_days - 1) / window_days);
}

std::vector<ode::Params> CalibrationResult::daily_schedule(int days) const {
  std::vector<ode::Params> out;
  out.reserve(static_cast<std::size_t>(days));
  for (int d = 0; d < days; ++d) {
    const auto w = std::min<std::size_t>(static_cast<std::size_t>(d / window_days), schedule.size() - 1);
    out.push_back(schedule[w]);
  }
  return out;
}

std::vector<ode::State> CalibrationResult::trajectory(int days, double population) const {
  auto f = [&](const ode::State& s, const ode::Params& q) { return ode::rhs(kind, s, q, population); };
  return ode::rk4_integrate(f, initial_state, daily_schedule(days), 1.0, days, population);
}

Vector CalibrationResult::observable(int days, double population, double outpatient_ratio) const {
  return data::trajectory_observable(kind, trajectory(days, population), daily_schedule(days), population,
                                     outpatient_ratio);
}

CalibrationResult calibrate_ode(const CalibrationProblem& p) {
  if (!(p.population > 0.0)) throw DomainError("calibrate_ode: population must be positive");
  if (p.kind == ode::ModelKind::Sirs && !(p.outpatient_ratio > 0.0 && p.outpatient_ratio <= 1.0)) {
    throw ConfigError("calibrate_ode: SIRS needs an outpatient ratio in (0, 1]");
  }
  if (p.bounds.size() != static_cast<std::size_t>(ode::param_dim(p.kind))) {
    throw ConfigError("calibrate_ode: bounds do not match the model");
  }
  const int T = static_cast<int>(p.observations.size());
  const int W = p.windows();
  if (W < 2) throw DomainError("calibrate_ode: need at least two windows of observations");
  if (!p.initial_state && p.observations.cwiseAbs().maxCoeff() == 0.0) {
    throw DegenerateDataError("calibrate_ode: observations are zero in every window");
  }

  const int nd = init_dim(p);
  const int np = ode::param_dim(p.kind);
  const double norm = p.observations.squaredNorm() + 1e-12;
  std::vector<int> order = p.window_order;
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(W));
    std::iota(order.begin(), order.end(), 0);
  }

  // Stage 1: one parameter vector over the whole series, plus the initial state.
  const ode::Params p_guess = initial_params(p.kind);
  Eigen::VectorXd x0(nd + np);
  x0.head(nd) = encode_state(p, p.initial_state ? *p.initial_state : initial_state_guess(p, p_guess));
  x0.tail(np) = ode::unsquash(p_guess, p.bounds);

  auto tied_objective = [&](const Eigen::VectorXd& x) {
    const ode::State s0 = decode_state(p, x.head(nd));
    const ode::Params q = ode::squash(x.tail(np), p.bounds);
    std::vector<ode::Params> daily(static_cast<std::size_t>(T), q);
    auto y = simulate(p, s0, daily, 0, T);
    if (!y) return kInf;
    double total = 0.0;
    for (int w : order) {
      const int a = w * p.window_days;
      const int len = std::min(p.window_days, T - a);
      total += sse(y->segment(a, len), p.observations.segment(a, len));
    }
    return total / norm;
  };
  NelderMeadResult tied = nelder_mead(tied_objective, x0, p.optimizer);
  for (int r = 0; r < p.restarts; ++r) tied = nelder_mead(tied_objective, tied.x, p.optimizer);
  log::debug("calibrate_ode: shared fit {} with parameters [{}]", tied.f,
             fmt::join(ode::squash(tied.x.tail(np), p.bounds), ", "));

  CalibrationResult result;
  result.kind = p.kind;
  result.window_days = p.window_days;
  result.initial_state = decode_state(p, tied.x.head(nd));
  const ode::Params shared = ode::squash(tied.x.tail(np), p.bounds);
  result.schedule.assign(static_cast<std::size_t>(W), shared);

  if (!p.tie_windows) {
    // Stage 2: windows in time order, each warm-started from the previous
    // optimum. A window's parameters are scored on the data from its start
    // to the end of the series, assuming they persist.
    ode::State s_start = result.initial_state;
    Eigen::VectorXd prev = tied.x.tail(np);
    for (int w = 0; w < W; ++w) {
      const int a = w * p.window_days;
      const int rest = T - a;
      const double wnorm = p.observations.segment(a, rest).squaredNorm() + 1e-12;
      const Eigen::VectorXd anchor = prev;
      auto window_objective = [&](const Eigen::VectorXd& x) {
        const ode::Params q = ode::squash(x, p.bounds);
        std::vector<ode::Params> daily(static_cast<std::size_t>(T), q);
        auto y = simulate(p, s_start, daily, a, rest);
        if (!y) return kInf;
        return sse(*y, p.observations.segment(a, rest)) / wnorm + p.proximal_weight * (x - anchor).squaredNorm();
      };
      NelderMeadResult best = nelder_mead(window_objective, prev, p.optimizer);
      prev = best.x;
      result.schedule[static_cast<std::size_t>(w)] = ode::squash(best.x, p.bounds);
      const int len = std::min(p.window_days, rest);
      std::vector<ode::Params> daily(static_cast<std::size_t>(T), result.schedule[static_cast<std::size_t>(w)]);
      ode::State next;
      if (!simulate(p, s_start, daily, a, len, &next)) {
        throw StabilityError("calibrate_ode: unstable trajectory in window " + std::to_string(w), a);
      }
      s_start = next;
    }
  }

  for (const ode::Params& q : result.schedule) {
    if (!p.bounds.contains(q)) throw ContractError("calibrate_ode: parameter left its box");
  }
  result.fit_loss = fit_loss(p, result);
  log::debug("calibrate_ode: {} windows, fit loss {}", W, result.fit_loss);
  return result;
}

double fit_loss(const CalibrationProblem& problem, const CalibrationResult& result) {
  const int T = static_cast<int>(problem.observations.size());
  const Vector y = result.observable(T, problem.population, problem.outpatient_ratio);
  return sse(y, problem.observations);
}

}  // namespace epiforge::calib
