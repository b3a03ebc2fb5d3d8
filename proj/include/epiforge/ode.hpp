// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// SEIRM and SIRS compartmental models, parameter boxes, observation maps and
// a fixed-step RK4 integrator.

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "epiforge/errors.hpp"

namespace epiforge::ode {

enum class ModelKind { Seirm, Sirs };

using State = Eigen::VectorXd;
using Params = Eigen::VectorXd;

int state_dim(ModelKind kind);
int param_dim(ModelKind kind);
const std::vector<std::string>& state_names(ModelKind kind);
const std::vector<std::string>& param_names(ModelKind kind);
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Index helpers. SEIRM: S E I R M / beta alpha gamma mu. SIRS: S I R / beta D L.
namespace seirm {
inline constexpr int S = 0, E = 1, I = 2, R = 3, M = 4;
inline constexpr int beta = 0, alpha = 1, gamma = 2, mu = 3;
}  // namespace seirm
namespace sirs {
inline constexpr int S = 0, I = 1, R = 2;
inline constexpr int beta = 0, D = 1, L = 2;
}  // namespace sirs

struct Box {
  double lo = 0.0;
  double hi = 1.0;
};

/// Unconstrained values are clamped to +-kSquashLimit before the logistic so
/// the squashed value stays strictly inside the box.
inline constexpr double kSquashLimit = 30.0;

struct ParamBounds {
  std::vector<Box> boxes;

  static ParamBounds defaults(ModelKind kind);
  std::size_t size() const { return boxes.size(); }
  bool contains(const Params& p) const;
};

double squash(double x, Box box);
double unsquash(double p, Box box);
Params squash(const Eigen::VectorXd& x, const ParamBounds& bounds);
Eigen::VectorXd unsquash(const Params& p, const ParamBounds& bounds);

// Flows written once for plain doubles and for batched tape rows.

template <class T>
std::array<T, 5> seirm_flows(const T& S, const T& E, const T& I, const T& beta, const T& alpha, const T& gamma,
                             const T& mu, double N) {
  T infection = beta * S * I / N;
  T incubation = alpha * E;
  T recovery = gamma * I;
  T death = mu * I;
  return {-infection, infection - incubation, incubation - recovery - death, recovery, death};
}

/// Third entry is dR/dt = -(dS/dt + dI/dt), keeping S + I + R = N.
template <class T>
std::array<T, 3> sirs_flows(const T& S, const T& I, const T& beta, const T& D, const T& L, double N) {
  T immune = N - S - I;
  T infection = beta * I * S / N;
  T waning = immune / L;
  T recovery = I / D;
  return {waning - infection, infection - recovery, recovery - waning};
}

State seirm_rhs(const State& s, const Params& p, double N);
State sirs_rhs(const State& s, const Params& p, double N);
State rhs(ModelKind kind, const State& s, const Params& p, double N);

/// ILI fraction (beta I S / N) / (N * OR).
double ili_observable(const State& s, const Params& p, double N, double outpatient_ratio);

using RhsFn = std::function<State(const State&, const Params&)>;

/// Classic RK4 with parameters held constant over each step. Returns
/// n_steps + 1 states. A compartment below -1e-9 * population_scale raises
/// StabilityError carrying the step index.
std::vector<State> rk4_integrate(const RhsFn& f, const State& s0, std::span<const Params> schedule, double step,
                                 int n_steps, double population_scale);

}  // namespace epiforge::ode
