// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace epiforge::ode {

int state_dim(ModelKind kind) { return kind == ModelKind::Seirm ? 5 : 3; }

int param_dim(ModelKind kind) { return kind == ModelKind::Seirm ? 4 : 3; }

const std::vector<std::string>& state_names(ModelKind kind) {
  static const std::vector<std::string> seirm_names{"S", "E", "I", "R", "M"};
  static const std::vector<std::string> sirs_names{"S", "I", "R"};
  return kind == ModelKind::Seirm ? seirm_names : sirs_names;
}

const std::vector<std::string>& param_names(ModelKind kind) {
  static const std::vector<std::string> seirm_names{"beta", "alpha", "gamma", "mu"};
  static const std::vector<std::string> sirs_names{"beta", "D", "L"};
  return kind == ModelKind::Seirm ? seirm_names : sirs_names;
}

std::string to_string(ModelKind kind) { return kind == ModelKind::Seirm ? "seirm" : "sirs"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "seirm" || name == "SEIRM" || name == "covid") return ModelKind::Seirm;
  if (name == "sirs" || name == "SIRS" || name == "flu") return ModelKind::Sirs;
  throw ConfigError("unknown ODE model '" + name + "' (expected seirm or sirs)");
}

ParamBounds ParamBounds::defaults(ModelKind kind) {
  if (kind == ModelKind::Seirm) return {{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}};
  return {{{0.0, 2.0}, {1.0, 14.0}, {180.0, 3650.0}}};
}

bool ParamBounds::contains(const Params& p) const {
  if (static_cast<std::size_t>(p.size()) != boxes.size()) return false;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double v = p(static_cast<Eigen::Index>(i));
    if (!(v > boxes[i].lo && v < boxes[i].hi)) return false;
  }
  return true;
}

double squash(double x, Box box) {
  const double c = std::clamp(x, -kSquashLimit, kSquashLimit);
  return box.lo + (box.hi - box.lo) / (1.0 + std::exp(-c));
}

double unsquash(double p, Box box) {
  const double u = (p - box.lo) / (box.hi - box.lo);
  if (!(u > 0.0 && u < 1.0)) throw DomainError("unsquash: value outside its box");
  return std::log(u / (1.0 - u));
}

Params squash(const Eigen::VectorXd& x, const ParamBounds& bounds) {
  if (static_cast<std::size_t>(x.size()) != bounds.size()) throw DimensionError("squash: size mismatch");
  Params p(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) p(i) = squash(x(i), bounds.boxes[static_cast<std::size_t>(i)]);
  return p;
}

Eigen::VectorXd unsquash(const Params& p, const ParamBounds& bounds) {
  if (static_cast<std::size_t>(p.size()) != bounds.size()) throw DimensionError("unsquash: size mismatch");
  Eigen::VectorXd x(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) x(i) = unsquash(p(i), bounds.boxes[static_cast<std::size_t>(i)]);
  return x;
}

State seirm_rhs(const State& s, const Params& p, double N) {
  if (!(N > 0.0)) throw DomainError("seirm_rhs: population must be positive");
  if (s.size() != 5 || p.size() != 4) throw DimensionError("seirm_rhs: expects 5 states and 4 parameters");
  auto f = seirm_flows<double>(s(seirm::S), s(seirm::E), s(seirm::I), p(seirm::beta), p(seirm::alpha),
                               p(seirm::gamma), p(seirm::mu), N);
  State out(5);
  for (int i = 0; i < 5; ++i) out(i) = f[static_cast<std::size_t>(i)];
  return out;
}

State sirs_rhs(const State& s, const Params& p, double N) {
  if (!(N > 0.0)) throw DomainError("sirs_rhs: population must be positive");
  if (s.size() != 3 || p.size() != 3) throw DimensionError("sirs_rhs: expects 3 states and 3 parameters");
  if (!(p(sirs::D) > 0.0) || !(p(sirs::L) > 0.0)) throw DomainError("sirs_rhs: D and L must be positive");
  auto f = sirs_flows<double>(s(sirs::S), s(sirs::I), p(sirs::beta), p(sirs::D), p(sirs::L), N);
  return State{{f[0], f[1], f[2]}};
}

State rhs(ModelKind kind, const State& s, const Params& p, double N) {
  return kind == ModelKind::Seirm ? seirm_rhs(s, p, N) : sirs_rhs(s, p, N);
}

double ili_observable(const State& s, const Params& p, double N, double outpatient_ratio) {
  if (!(outpatient_ratio > 0.0 && outpatient_ratio <= 1.0)) {
    throw ConfigError("outpatient ratio must lie in (0, 1]");
  }
  if (!(N > 0.0)) throw DomainError("ili_observable: population must be positive");
  const double infection = p(sirs::beta) * s(sirs::I) * s(sirs::S) / N;
  return infection / (N * outpatient_ratio);
}

std::vector<State> rk4_integrate(const RhsFn& f, const State& s0, std::span<const Params> schedule, double step,
                                 int n_steps, double population_scale) {
  if (!(step > 0.0)) throw DomainError("rk4_integrate: step must be positive");
  if (n_steps < 0 || schedule.size() < static_cast<std::size_t>(n_steps)) {
    throw DimensionError("rk4_integrate: parameter schedule shorter than n_steps");
  }
  const double floor = -1e-9 * population_scale;
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(n_steps) + 1);
  out.push_back(s0);
  State s = s0;
  for (int k = 0; k < n_steps; ++k) {
    const Params& p = schedule[static_cast<std::size_t>(k)];
    State k1 = f(s, p);
    State k2 = f(s + 0.5 * step * k1, p);
    State k3 = f(s + 0.5 * step * k2, p);
    State k4 = f(s + step * k3, p);
    s += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!s.allFinite() || s.minCoeff() < floor) {
      std::ostringstream msg;
      msg << "rk4_integrate: compartment left the admissible range at step " << k + 1;
      throw StabilityError(msg.str(), k + 1);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace epiforge::ode
