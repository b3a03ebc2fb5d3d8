// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/time_module.hpp"

#include <cmath>
#include <numbers>

namespace epiforge::einn {

FourierMap::FourierMap(int rows, double sigma, nn::Rng& rng) : b_(rows, 1) {
  std::normal_distribution<double> dist(0.0, sigma);
  for (int i = 0; i < rows; ++i) b_(i, 0) = dist(rng);
}

Dual FourierMap::forward(Tape& tape, const Dual& t) const {
  Var w = tape.constant(2.0 * std::numbers::pi * b_);
  Dual arg = ad::matmul(w, t);
  return ad::concat_rows({ad::cos(arg), ad::sin(arg)});
}

Vector FourierMap::evaluate(double t) const {
  const Eigen::ArrayXd arg = 2.0 * std::numbers::pi * b_.col(0).array() * t;
  Vector out(2 * b_.rows());
  out << arg.cos().matrix(), arg.sin().matrix();
  return out;
}

TimeNet::TimeNet(ode::ModelKind kind_, int table_days, const TimeNetConfig& config, nn::Rng& rng)
    : kind(kind_), bounds(ode::ParamBounds::defaults(kind_)), fourier(config.fourier_rows, config.fourier_sigma, rng) {
  if (table_days < 1) throw DimensionError("TimeNet: parameter table needs at least one day");
  if (config.trunk.empty() || config.trunk.front() != fourier.output_dim()) {
    throw DimensionError("TimeNet: trunk input width must equal twice the Fourier rows");
  }
  trunk = nn::Mlp("time.trunk", config.trunk, true, rng);
  std::vector<int> head_sizes{config.trunk.back()};
  head_sizes.insert(head_sizes.end(), config.head_hidden.begin(), config.head_hidden.end());
  head_sizes.push_back(ode::state_dim(kind));
  head = nn::Mlp("head", head_sizes, false, rng);
  omega_table = ad::Parameter("time.omega", Matrix::Zero(ode::param_dim(kind), table_days));
}

TimeForward TimeNet::forward(Tape& tape, const Physics& physics, int first_day, int n, bool tangent) {
  if (n < 1) throw DimensionError("TimeNet::forward: empty day range");
  TimeForward out;
  out.first_day = first_day;
  out.days = n;
  Matrix tau(1, n);
  for (int j = 0; j < n; ++j) tau(0, j) = physics.tau(first_day + j);
  out.tau = tape.constant(std::move(tau));
  Dual t = tangent ? tape.seed(out.tau) : Dual(out.tau);
  out.e = trunk.forward(tape, fourier.forward(tape, t));
  out.s = head.forward(tape, out.e);
  out.omega = omega(tape, first_day, n);
  return out;
}

TimeForward slice_days(const TimeForward& f, int first, int n) {
  if (first < 0 || n < 1 || first + n > f.days) throw IndexError("slice_days: range outside the forward pass");
  auto cut = [&](const Var& v) { return v.valid() ? ad::cols(v, first, n) : Var(); };
  TimeForward out;
  out.first_day = f.first_day + first;
  out.days = n;
  out.tau = cut(f.tau);
  out.e = Dual(cut(f.e.value), cut(f.e.tangent));
  out.s = Dual(cut(f.s.value), cut(f.s.tangent));
  out.omega = cut(f.omega);
  return out;
}

Var squash_rows(Tape& tape, const Var& x, const ode::ParamBounds& bounds) {
  if (static_cast<std::size_t>(x.rows()) != bounds.size()) throw DimensionError("squash_rows: row count mismatch");
  Matrix lo(x.rows(), 1);
  Matrix width(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    lo(i, 0) = bounds.boxes[static_cast<std::size_t>(i)].lo;
    width(i, 0) = bounds.boxes[static_cast<std::size_t>(i)].hi - lo(i, 0);
  }
  Var unit = ad::sigmoid(ad::clamp(x, -ode::kSquashLimit, ode::kSquashLimit));
  return unit * tape.constant(std::move(width)) + tape.constant(std::move(lo));
}

Var TimeNet::omega(Tape& tape, int first_day, int n) {
  if (first_day < 0 || n < 1 || first_day + n > table_days()) {
    throw IndexError("TimeNet::omega: days [" + std::to_string(first_day) + ", " + std::to_string(first_day + n) +
                     ") outside the parameter table of " + std::to_string(table_days()) + " days");
  }
  return squash_rows(tape, ad::cols(tape.param(omega_table), first_day, n), bounds);
}

Matrix TimeNet::omega_values() const {
  Matrix out(omega_table.value.rows(), omega_table.value.cols());
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = ode::squash(omega_table.value.col(j), bounds);
  return out;
}

void TimeNet::init_omega(const std::vector<ode::Params>& daily) {
  if (daily.empty()) throw DimensionError("TimeNet::init_omega: empty schedule");
  for (int d = 0; d < table_days(); ++d) {
    const ode::Params& p = daily[std::min<std::size_t>(static_cast<std::size_t>(d), daily.size() - 1)];
    omega_table.value.col(d) = ode::unsquash(p, bounds);
  }
}

void TimeNet::collect(nn::ParamList& out) {
  collect_trunk(out);
  collect_head(out);
  out.push_back(&omega_table);
}

void TimeNet::collect_trunk(nn::ParamList& out) { trunk.collect(out); }

void TimeNet::collect_head(nn::ParamList& out) { head.collect(out); }

namespace {

Matrix scale_column(const Physics& physics) {
  if (physics.state_scale.size() != physics.state_dim()) {
    throw DimensionError("Physics: state scale has the wrong length");
  }
  return physics.state_scale;
}

}  // namespace

Var ode_flows(const Physics& physics, const Var& states, const Var& omega) {
  const double N = physics.population;
  auto r = [](const Var& m, int i) { return ad::rows(m, i, 1); };
  if (physics.kind == ode::ModelKind::Seirm) {
    using namespace ode::seirm;
    auto f = ode::seirm_flows<Var>(r(states, S), r(states, E), r(states, I), r(omega, beta), r(omega, alpha),
                                   r(omega, gamma), r(omega, mu), N);
    return ad::concat_rows({f[0], f[1], f[2], f[3], f[4]});
  }
  using namespace ode::sirs;
  auto f = ode::sirs_flows<Var>(r(states, S), r(states, I), r(omega, beta), r(omega, D), r(omega, L), N);
  return ad::concat_rows({f[0], f[1], f[2]});
}

Var ode_residual(const Physics& physics, const Dual& scaled_states, const Var& omega) {
  if (!scaled_states.has_tangent()) throw ContractError("ode_residual: states carry no time derivative");
  Tape& tape = scaled_states.value.tape();
  Var scale = tape.constant(scale_column(physics));
  Var flows = ode_flows(physics, scaled_states.value * scale, omega);
  return scaled_states.tangent / physics.span - flows / scale;
}

Var observable(const Physics& physics, const Var& scaled_states, const Var& omega) {
  if (physics.kind == ode::ModelKind::Seirm) return ad::rows(scaled_states, ode::seirm::M, 1);
  const Vector& sc = scale_column(physics);
  const double N = physics.population;
  if (!(physics.outpatient_ratio > 0.0 && physics.outpatient_ratio <= 1.0)) {
    throw ConfigError("observable: outpatient ratio must lie in (0, 1]");
  }
  Var S = ad::rows(scaled_states, ode::sirs::S, 1) * sc(ode::sirs::S);
  Var I = ad::rows(scaled_states, ode::sirs::I, 1) * sc(ode::sirs::I);
  Var beta = ad::rows(omega, ode::sirs::beta, 1);
  return beta * I * S * (1.0 / (N * N * physics.outpatient_ratio * physics.target_scale));
}

Var mean_column_sq(const Var& diff) { return ad::sum(ad::square(diff)) / static_cast<double>(diff.cols()); }

Var mse(const Var& predicted, const Matrix& target) {
  if (predicted.cols() == 0 || target.size() == 0) throw DimensionError("mse: empty observation set");
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols()) {
    throw DimensionError("mse: prediction and target shapes differ");
  }
  return ad::mean(ad::square(predicted - predicted.tape().constant(target)));
}

Var loss_ode_time(const Physics& physics, const TimeForward& f) {
  return mean_column_sq(ode_residual(physics, f.s, f.omega));
}

Var loss_data_time(const Physics& physics, const TimeForward& f, const Matrix& target) {
  return mse(observable(physics, f.s.value, f.omega), target);
}

Var monotonicity_penalty(const Var& ds, const Var& dr) {
  Var up = ds * ad::relu(ds);
  Var down = -dr * ad::relu(-dr);
  return ad::mean(ad::square(up)) + ad::mean(ad::square(down));
}

Var loss_monotonicity(const Physics& physics, const TimeForward& f) {
  if (physics.kind != ode::ModelKind::Seirm) return f.tau.tape().constant(0.0);
  if (!f.s.has_tangent()) throw ContractError("loss_monotonicity: states carry no time derivative");
  return monotonicity_penalty(ad::rows(f.s.tangent, ode::seirm::S, 1), ad::rows(f.s.tangent, ode::seirm::R, 1));
}

Var loss_param_consistency(Tape& tape, TimeNet& net) {
  const int n = net.table_days();
  if (n < 2) return tape.constant(0.0);
  Var all = squash_rows(tape, tape.param(net.omega_table), net.bounds);
  Var diff = ad::cols(all, 1, n - 1) - ad::cols(all, 0, n - 1);
  return mean_column_sq(diff);
}

Var loss_helper_analytic(const TimeForward& f, const Matrix& reference) {
  if (reference.rows() != f.s.value.rows() || reference.cols() != f.s.value.cols()) {
    throw DimensionError("loss_helper_analytic: reference shape differs from the state block");
  }
  return mean_column_sq(f.s.value - f.s.value.tape().constant(reference));
}

double fraction_increasing_s(const TimeForward& f) {
  if (!f.s.has_tangent()) throw ContractError("fraction_increasing_s: states carry no time derivative");
  const Matrix& ds = f.s.tangent.value();
  int up = 0;
  for (Eigen::Index j = 0; j < ds.cols(); ++j) up += ds(ode::seirm::S, j) > 0.0 ? 1 : 0;
  return static_cast<double>(up) / static_cast<double>(ds.cols());
}

}  // namespace epiforge::einn
