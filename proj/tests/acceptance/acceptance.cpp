// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "epiforge/feature_module.hpp"
#include "epiforge/log.hpp"
#include "epiforge/metrics.hpp"
#include "epiforge/protocol.hpp"
#include "epiforge/synthetic.hpp"
#include "epiforge/time_module.hpp"
#include "epiforge/trainer.hpp"
#include "fixtures.hpp"
#include "helpers.hpp"
#include "metric_oracles.hpp"

using namespace epiforge;
using einn::Dual;
using einn::Matrix;
using einn::Tape;
using einn::Var;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("CRITERION %d %s: %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

einn::Physics small_physics(double span) {
  einn::Physics p;
  p.kind = ode::ModelKind::Seirm;
  p.population = 1e4;
  p.span = span;
  p.state_scale = einn::Vector{{1e4, 100.0, 100.0, 1e3, 10.0}};
  return p;
}

// Fourth-order central differences over a random subset of entries per
// parameter.
double sampled_grad_error(const testutil::LossBuilder& build, const nn::ParamList& params, std::mt19937_64& rng,
                          int per_param) {
  const double h = 1e-3;
  const double floor = 1e-6;
  std::vector<Matrix> analytic;
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
    for (ad::Parameter* p : params) {
      analytic.push_back(tape.has_param(*p) ? tape.gradient(*p) : Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Parameter& p = *params[k];
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(p.value.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = static_cast<Eigen::Index>(i);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(std::min<std::size_t>(entries.size(), static_cast<std::size_t>(per_param)));
    for (Eigen::Index i : entries) {
      const double saved = p.value(i);
      auto at = [&](double dx) {
        p.value(i) = saved + dx;
        return testutil::evaluate(build);
      };
      const double up = (8.0 * at(h) - at(2.0 * h)) / 6.0;
      const double down = (8.0 * at(-h) - at(-2.0 * h)) / 6.0;
      p.value(i) = saved;
      worst = std::max(worst, testutil::relative_error(analytic[k](i), (up - down) / (2.0 * h), floor));
    }
  }
  return worst;
}

struct RandomNets {
  einn::TimeNet time;
  einn::FeatureNet feature;
  int days = 0;
  Matrix x;
};

RandomNets random_nets(std::mt19937_64& rng, std::uint64_t seed) {
  std::uniform_int_distribution<int> width(2, 16);
  std::uniform_int_distribution<int> fourier(1, 8);
  std::uniform_int_distribution<int> trunk_layers(1, 4);
  std::uniform_int_distribution<int> head_hidden(0, 3);
  std::uniform_int_distribution<int> days(2, 5);
  std::uniform_int_distribution<int> inputs(1, 3);
  std::uniform_int_distribution<int> gru_layers(1, 2);
  RandomNets out;
  einn::TimeNetConfig cfg;
  cfg.fourier_rows = fourier(rng);
  cfg.trunk = {2 * cfg.fourier_rows};
  for (int l = trunk_layers(rng); l > 0; --l) cfg.trunk.push_back(width(rng));
  cfg.head_hidden.clear();
  for (int l = head_hidden(rng); l > 0; --l) cfg.head_hidden.push_back(width(rng));
  out.days = days(rng);
  nn::Rng nrng(seed);
  out.time = einn::TimeNet(ode::ModelKind::Seirm, out.days, cfg, nrng);
  out.time.omega_table.value = nn::uniform_matrix(4, out.days, 1.0, nrng);
  const int dx = inputs(rng);
  out.feature = einn::FeatureNet(dx, einn::FeatureNetConfig{width(rng), gru_layers(rng), cfg.trunk.back()}, nrng);
  out.x = nn::uniform_matrix(out.days, dx, 1.0, nrng);
  return out;
}

// Every time-module and feature-module loss, plus a bare nested derivative.
void criterion_differentiation() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20260101);
  double worst = 0.0;
  int checks = 0;
  for (int i = 0; i < 200; ++i) {
    RandomNets nets = random_nets(rng, 7000 + static_cast<std::uint64_t>(i));
    const int n = nets.days;
    const einn::Physics phys = small_physics(std::max(1, n - 1));
    nn::Rng nrng(static_cast<std::uint64_t>(i));
    const Matrix target = nn::uniform_matrix(1, n, 1.0, nrng);
    const Matrix reference = nn::uniform_matrix(5, n, 1.0, nrng);
    const std::vector<bool> mask(static_cast<std::size_t>(n), true);
    einn::TimeNet& time = nets.time;
    einn::FeatureNet& feature = nets.feature;
    nn::ParamList params;
    time.collect(params);
    feature.collect(params);
    auto tau = [&](Tape& t) {
      Matrix row(1, n);
      for (int d = 0; d < n; ++d) row(0, d) = phys.tau(d);
      return Dual(t.constant(row));
    };
    auto embed = [&](Tape& t) {
      const einn::Encoding enc = feature.encode(t, nets.x, mask);
      return feature.decode(t, enc.summary, tau(t)).value;
    };
    const std::vector<testutil::LossBuilder> losses{
        [&](Tape& t) { return einn::loss_ode_time(phys, time.forward(t, phys, 0, n)); },
        [&](Tape& t) { return einn::loss_data_time(phys, time.forward(t, phys, 0, n), target); },
        [&](Tape& t) { return einn::loss_monotonicity(phys, time.forward(t, phys, 0, n)) + 1e-3; },
        [&](Tape& t) { return einn::loss_param_consistency(t, time); },
        [&](Tape& t) { return einn::loss_helper_analytic(time.forward(t, phys, 0, n), reference); },
        [&](Tape& t) {
          const einn::TimeForward f = time.forward(t, phys, 0, n);
          return einn::loss_emb(f.e.value, embed(t));
        },
        [&](Tape& t) {
          const einn::TimeForward f = time.forward(t, phys, 0, n);
          return einn::loss_ode_feature(phys, einn::Phase::Two, time.head, embed(t), f.e.tangent, f.omega);
        },
        [&](Tape& t) {
          const einn::TimeForward f = time.forward(t, phys, 0, n);
          return einn::loss_data_feature(phys, time.head.forward(t, embed(t)), f.omega, target);
        },
        [&](Tape& t) {
          const einn::TimeForward f = time.forward(t, phys, 0, n);
          return einn::loss_output_kd(f.s.value, time.head.forward(t, embed(t)));
        },
        // d/dparams of sum(ds/dtau) alone.
        [&](Tape& t) { return ad::sum(time.forward(t, phys, 0, n).s.tangent); },
    };
    for (const auto& build : losses) {
      worst = std::max(worst, sampled_grad_error(build, params, rng, 4));
      ++checks;
    }
  }
  const double elapsed = seconds_since(start);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d loss/net checks, worst relative error %.3g (limit 1e-4), %.1f s (limit 120 s)",
                checks, worst, elapsed);
  report(1, worst < 1e-4 && elapsed < 120.0, buf);
}

void criterion_exactness() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    RandomNets nets = random_nets(rng, 9000 + static_cast<std::uint64_t>(i));
    const einn::Physics phys = small_physics(std::max(1, nets.days - 1));
    Tape tape;
    const einn::TimeForward f = nets.time.forward(tape, phys, 0, nets.days);
    const double time = einn::loss_ode_time(phys, f).scalar();
    const double feature =
        einn::loss_ode_feature(phys, einn::Phase::Two, nets.time.head, f.e.value, f.e.tangent, f.omega).scalar();
    worst = std::max(worst, std::abs(feature - time));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "50 configurations, worst |feature - time| %.3g (limit 1e-10)", worst);
  report(2, worst <= 1e-10, buf);
}

void criterion_metrics() {
  std::mt19937_64 rng(2026);
  const double gap = testutil::worst_metric_gap(rng, 100);
  const std::vector<double> y{1.0, 2.0, 3.0};
  const std::vector<double> p{2.0, 3.0, 4.0};
  const bool hand = *eval::nr1(y, p) == 0.5 && *eval::nr2(y, p) == 0.5 && *eval::nd(y, p) == 0.5;
  char buf[160];
  std::snprintf(buf, sizeof buf, "100 random sets, worst gap %.3g (limit 1e-10); hand case 0.5/0.5/0.5 %s", gap,
                hand ? "exact" : "wrong");
  report(3, gap < 1e-10 && hand, buf);
}

void criterion_integrator() {
  auto error = [](int n) {
    std::vector<ode::Params> sched(static_cast<std::size_t>(n), ode::Params::Zero(1));
    auto traj = ode::rk4_integrate([](const ode::State& s, const ode::Params&) { return ode::State(-s); },
                                   ode::State::Ones(1), sched, 1.0 / n, n, 1.0);
    return std::abs(traj.back()(0) - std::exp(-1.0));
  };
  double worst_ratio = 1e300;
  for (int n : {1, 2, 4, 8, 16, 32}) worst_ratio = std::min(worst_ratio, error(n) / error(2 * n));
  const double N = 1e6;
  std::vector<ode::Params> sched(365, ode::Params{{0.3, 0.2, 0.1, 0.01}});
  const auto traj = ode::rk4_integrate([&](const ode::State& s, const ode::Params& q) { return ode::seirm_rhs(s, q, N); },
                                       ode::State{{N - 200.0, 100.0, 100.0, 0.0, 0.0}}, sched, 1.0, 365, N);
  double drift = 0.0;
  for (const auto& s : traj) drift = std::max(drift, std::abs(s.sum() - N));
  char buf[200];
  std::snprintf(buf, sizeof buf, "smallest error ratio per halving %.2f (limit 14); SEIRM sum drift %.3g (limit %.3g)",
                worst_ratio, drift, 1e-6 * N);
  report(4, worst_ratio >= 14.0 && drift <= 1e-6 * N, buf);
}

struct StudyScores {
  std::optional<double> nd_short, nd_long, pc;
};

StudyScores scores_of(const eval::ScoreTable& table, const std::string& model) {
  const eval::ScoreRow* row = table.find(model);
  if (!row) return {};
  return {row->nd_short, row->nd_long, row->pc};
}

std::string show(const std::optional<double>& v) {
  if (!v) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", *v);
  return buf;
}

eval::ProtocolOptions study_options(std::uint64_t seed, eval::CalibrationCache& cache) {
  eval::ProtocolOptions opt;
  for (int w = 8; w <= 17; ++w) opt.weeks.push_back(w);
  opt.horizon = 8;
  opt.seed = seed;
  opt.cache = &cache;
  return opt;
}

eval::ScoreTable score(const std::vector<eval::ForecastRecord>& records) {
  eval::MetricOptions m;
  m.plus_one_guard = true;
  return eval::aggregate_scores(records, m);
}

void criteria_study() {
  const auto start = Clock::now();
  const data::RegionDataset world = data::make_synthetic_world(data::two_regime_world(0)).dataset;
  const cfg::Config config;
  eval::CalibrationCache cache;

  std::vector<std::unique_ptr<eval::Forecaster>> owned;
  std::vector<const eval::Forecaster*> models;
  owned.push_back(eval::make_forecaster("EINN", config));
  for (base::BaselineKind k : base::all_baselines()) owned.push_back(eval::make_forecaster(base::to_string(k), config));
  for (const auto& m : owned) models.push_back(m.get());
  const eval::ProtocolResult study = eval::rolling_protocol(models, {world}, study_options(0, cache));
  const eval::ScoreTable table = score(study.records);
  std::printf("synthetic study (%zu records, %.0f s)\n", study.records.size(), seconds_since(start));
  std::printf("  %-22s %10s %10s %10s\n", "model", "nd_short", "nd_long", "pc");
  for (const auto& m : owned) {
    const StudyScores s = scores_of(table, m->name());
    std::printf("  %-22s %10s %10s %10s\n", m->name().c_str(), show(s.nd_short).c_str(), show(s.nd_long).c_str(),
                show(s.pc).c_str());
  }
  const StudyScores einn = scores_of(table, "EINN");
  const StudyScores persistence = scores_of(table, "Persistence");
  const StudyScores mechanistic = scores_of(table, "MechanisticOnly");
  const bool long_ok = einn.nd_long && persistence.nd_long && *einn.nd_long < *persistence.nd_long;
  const bool pc_ok = einn.pc && *einn.pc > 0.6;
  const bool short_ok = einn.nd_short && mechanistic.nd_short && *einn.nd_short < *mechanistic.nd_short;
  const double elapsed5 = seconds_since(start);
  report(5, long_ok && pc_ok && short_ok,
         "EINN long ND " + show(einn.nd_long) + " vs Persistence " + show(persistence.nd_long) + "; EINN PC " +
             show(einn.pc) + " (> 0.6); EINN short ND " + show(einn.nd_short) + " vs MechanisticOnly " +
             show(mechanistic.nd_short) + "; " + std::to_string(static_cast<int>(elapsed5)) + " s");

  // Ablation over three training seeds on the same world; seed 0 reuses the
  // full model's run above.
  auto full = eval::make_forecaster("EINN", config);
  auto ablated = eval::make_forecaster("EINN-NoGradMatching", config);
  std::vector<double> full_pc, ablated_pc;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    std::vector<const eval::Forecaster*> run{ablated.get()};
    if (seed != 0) run.push_back(full.get());
    const eval::ProtocolResult r = eval::rolling_protocol(run, {world}, study_options(seed, cache));
    const eval::ScoreTable t = score(r.records);
    const StudyScores a = scores_of(t, "EINN-NoGradMatching");
    const StudyScores f = seed == 0 ? einn : scores_of(t, "EINN");
    std::printf("  seed %llu: EINN PC %s, EINN-NoGradMatching PC %s\n", static_cast<unsigned long long>(seed),
                show(f.pc).c_str(), show(a.pc).c_str());
    full_pc.push_back(f.pc.value_or(std::nan("")));
    ablated_pc.push_back(a.pc.value_or(std::nan("")));
  }
  auto median3 = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
  };
  const double mf = median3(full_pc);
  const double ma = median3(ablated_pc);
  char buf[200];
  std::snprintf(buf, sizeof buf, "median over 3 seeds of PC: EINN %.4f vs EINN-NoGradMatching %.4f; %.0f s total", mf,
                ma, seconds_since(start));
  report(6, std::isfinite(mf) && std::isfinite(ma) && ma < mf, buf);
}

void criterion_monotonicity() {
  auto toy = testutil::toy_problem(8, 2);
  const cfg::Config defaults;
  auto fraction = [&](double w_mono) {
    train::Einn model(toy.problem, defaults.model.einn, 0);
    train::LossWeights weights;
    weights.mono = w_mono;
    train::TrainPlan plan;
    train::train_phase1(model, toy.problem, weights, plan, 1000);
    Tape tape;
    return einn::fraction_increasing_s(model.time.forward(tape, toy.problem.physics, 0, toy.problem.collocation_days));
  };
  const double off = fraction(0.0);
  const double on = fraction(10.0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "fraction of collocation days with dS/dt > 0: w_mono=0 %.4f, w_mono=10 %.4f", off,
                on);
  report(7, on < off, buf);
}

// Sees only what the protocol hands it.
class Spy : public eval::Forecaster {
 public:
  std::string name() const override { return "Spy"; }
  bool needs_calibration() const override { return false; }
  einn::WeeklyForecast forecast(const eval::ForecastContext& ctx) const override {
    std::lock_guard<std::mutex> lock(mutex_);
    seen_[ctx.week] = {ctx.train.days(), ctx.train.last_day(), static_cast<int>(ctx.scaled_features.rows())};
    einn::WeeklyForecast f;
    f.values.assign(static_cast<std::size_t>(ctx.horizon), ctx.train.target.sum() + ctx.train.features.sum());
    f.beyond_range.assign(static_cast<std::size_t>(ctx.horizon), false);
    return f;
  }
  struct Seen {
    int days = 0;
    data::Day last_day = 0;
    int rows = 0;
  };
  mutable std::mutex mutex_;
  mutable std::map<int, Seen> seen_;
};

void criterion_leakage() {
  const data::RegionDataset clean = data::make_synthetic_world(data::two_regime_world(0)).dataset;
  int violations = 0;
  int cells = 0;

  Spy spy;
  std::mutex m;
  eval::ProtocolOptions opt;
  for (int w = 8; w <= 17; ++w) opt.weeks.push_back(w);
  opt.observer = [&](const eval::CellView& v) {
    std::lock_guard<std::mutex> lock(m);
    ++cells;
    const int rows = 7 * v.week;
    const data::ScaledSeries ref = data::standard_scale(clean.features.topRows(rows), rows);
    if (v.last_training_day > v.cutoff || v.feature_rows != rows || v.scaler.mean != ref.scaler.mean ||
        v.scaler.stddev != ref.scaler.stddev) {
      ++violations;
    }
  };
  eval::rolling_protocol({&spy}, {clean}, opt);
  for (const auto& [week, seen] : spy.seen_) {
    if (seen.days != 7 * week || seen.rows != 7 * week || seen.last_day != clean.start + 7 * week - 1) ++violations;
  }

  // Poison everything after the cutoff; no forecast may move.
  cfg::Config quick;
  quick.train.epochs_phase1 = 20;
  quick.train.epochs_phase2 = 20;
  quick.train.emb_threshold = 1e9;
  quick.model.rnn.epochs = 20;
  quick.model.calibration_restarts = 0;
  const int week = 12;
  data::RegionDataset poisoned = clean;
  const Eigen::Index tail = clean.days() - 7 * week;
  poisoned.features.bottomRows(tail).setConstant(1e6);
  poisoned.target.tail(tail) *= 3.0;
  std::vector<std::unique_ptr<eval::Forecaster>> owned;
  std::vector<const eval::Forecaster*> models{&spy};
  owned.push_back(eval::make_forecaster("EINN", quick));
  for (base::BaselineKind k : base::all_baselines()) owned.push_back(eval::make_forecaster(base::to_string(k), quick));
  for (const auto& f : owned) models.push_back(f.get());
  eval::ProtocolOptions popt;
  popt.weeks = {week};
  popt.calibration_restarts = 0;
  const auto a = eval::rolling_protocol(models, {clean}, popt);
  const auto b = eval::rolling_protocol(models, {poisoned}, popt);
  int moved = 0;
  if (a.records.size() != b.records.size()) ++moved;
  for (std::size_t i = 0; i < std::min(a.records.size(), b.records.size()); ++i) {
    if (a.records[i].model != b.records[i].model || a.records[i].predicted != b.records[i].predicted) ++moved;
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d cells observed, %d scaler/row violations; %zu poisoned-future forecasts, %d moved",
                cells, violations, a.records.size(), moved);
  report(8, cells == 10 && violations == 0 && moved == 0, buf);
}

}  // namespace

int main() {
  log::logger()->set_level(spdlog::level::err);
  criterion_differentiation();
  criterion_exactness();
  criterion_metrics();
  criterion_integrator();
  criteria_study();
  criterion_monotonicity();
  criterion_leakage();
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
