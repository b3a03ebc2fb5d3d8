// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/trainer.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <memory>
#include <ostream>

#include "epiforge/log.hpp"
#include "epiforge/optimizer.hpp"

namespace epiforge::train {

using ad::Dual;
using ad::Tape;
using ad::Var;

void LossWeights::validate() const {
  for (const auto& [name, w] : named()) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weight '" + name + "' must be finite and >= 0");
  }
}

std::vector<std::pair<std::string, double>> LossWeights::named() const {
  return {{"ode_time", ode},          {"data_time", data_time}, {"mono", mono},
          {"param", param},           {"helper", helper},       {"emb", emb},
          {"data_feature", data_feature}, {"output", output},   {"ode_feature", ode_feature}};
}

void TrainPlan::validate() const {
  if (epochs_phase1 < 1 || epochs_phase2 < 1) throw ConfigError("training epochs must be >= 1");
  if (!(emb_threshold > 0.0)) throw ConfigError("embedding threshold must be > 0");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
}

LossTerms build_losses(Tape& tape, Einn& model, const Problem& problem, const LossWeights& weights, Phase phase,
                       bool gradient_matching, const FrozenEmbeddings* frozen) {
  const einn::Physics& physics = problem.physics;
  const int T = problem.train_days;
  const int Tc = problem.collocation_days;

  einn::TimeForward tf;
  Var e_feature;
  if (frozen) {
    tf.first_day = 0;
    tf.days = Tc;
    tf.e = Dual(tape.constant(frozen->e), tape.constant(frozen->de_dtau));
    tf.s = model.time.head.forward(tape, tf.e);
    tf.omega = model.time.omega(tape, 0, Tc);
    e_feature = tape.constant(frozen->e_feature);
  } else {
    tf = model.time.forward(tape, physics, 0, Tc, true);
    einn::Encoding enc = model.feature.encode(tape, problem.features, problem.mask);
    e_feature = model.feature.decode(tape, enc.summary, Dual(tf.tau)).value;
  }
  Var s_feature = model.time.head.forward(tape, e_feature);
  const einn::TimeForward observed = einn::slice_days(tf, 0, T);
  Var omega_observed = ad::cols(tf.omega, 0, T);
  Var s_feature_observed = ad::cols(s_feature, 0, T);

  LossTerms out;
  auto add = [&](const std::string& name, Var term, double w) {
    out.terms.emplace_back(name, term);
    if (w == 0.0) return;
    Var weighted = term * w;
    out.total = out.total.valid() ? out.total + weighted : weighted;
  };
  add("ode_time", einn::loss_ode_time(physics, tf), weights.ode);
  add("data_time", einn::loss_data_time(physics, observed, problem.target), weights.data_time);
  add("mono", einn::loss_monotonicity(physics, tf), weights.mono);
  add("param", einn::loss_param_consistency(tape, model.time), weights.param);
  add("helper", einn::loss_helper_analytic(observed, problem.reference), weights.helper);
  add("emb", einn::loss_emb(tf.e.value, e_feature), gradient_matching ? weights.emb : 0.0);
  add("data_feature", einn::loss_data_feature(physics, s_feature_observed, omega_observed, problem.target),
      weights.data_feature);
  add("output", einn::loss_output_kd(observed.s.value, s_feature_observed), weights.output);
  if (phase == Phase::Two && gradient_matching) {
    add("ode_feature",
        einn::loss_ode_feature(physics, phase, model.time.head, e_feature, tf.e.tangent, tf.omega),
        weights.ode_feature);
  }
  if (!out.total.valid()) out.total = tape.constant(0.0);
  return out;
}

FrozenEmbeddings freeze_embeddings(Einn& model, const Problem& problem) {
  Tape tape;
  einn::TimeForward tf = model.time.forward(tape, problem.physics, 0, problem.collocation_days, true);
  einn::Encoding enc = model.feature.encode(tape, problem.features, problem.mask);
  Dual ef = model.feature.decode(tape, enc.summary, Dual(tf.tau));
  return {tf.e.value.value(), tf.e.tangent.value(), ef.value.value()};
}

double embedding_gap(Einn& model, const Problem& problem) {
  Tape tape;
  einn::TimeForward tf = model.time.forward(tape, problem.physics, 0, problem.train_days, false);
  einn::Encoding enc = model.feature.encode(tape, problem.features, problem.mask);
  Dual ef = model.feature.decode(tape, enc.summary, Dual(tf.tau));
  return einn::loss_emb(tf.e.value, ef.value).scalar();
}

namespace {

class Stepper {
 public:
  Stepper(Einn& model, const TrainPlan& plan) {
    model.collect(params_);
    adam_ = std::make_unique<Adam>(params_, AdamOptions{plan.lr});
  }

  void apply(Tape& tape) {
    for (ad::Parameter* p : params_) {
      p->grad = tape.has_param(*p) ? tape.gradient(*p) : ad::Matrix::Zero(p->value.rows(), p->value.cols());
    }
    adam_->step();
  }

  nn::ParamList& params() { return params_; }

 private:
  nn::ParamList params_;
  std::unique_ptr<Adam> adam_;
};

std::vector<EpochRecord> run_epochs(Einn& model, const Problem& problem, const LossWeights& weights,
                                    const TrainPlan& plan, Phase phase, int epochs, std::ostream* log, int first_epoch,
                                    const FrozenEmbeddings* frozen) {
  weights.validate();
  plan.validate();
  Stepper stepper(model, plan);
  std::vector<EpochRecord> history;
  history.reserve(static_cast<std::size_t>(epochs));
  const int phase_id = phase == Phase::One ? 1 : 2;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Tape tape;
    LossTerms losses = build_losses(tape, model, problem, weights, phase, plan.gradient_matching, frozen);
    EpochRecord rec;
    rec.epoch = first_epoch + epoch;
    rec.phase = phase_id;
    for (const auto& [name, v] : losses.terms) {
      const double value = v.scalar();
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss term '" + name + "' at epoch " + std::to_string(rec.epoch) +
                            " (phase " + std::to_string(phase_id) + ")");
      }
      rec.terms.emplace_back(name, value);
    }
    rec.total = losses.total.scalar();
    try {
      tape.backward(losses.total);
    } catch (const ad::NonFiniteGradient& err) {
      throw TrainingError(std::string("non-finite gradient at epoch ") + std::to_string(rec.epoch) + ": " +
                          err.what());
    }
    stepper.apply(tape);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (log) write_epoch(*log, rec, weights);
    history.push_back(std::move(rec));
  }
  return history;
}

}  // namespace

std::vector<EpochRecord> train_phase1(Einn& model, const Problem& problem, const LossWeights& weights,
                                      const TrainPlan& plan, int epochs, std::ostream* log, int first_epoch) {
  return run_epochs(model, problem, weights, plan, Phase::One, epochs, log, first_epoch, nullptr);
}

std::vector<EpochRecord> train_phase2(Einn& model, const Problem& problem, const LossWeights& weights,
                                      const TrainPlan& plan, int epochs, std::ostream* log, int first_epoch) {
  if (plan.gradient_matching) {
    const double gap = embedding_gap(model, problem);
    if (!(gap < plan.emb_threshold)) {
      throw ContractError("train_phase2: embedding gap " + std::to_string(gap) + " is not below the threshold " +
                          std::to_string(plan.emb_threshold));
    }
  }
  nn::ParamList frozen_params;
  model.time.collect_trunk(frozen_params);
  model.feature.collect(frozen_params);
  std::vector<bool> previous;
  for (ad::Parameter* p : frozen_params) {
    previous.push_back(p->frozen);
    p->frozen = true;
  }
  const FrozenEmbeddings cache = freeze_embeddings(model, problem);
  std::vector<EpochRecord> history;
  try {
    history = run_epochs(model, problem, weights, plan, Phase::Two, epochs, log, first_epoch, &cache);
  } catch (...) {
    for (std::size_t i = 0; i < frozen_params.size(); ++i) frozen_params[i]->frozen = previous[i];
    throw;
  }
  for (std::size_t i = 0; i < frozen_params.size(); ++i) frozen_params[i]->frozen = previous[i];
  return history;
}

GradientTrickGap gradient_trick_gap(Einn& model, const Problem& problem) {
  const int n = problem.collocation_days;
  const double span = problem.physics.span;
  GradientTrickGap out;
  Tape tape;
  einn::TimeForward tf = model.time.forward(tape, problem.physics, 0, n, true);
  einn::Encoding enc = model.feature.encode(tape, problem.features, problem.mask);
  Dual ef = model.feature.decode(tape, enc.summary, Dual(tf.tau, tape.constant(ad::Matrix::Ones(1, n))));
  Dual exact = model.time.head.forward(tape, ef);
  Dual approx = model.time.head.forward(tape, Dual(ef.value, tf.e.tangent));
  // Copies: the Jacobians below grow the tape and move its node storage.
  const ad::Matrix de = tf.e.tangent.value();
  const ad::Matrix def = ef.tangent.value();
  const ad::Matrix e_feature = ef.value.value();
  const ad::Matrix approx_rate = approx.tangent.value();
  const ad::Matrix exact_rate = exact.tangent.value();
  for (int d = 0; d < n; ++d) {
    Var x = tape.constant(e_feature.col(d));
    Var jac = ad::jacobian([&](const Dual& e) { return model.time.head.forward(tape, e); }, x);
    const double gap = (approx_rate.col(d) - exact_rate.col(d)).norm() / span;
    const double bound = jac.value().norm() * (de.col(d) - def.col(d)).norm() / span;
    out.max_gap = std::max(out.max_gap, gap);
    out.max_bound = std::max(out.max_bound, bound);
  }
  out.finite = std::isfinite(out.max_gap) && std::isfinite(out.max_bound);
  return out;
}

TrainReport train_einn(Einn& model, const Problem& problem, const LossWeights& weights, const TrainPlan& plan,
                       std::ostream* log) {
  plan.validate();
  TrainReport report;
  report.history = train_phase1(model, problem, weights, plan, plan.epochs_phase1, log, 0);
  report.embedding_gap = embedding_gap(model, problem);
  if (plan.gradient_matching && !(report.embedding_gap < plan.emb_threshold)) {
    if (plan.policy == ExtendPolicy::Abort) {
      throw TrainingError("embedding gap " + std::to_string(report.embedding_gap) +
                          " did not reach the threshold after phase 1");
    }
    log::info("train_einn: embedding gap {} above {}; extending phase 1", report.embedding_gap, plan.emb_threshold);
    auto more = train_phase1(model, problem, weights, plan, plan.epochs_phase1, log,
                             static_cast<int>(report.history.size()));
    report.history.insert(report.history.end(), more.begin(), more.end());
    report.extended = true;
    report.embedding_gap = embedding_gap(model, problem);
    if (!(report.embedding_gap < plan.emb_threshold)) {
      throw TrainingError("embedding gap " + std::to_string(report.embedding_gap) + " still above " +
                          std::to_string(plan.emb_threshold) + " after extending phase 1 by " +
                          std::to_string(plan.epochs_phase1) + " epochs");
    }
  }
  auto second = train_phase2(model, problem, weights, plan, plan.epochs_phase2, log,
                             static_cast<int>(report.history.size()));
  report.history.insert(report.history.end(), second.begin(), second.end());
  if (plan.gradient_matching) {
    report.gap = gradient_trick_gap(model, problem);
    log::debug("train_einn: gradient-trick gap {} (bound {})", report.gap.max_gap, report.gap.max_bound);
    if (!report.gap.finite) throw TrainingError("gradient-trick diagnostic is not finite");
  }
  return report;
}

void write_epoch(std::ostream& out, const EpochRecord& record, const LossWeights& weights) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["phase"] = record.phase;
  nlohmann::ordered_json terms = nlohmann::ordered_json::object();
  for (const auto& [name, v] : record.terms) terms[name] = v;
  j["terms"] = terms;
  nlohmann::ordered_json w = nlohmann::ordered_json::object();
  for (const auto& [name, v] : weights.named()) w[name] = v;
  j["weights"] = w;
  j["total"] = record.total;
  j["wall_ms"] = record.wall_ms;
  out << j.dump() << '\n';
}

}  // namespace epiforge::train
