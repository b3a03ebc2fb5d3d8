// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <sstream>

#include "epiforge/optimizer.hpp"
#include "epiforge/trainer.hpp"
#include "fixtures.hpp"

using namespace epiforge;
using train::LossWeights;
using train::TrainPlan;

namespace {

std::vector<ad::Matrix> snapshot(const nn::ParamList& ps) {
  std::vector<ad::Matrix> out;
  for (const auto* p : ps) out.push_back(p->value);
  return out;
}

LossWeights zero_weights() {
  LossWeights w;
  w.ode = w.mono = w.param = w.helper = w.data_time = w.data_feature = w.emb = w.output = w.ode_feature = 0.0;
  return w;
}

}  // namespace

TEST_CASE("Adam examples") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ad::Parameter p("p", ad::Matrix::Constant(2, 2, 1.5));
    p.grad = ad::Matrix::Zero(2, 2);
    std::vector<ad::Parameter*> ps{&p};
    optimizer_step(ps, 0.1);
    CHECK(p.value == ad::Matrix::Constant(2, 2, 1.5));
  }
  SUBCASE("the first step moves by about lr against the gradient sign") {
    ad::Parameter p("p", ad::Matrix::Zero(1, 3));
    p.grad = ad::Matrix{{2.0, -0.01, 300.0}};
    std::vector<ad::Parameter*> ps{&p};
    optimizer_step(ps, 0.01);
    CHECK(p.value(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p.value(0, 1) == doctest::Approx(0.01).epsilon(1e-5));
    CHECK(p.value(0, 2) == doctest::Approx(-0.01).epsilon(1e-6));
  }
  SUBCASE("converges on a quadratic") {
    ad::Parameter x("x", ad::Matrix::Zero(1, 1));
    Adam adam({&x}, AdamOptions{0.01});
    for (int i = 0; i < 2000; ++i) {
      x.grad = 2.0 * (x.value.array() - 3.0).matrix();
      adam.step();
    }
    CHECK(std::abs(x.value(0, 0) - 3.0) < 1e-3);
  }
  SUBCASE("frozen parameters are skipped") {
    ad::Parameter p("p", ad::Matrix::Ones(1, 1));
    p.frozen = true;
    p.grad = ad::Matrix::Ones(1, 1);
    std::vector<ad::Parameter*> ps{&p};
    optimizer_step(ps, 0.5);
    CHECK(p.value(0, 0) == 1.0);
  }
}

TEST_CASE("weights and plans are validated") {
  LossWeights w;
  w.mono = -1.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  TrainPlan plan;
  plan.emb_threshold = 0.0;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = TrainPlan{};
  plan.epochs_phase2 = 0;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
}

TEST_CASE("all-zero weights leave the parameters unchanged") {
  auto toy = testutil::toy_problem();
  train::Einn model(toy.problem, testutil::toy_config(), 1);
  nn::ParamList ps;
  model.collect(ps);
  const auto before = snapshot(ps);
  train::train_phase1(model, toy.problem, zero_weights(), TrainPlan{}, 3);
  CHECK(snapshot(ps) == before);
}

TEST_CASE("loss history has one record per epoch") {
  auto toy = testutil::toy_problem();
  train::Einn model(toy.problem, testutil::toy_config(), 2);
  std::ostringstream log;
  const auto history = train::train_phase1(model, toy.problem, LossWeights{}, TrainPlan{}, 7, &log);
  CHECK(history.size() == 7);
  CHECK(history.back().epoch == 6);
  int lines = 0;
  std::istringstream in(log.str());
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("terms"));
    CHECK(j.contains("weights"));
    CHECK(j["terms"].contains("ode_time"));
    ++lines;
  }
  CHECK(lines == 7);
}

TEST_CASE("phase one reduces the total loss by an order of magnitude") {
  auto toy = testutil::toy_problem();
  train::Einn model(toy.problem, testutil::toy_config(), 3);
  TrainPlan plan;
  plan.lr = 1e-2;
  const auto history = train::train_phase1(model, toy.problem, LossWeights{}, plan, 500);
  CHECK(history.back().total < 0.1 * history.front().total);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto run = [] {
    auto toy = testutil::toy_problem();
    train::Einn model(toy.problem, testutil::toy_config(), 4);
    std::vector<double> totals;
    for (const auto& r : train::train_phase1(model, toy.problem, LossWeights{}, TrainPlan{}, 20)) {
      totals.push_back(r.total);
    }
    return totals;
  };
  CHECK(run() == run());
}

TEST_CASE("doubling one weight adds exactly that term once more") {
  auto toy = testutil::toy_problem();
  train::Einn model(toy.problem, testutil::toy_config(), 5);
  for (auto phase : {train::Phase::One, train::Phase::Two}) {
    const LossWeights w;
    LossWeights doubled = w;
    doubled.helper *= 2.0;
    ad::Tape a, b;
    const auto base = train::build_losses(a, model, toy.problem, w, phase, true);
    const auto twice = train::build_losses(b, model, toy.problem, doubled, phase, true);
    double helper = 0.0;
    for (const auto& [name, v] : base.terms) {
      if (name == "helper") helper = v.scalar();
    }
    CHECK(twice.total.scalar() - base.total.scalar() == doctest::Approx(w.helper * helper).epsilon(1e-9));
  }
}

TEST_CASE("without gradient matching the alignment terms are dropped") {
  auto toy = testutil::toy_problem();
  train::Einn model(toy.problem, testutil::toy_config(), 6);
  ad::Tape a, b;
  const auto with = train::build_losses(a, model, toy.problem, LossWeights{}, train::Phase::Two, true);
  const auto without = train::build_losses(b, model, toy.problem, LossWeights{}, train::Phase::Two, false);
  auto has = [](const train::LossTerms& t, const std::string& name) {
    for (const auto& [n, v] : t.terms) {
      if (n == name) return true;
    }
    return false;
  };
  CHECK(has(with, "ode_feature"));
  CHECK_FALSE(has(without, "ode_feature"));
  double emb = 0.0, feature_ode = 0.0;
  for (const auto& [n, v] : with.terms) {
    if (n == "emb") emb = v.scalar();
    if (n == "ode_feature") feature_ode = v.scalar();
  }
  const LossWeights w;
  CHECK(with.total.scalar() - without.total.scalar() ==
        doctest::Approx(w.emb * emb + w.ode_feature * feature_ode).epsilon(1e-9));
}

TEST_CASE("phase two freezes everything before the embeddings") {
  auto toy = testutil::toy_problem();
  train::Einn model(toy.problem, testutil::toy_config(), 7);
  TrainPlan plan;
  plan.emb_threshold = 1e9;
  nn::ParamList frozen;
  model.time.collect_trunk(frozen);
  model.feature.collect(frozen);
  nn::ParamList trained;
  model.time.collect_head(trained);
  const auto frozen_before = snapshot(frozen);
  const auto trained_before = snapshot(trained);
  const ad::Matrix omega_before = model.time.omega_table.value;
  train::train_phase2(model, toy.problem, LossWeights{}, plan, 5);
  CHECK(snapshot(frozen) == frozen_before);
  CHECK(snapshot(trained) != trained_before);
  CHECK(model.time.omega_table.value != omega_before);
  for (const auto* p : frozen) CHECK_FALSE(p->frozen);
}

TEST_CASE("phase two requires aligned embeddings") {
  auto toy = testutil::toy_problem();
  train::Einn model(toy.problem, testutil::toy_config(), 8);
  TrainPlan plan;
  plan.emb_threshold = 1e-12;
  CHECK_THROWS_AS(train::train_phase2(model, toy.problem, LossWeights{}, plan, 1), ContractError);
  plan.gradient_matching = false;
  CHECK_NOTHROW(train::train_phase2(model, toy.problem, LossWeights{}, plan, 1));
}

TEST_CASE("the abort policy stops when embeddings never align") {
  auto toy = testutil::toy_problem();
  train::Einn model(toy.problem, testutil::toy_config(), 9);
  TrainPlan plan;
  plan.epochs_phase1 = 2;
  plan.epochs_phase2 = 2;
  plan.emb_threshold = 1e-12;
  plan.policy = train::ExtendPolicy::Abort;
  CHECK_THROWS_AS(train::train_einn(model, toy.problem, LossWeights{}, plan), TrainingError);
}

TEST_CASE("the gradient-trick gap is finite and within its bound") {
  auto toy = testutil::toy_problem();
  train::Einn model(toy.problem, testutil::toy_config(), 10);
  TrainPlan plan;
  plan.lr = 1e-2;
  train::train_phase1(model, toy.problem, LossWeights{}, plan, 50);
  const auto gap = train::gradient_trick_gap(model, toy.problem);
  CHECK(gap.finite);
  CHECK(gap.max_gap <= gap.max_bound * (1.0 + 1e-9) + 1e-12);
}
