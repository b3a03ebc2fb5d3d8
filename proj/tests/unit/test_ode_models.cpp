// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "epiforge/ode.hpp"

using namespace epiforge;
using ode::Params;
using ode::State;

TEST_CASE("seirm_rhs: no infections means no flows") {
  const State s{{700.0, 0.0, 0.0, 200.0, 100.0}};
  const Params p{{0.5, 0.3, 0.2, 0.05}};
  CHECK(ode::seirm_rhs(s, p, 1000.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("seirm_rhs: hand-evaluated point") {
  const State s{{990.0, 0.0, 10.0, 0.0, 0.0}};
  const Params p{{0.3, 0.2, 0.1, 0.01}};
  const State d = ode::seirm_rhs(s, p, 1000.0);
  CHECK(d(0) == doctest::Approx(-2.97).epsilon(1e-12));
  CHECK(d(1) == doctest::Approx(2.97).epsilon(1e-12));
  CHECK(d(2) == doctest::Approx(-1.1).epsilon(1e-12));
  CHECK(d(3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d(4) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("seirm_rhs: flows sum to zero") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const State s{{1e5 * u(rng), 1e3 * u(rng), 1e3 * u(rng), 1e4 * u(rng), 1e2 * u(rng)}};
    const Params p{{u(rng), u(rng), u(rng), u(rng)}};
    CHECK(std::abs(ode::seirm_rhs(s, p, 2e5).sum()) < 1e-9);
  }
}

TEST_CASE("seirm_rhs rejects a non-positive population") {
  CHECK_THROWS_AS(ode::seirm_rhs(State::Zero(5), Params::Constant(4, 0.1), 0.0), DomainError);
}

TEST_CASE("sirs_rhs examples") {
  const Params p{{0.4, 4.0, 1460.0}};
  SUBCASE("fully susceptible") {
    const State d = ode::sirs_rhs(State{{1000.0, 0.0, 0.0}}, p, 1000.0);
    CHECK(d(0) == 0.0);
    CHECK(d(1) == 0.0);
  }
  SUBCASE("hand-evaluated point") {
    const State d = ode::sirs_rhs(State{{900.0, 50.0, 50.0}}, p, 1000.0);
    CHECK(d(0) == doctest::Approx(50.0 / 1460.0 - 18.0).epsilon(1e-12));
    CHECK(d(0) == doctest::Approx(-17.96575).epsilon(1e-6));
    CHECK(d(1) == doctest::Approx(5.5).epsilon(1e-12));
  }
  SUBCASE("waning immunity refills S") {
    const State d = ode::sirs_rhs(State{{600.0, 0.0, 400.0}}, p, 1000.0);
    CHECK(d(0) > 0.0);
  }
  SUBCASE("non-positive durations are domain errors") {
    CHECK_THROWS_AS(ode::sirs_rhs(State{{900.0, 50.0, 50.0}}, Params{{0.4, 0.0, 1460.0}}, 1000.0), DomainError);
    CHECK_THROWS_AS(ode::sirs_rhs(State{{900.0, 50.0, 50.0}}, Params{{0.4, 4.0, -1.0}}, 1000.0), DomainError);
  }
}

TEST_CASE("ili_observable examples") {
  const Params p{{0.4, 4.0, 1460.0}};
  CHECK(ode::ili_observable(State{{900.0, 0.0, 100.0}}, p, 1000.0, 0.05) == 0.0);
  CHECK(ode::ili_observable(State{{900.0, 50.0, 50.0}}, p, 1000.0, 0.05) == doctest::Approx(0.36).epsilon(1e-12));
  const double a = ode::ili_observable(State{{900.0, 50.0, 50.0}}, p, 1000.0, 0.1);
  const double b = ode::ili_observable(State{{900.0, 50.0, 50.0}}, p, 1000.0, 0.2);
  CHECK(b == doctest::Approx(a / 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(ode::ili_observable(State{{900.0, 50.0, 50.0}}, p, 1000.0, 0.0), ConfigError);
  CHECK_THROWS_AS(ode::ili_observable(State{{900.0, 50.0, 50.0}}, p, 1000.0, 1.5), ConfigError);
}

TEST_CASE("rk4_integrate examples") {
  SUBCASE("zero right-hand side keeps the state") {
    const State s0{{1.0, 2.0}};
    std::vector<Params> sched(5, Params::Zero(1));
    auto traj = ode::rk4_integrate([](const State& s, const Params&) { return State::Zero(s.size()); }, s0, sched, 1.0,
                                   5, 1.0);
    REQUIRE(traj.size() == 6);
    for (const State& s : traj) CHECK(s == s0);
  }
  SUBCASE("one step of exponential decay") {
    std::vector<Params> sched(1, Params::Zero(1));
    auto traj = ode::rk4_integrate([](const State& s, const Params&) { return State(-s); }, State::Ones(1), sched, 0.1,
                                   1, 1.0);
    CHECK(traj[1](0) == doctest::Approx(0.9048375).epsilon(1e-7));
    CHECK(std::abs(traj[1](0) - std::exp(-0.1)) < 1e-7);
  }
  SUBCASE("M is constant without mortality") {
    std::vector<Params> sched(60, Params{{0.3, 0.2, 0.1, 0.0}});
    auto traj = ode::rk4_integrate([](const State& s, const Params& p) { return ode::seirm_rhs(s, p, 1e6); },
                                   State{{1e6 - 100, 50, 50, 0, 7.0}}, sched, 1.0, 60, 1e6);
    for (const State& s : traj) CHECK(s(4) == 7.0);
  }
  SUBCASE("negative compartments raise a stability error with the step") {
    std::vector<Params> sched(10, Params::Zero(1));
    try {
      ode::rk4_integrate([](const State&, const Params&) { return State::Constant(1, -0.4); }, State::Ones(1), sched,
                         1.0, 10, 1.0);
      FAIL("expected StabilityError");
    } catch (const StabilityError& e) {
      CHECK(e.step() == 3);
    }
  }
}

TEST_CASE("rk4 error shrinks at fourth order") {
  auto error = [](int n) {
    std::vector<Params> sched(static_cast<std::size_t>(n), Params::Zero(1));
    auto traj = ode::rk4_integrate([](const State& s, const Params&) { return State(-s); }, State::Ones(1), sched,
                                   1.0 / n, n, 1.0);
    return std::abs(traj.back()(0) - std::exp(-1.0));
  };
  for (int n : {2, 4, 8, 16}) CHECK(error(n) / error(2 * n) >= 14.0);
}

TEST_CASE("SEIRM trajectory is monotone in S, R and M under constant parameters") {
  std::vector<Params> sched(200, Params{{0.4, 0.25, 0.1, 0.02}});
  auto traj = ode::rk4_integrate([](const State& s, const Params& p) { return ode::seirm_rhs(s, p, 1e6); },
                                 State{{1e6 - 20, 10, 10, 0, 0}}, sched, 1.0, 200, 1e6);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    CHECK(traj[i](0) <= traj[i - 1](0));
    CHECK(traj[i](3) >= traj[i - 1](3));
    CHECK(traj[i](4) >= traj[i - 1](4));
  }
}

TEST_CASE("squashing keeps parameters inside their boxes") {
  for (ode::ModelKind kind : {ode::ModelKind::Seirm, ode::ModelKind::Sirs}) {
    const ode::ParamBounds b = ode::ParamBounds::defaults(kind);
    for (double x : {-1e6, -30.0, -1.0, 0.0, 2.0, 30.0, 1e6}) {
      const Params p = ode::squash(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(b.size()), x), b);
      CHECK(b.contains(p));
    }
    const Params mid = ode::squash(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(b.size()), 0.7), b);
    CHECK((ode::squash(ode::unsquash(mid, b), b) - mid).cwiseAbs().maxCoeff() < 1e-12);
  }
  const ode::ParamBounds sirs = ode::ParamBounds::defaults(ode::ModelKind::Sirs);
  CHECK(sirs.boxes[0].hi == 2.0);
  CHECK(sirs.boxes[1].lo == 1.0);
  CHECK(sirs.boxes[1].hi == 14.0);
  CHECK(sirs.boxes[2].lo == 180.0);
  CHECK(sirs.boxes[2].hi == 3650.0);
}
