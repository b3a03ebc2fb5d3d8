// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "epiforge/dataset.hpp"
#include "epiforge/synthetic.hpp"

using namespace epiforge;
using data::Matrix;
using data::Vector;

namespace {

std::string toy_csv(int days) {
  std::ostringstream os;
  os << "date,region,target,mobility,symptoms\n";
  for (const char* region : {"north", "south"}) {
    for (int d = 0; d < days; ++d) {
      os << data::format_date(data::parse_date("2020-03-01") + d) << ',' << region << ',' << d << ',' << 0.5 * d
         << ',' << d * d << '\n';
    }
  }
  return os.str();
}

}  // namespace

TEST_CASE("dates round-trip") {
  CHECK(data::format_date(data::parse_date("2020-02-29")) == "2020-02-29");
  CHECK(data::parse_date("1970-01-02") == 1);
  CHECK_THROWS_AS(data::parse_date("2020-13-01"), SchemaError);
  CHECK_THROWS_AS(data::parse_date("yesterday"), SchemaError);
}

TEST_CASE("a two-region toy file gives two datasets") {
  std::istringstream in(toy_csv(10));
  const auto sets = data::parse_csv(in);
  REQUIRE(sets.size() == 2);
  for (const auto& ds : sets) {
    CHECK(ds.days() == 10);
    CHECK(ds.features.cols() == 2);
    CHECK(ds.feature_names == std::vector<std::string>{"mobility", "symptoms"});
    CHECK(ds.target(9) == 9.0);
    CHECK(ds.features(3, 1) == 9.0);
  }
}

TEST_CASE("a duplicate date names the date") {
  std::string text = toy_csv(3);
  text += "2020-03-02,north,1,1,1\n";
  std::istringstream in(text);
  try {
    data::parse_csv(in);
    FAIL("expected ContiguityError");
  } catch (const ContiguityError& e) {
    CHECK(std::string(e.what()).find("2020-03-02") != std::string::npos);
  }
}

TEST_CASE("a date gap names the date") {
  std::istringstream in("date,region,target,x\n2020-03-01,a,1,1\n2020-03-03,a,1,1\n");
  try {
    data::parse_csv(in);
    FAIL("expected ContiguityError");
  } catch (const ContiguityError& e) {
    CHECK(std::string(e.what()).find("2020-03-01") != std::string::npos);
  }
}

TEST_CASE("a missing column is a schema error naming it") {
  std::istringstream in("date,region,x\n2020-03-01,a,1\n");
  try {
    data::parse_csv(in);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("target") != std::string::npos);
  }
}

TEST_CASE("missing cells are forward-filled and recorded") {
  std::istringstream in("date,region,target,x\n2020-03-01,a,1,\n2020-03-02,a,2,5\n2020-03-03,a,3,NA\n");
  const auto sets = data::parse_csv(in);
  const auto& ds = sets.front();
  CHECK(ds.features(0, 0) == 0.0);
  CHECK(ds.features(2, 0) == 5.0);
  CHECK(ds.imputations.size() == 2);
}

TEST_CASE("write and read round-trip losslessly") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e3);
  data::RegionDataset ds;
  ds.region = "x";
  ds.start = data::parse_date("2021-01-01");
  ds.feature_names = {"f1", "f2", "f3"};
  ds.features = Matrix(30, 3);
  ds.target = Vector(30);
  for (int i = 0; i < 30; ++i) {
    ds.target(i) = g(rng);
    for (int j = 0; j < 3; ++j) ds.features(i, j) = g(rng) * 1e-7;
  }
  std::ostringstream out;
  data::write_csv(out, {ds});
  std::istringstream in(out.str());
  const auto back = data::parse_csv(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].start == ds.start);
  CHECK(back[0].target == ds.target);
  CHECK(back[0].features == ds.features);
}

TEST_CASE("standard scaling examples") {
  SUBCASE("hand oracle") {
    Matrix x(3, 1);
    x << 1, 2, 3;
    const auto s = data::standard_scale(x, 3);
    CHECK(s.values(0, 0) == doctest::Approx(-1.224745).epsilon(1e-6));
    CHECK(s.values(1, 0) == 0.0);
    CHECK(s.values(2, 0) == doctest::Approx(1.224745).epsilon(1e-6));
    CHECK(s.scaler.stddev(0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
  }
  SUBCASE("constant columns are dropped") {
    Matrix x(4, 3);
    x << 1, 7, 2, 2, 7, 4, 3, 7, 8, 4, 7, 16;
    const auto s = data::standard_scale(x, 4);
    CHECK(s.values.cols() == 2);
    CHECK(s.scaler.dropped == std::vector<int>{1});
    CHECK(s.scaler.kept == std::vector<int>{0, 2});
  }
  SUBCASE("training slice statistics only, and the inverse recovers the input") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(5.0, 3.0);
    Matrix x(50, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = g(rng);
    const auto s = data::standard_scale(x, 30);
    const Matrix train = s.values.topRows(30);
    CHECK(train.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
    const Matrix centered = train.rowwise() - train.colwise().mean();
    const Vector sd = (centered.colwise().squaredNorm() / 30.0).cwiseSqrt();
    CHECK((sd.array() - 1.0).abs().maxCoeff() < 1e-9);
    CHECK((s.scaler.inverse(s.values) - x).cwiseAbs().maxCoeff() < 1e-12);
    Matrix changed = x;
    changed.bottomRows(20).setConstant(1e9);
    CHECK(data::standard_scale(changed, 30).scaler.mean == s.scaler.mean);
  }
}

TEST_CASE("weekly aggregation") {
  const Vector week = Vector::LinSpaced(7, 1.0, 7.0);
  CHECK(data::weekly_target(week, data::TargetMode::Covid)(0) == 28.0);
  CHECK(data::weekly_target(week, data::TargetMode::Flu)(0) == 4.0);
  CHECK(data::weekly_target(Vector::Ones(20), data::TargetMode::Covid).size() == 2);
}

TEST_CASE("synthetic world examples") {
  SUBCASE("no mortality and no noise gives zero deaths") {
    data::SyntheticWorldSpec spec;
    spec.days = 60;
    spec.regimes = {{0, ode::Params{{0.3, 0.2, 0.1, 0.0}}}};
    const auto w = data::make_synthetic_world(spec);
    CHECK(w.dataset.target.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("the same seed gives the same dataset") {
    const auto a = data::make_synthetic_world(data::two_regime_world(3));
    const auto b = data::make_synthetic_world(data::two_regime_world(3));
    CHECK(a.dataset.target == b.dataset.target);
    CHECK(a.dataset.features == b.dataset.features);
    const auto c = data::make_synthetic_world(data::two_regime_world(4));
    CHECK(c.dataset.target != a.dataset.target);
  }
  SUBCASE("clean deaths match an independent RK4 rerun") {
    const auto w = data::make_synthetic_world(data::two_regime_world(0));
    const double N = w.dataset.population;
    std::vector<ode::State> states{w.states.front()};
    for (std::size_t d = 0; d < w.params.size(); ++d) {
      const ode::Params& p = w.params[d];
      auto f = [&](const ode::State& s) { return ode::seirm_rhs(s, p, N); };
      const ode::State& s = states.back();
      const ode::State k1 = f(s);
      const ode::State k2 = f(s + 0.5 * k1);
      const ode::State k3 = f(s + 0.5 * k2);
      const ode::State k4 = f(s + k3);
      states.push_back(s + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0);
    }
    REQUIRE(states.size() == w.states.size());
    for (std::size_t d = 0; d + 1 < states.size(); ++d) {
      const double deaths = states[d + 1](ode::seirm::M) - states[d](ode::seirm::M);
      CHECK(std::abs(deaths - w.clean_target(static_cast<Eigen::Index>(d))) <= 1e-10 * std::max(1.0, deaths));
    }
  }
  SUBCASE("the two-regime world switches beta at day 90") {
    const auto w = data::make_synthetic_world(data::two_regime_world(0));
    CHECK(w.params[89](ode::seirm::beta) == 0.3);
    CHECK(w.params[90](ode::seirm::beta) == 0.15);
    CHECK(w.dataset.days() == 180);
    CHECK(w.dataset.population == 1e6);
  }
}
