// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "epiforge/nn.hpp"
#include "helpers.hpp"

using namespace epiforge;
using ad::Dual;
using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

TEST_CASE("grad of x^2 at 3 is 6") {
  Parameter x("x", Matrix::Constant(1, 1, 3.0));
  Tape tape;
  Var v = tape.param(x);
  Parameter* ps[] = {&x};
  auto g = ad::grad(ad::square(v), ps);
  CHECK(g[0](0, 0) == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("grad of tanh at 0 is 1") {
  Parameter x("x", Matrix::Zero(1, 1));
  Tape tape;
  Parameter* ps[] = {&x};
  auto g = ad::grad(ad::tanh(tape.param(x)), ps);
  CHECK(g[0](0, 0) == 1.0);
}

TEST_CASE("two-layer tanh network gradients match central differences") {
  nn::Rng rng(3);
  nn::Mlp net("net", {3, 5, 1}, true, rng);
  Matrix x = nn::uniform_matrix(3, 4, 1.0, rng);
  nn::ParamList params;
  net.collect(params);
  auto build = [&](Tape& t) { return ad::sum(net.forward(t, t.constant(x))); };
  CHECK(testutil::max_grad_error(build, params) < 1e-4);
}

TEST_CASE("parameters without a path to the loss get exact zeros") {
  Parameter used("used", Matrix::Constant(2, 1, 0.5));
  Parameter idle("idle", Matrix::Constant(3, 2, 7.0));
  Tape tape;
  Var u = tape.param(used);
  tape.param(idle);
  Parameter* ps[] = {&used, &idle};
  auto g = ad::grad(ad::sum(ad::square(u)), ps);
  CHECK(g[1].cwiseAbs().maxCoeff() == 0.0);
  CHECK(g[0](0, 0) == doctest::Approx(1.0));
}

TEST_CASE("a parameter not on the tape is a registry error") {
  Parameter a("a", Matrix::Ones(1, 1));
  Parameter stranger("stranger", Matrix::Ones(1, 1));
  Tape tape;
  Var loss = ad::square(tape.param(a));
  Parameter* ps[] = {&stranger};
  CHECK_THROWS_AS(ad::grad(loss, ps), ad::RegistryError);
}

TEST_CASE("a non-finite adjoint names the offending node") {
  Parameter a("a", Matrix::Zero(1, 1));
  Tape tape;
  Var loss = ad::pow(tape.param(a), 0.5);  // derivative 0.5 / sqrt(0)
  try {
    tape.backward(loss);
    FAIL("expected NonFiniteGradient");
  } catch (const ad::NonFiniteGradient& e) {
    CHECK(e.node() >= 0);
  }
}

TEST_CASE("directional derivative examples") {
  SUBCASE("t^2 at 3") {
    Tape tape;
    Var t = tape.constant(3.0);
    Dual td = tape.seed(t);
    CHECK(ad::directional_derivative(td * td, t).scalar() == doctest::Approx(6.0).epsilon(1e-15));
  }
  SUBCASE("sin(2 pi t) at 0") {
    Tape tape;
    Var t = tape.constant(0.0);
    Dual td = tape.seed(t);
    Dual y = ad::sin(td * (2.0 * std::numbers::pi));
    CHECK(ad::directional_derivative(y, t).scalar() == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-15));
  }
  SUBCASE("mixed partial of w t is 1") {
    for (double w0 : {-2.0, 0.0, 3.5}) {
      Parameter w("w", Matrix::Constant(1, 1, w0));
      Tape tape;
      Var t = tape.constant(1.7);
      Dual td = tape.seed(t);
      Var dfdt = ad::directional_derivative(ad::matmul(tape.param(w), td), t);
      Parameter* ps[] = {&w};
      CHECK(ad::grad(dfdt, ps)[0](0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("two seeded inputs are ambiguous") {
  Tape tape;
  Var a = tape.constant(1.0);
  Var b = tape.constant(2.0);
  Dual da = tape.seed(a);
  tape.seed(b);
  CHECK_THROWS_AS(ad::directional_derivative(da * da, a), ad::AmbiguousSeed);
}

TEST_CASE("jacobian examples") {
  SUBCASE("linear map gives A exactly") {
    Tape tape;
    Matrix A(2, 2);
    A << 1, 2, 3, 4;
    Var W = tape.constant(A);
    Var x = tape.constant(Matrix::Constant(2, 1, 0.3));
    Var J = ad::jacobian([&](const Dual& v) { return ad::matmul(W, v); }, x);
    CHECK(J.value() == A);
  }
  SUBCASE("identity") {
    Tape tape;
    Var x = tape.constant(Matrix::Constant(4, 1, -1.0));
    Var J = ad::jacobian([](const Dual& v) { return v; }, x);
    CHECK(J.value() == Matrix::Identity(4, 4));
  }
  SUBCASE("three-layer tanh map against finite differences") {
    nn::Rng rng(11);
    nn::Mlp f("f", {4, 6, 6, 3}, true, rng);
    const Matrix x0 = nn::uniform_matrix(4, 1, 1.0, rng);
    Tape tape;
    Var J = ad::jacobian([&](const Dual& v) { return f.forward(tape, v); }, tape.constant(x0));
    REQUIRE(J.rows() == 3);
    REQUIRE(J.cols() == 4);
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      Matrix up = x0, down = x0;
      up(j) += h;
      down(j) -= h;
      Tape t2;
      const Matrix fd = (f.forward(t2, t2.constant(up)).value() - f.forward(t2, t2.constant(down)).value()) / (2 * h);
      for (int i = 0; i < 3; ++i) CHECK(testutil::relative_error(J.value()(i, j), fd(i), 1e-6) < 1e-4);
    }
  }
  SUBCASE("Jacobian entries stay differentiable") {
    Parameter w("w", Matrix::Constant(2, 2, 0.4));
    auto build = [&](Tape& t) {
      Var W = t.param(w);
      Var J = ad::jacobian([&](const Dual& v) { return ad::tanh(ad::matmul(W, v)); }, t.constant(Matrix::Ones(2, 1)));
      return ad::sum(ad::square(J));
    };
    CHECK(testutil::max_grad_error(build, {&w}) < 1e-4);
  }
}

TEST_CASE("forward tangents equal reverse gradients on random scalar chains") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 8);
  std::uniform_real_distribution<double> start(0.2, 0.9);
  for (int trial = 0; trial < 200; ++trial) {
    const int depth = 1 + trial % 8;
    std::vector<int> ops;
    for (int i = 0; i < depth; ++i) ops.push_back(pick(rng));
    const double x0 = start(rng);
    auto chain = [&](auto v) {
      for (int op : ops) {
        switch (op) {
          case 0: v = v + v * 0.5; break;
          case 1: v = v * v; break;
          case 2: v = ad::tanh(v); break;
          case 3: v = ad::sigmoid(v); break;
          case 4: v = ad::sin(v); break;
          case 5: v = ad::cos(v) + 1.5; break;
          case 6: v = ad::exp(v * 0.3); break;
          case 7: v = ad::relu(v) + 0.1; break;
          default: v = ad::square(v) + 0.2; break;
        }
      }
      return v;
    };
    Parameter p("x", Matrix::Constant(1, 1, x0));
    Tape tape;
    Var xv = tape.param(p);
    Dual xd = tape.seed(xv);
    Dual y = chain(xd);
    const double tangent = y.has_tangent() ? y.tangent.scalar() : 0.0;
    Tape tape2;
    Var loss = chain(tape2.param(p));
    tape2.backward(loss);
    CHECK(testutil::relative_error(tangent, tape2.gradient(p)(0, 0), 1e-12) < 1e-12);
  }
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  nn::Rng rng(2);
  nn::Mlp net("n", {2, 4, 1}, false, rng);
  nn::ParamList params;
  net.collect(params);
  const Matrix x = nn::uniform_matrix(2, 3, 1.0, rng);
  auto grads = [&](int which) {
    Tape t;
    Var y = net.forward(t, t.constant(x));
    Var f = ad::sum(ad::square(y));
    Var g = ad::sum(ad::tanh(y));
    Var loss = which == 0 ? f : which == 1 ? g : f + g;
    t.backward(loss);
    std::vector<Matrix> out;
    for (auto* p : params) out.push_back(t.gradient(*p));
    return out;
  };
  auto a = grads(0), b = grads(1), c = grads(2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((c[i] - a[i] - b[i]).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("nesting soundness for f(w, t) = w g(t)") {
  for (double t0 : {-1.0, 0.3, 2.0}) {
    Parameter w("w", Matrix::Constant(1, 1, 0.7));
    Tape tape;
    Var t = tape.constant(t0);
    Dual td = tape.seed(t);
    Dual f = ad::matmul(tape.param(w), ad::sin(td));
    Var dfdt = ad::directional_derivative(f, t);
    tape.backward(dfdt);
    CHECK(std::abs(tape.gradient(w)(0, 0) - std::cos(t0)) < 1e-10);
  }
}
