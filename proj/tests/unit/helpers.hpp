// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Finite-difference oracles shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "epiforge/autodiff.hpp"

namespace testutil {

using epiforge::ad::Matrix;
using epiforge::ad::Parameter;
using epiforge::ad::Tape;
using epiforge::ad::Var;

using LossBuilder = std::function<Var(Tape&)>;

inline double evaluate(const LossBuilder& build) {
  Tape tape;
  return build(tape).scalar();
}

inline double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Largest relative error between tape gradients and central differences
/// over every entry of every parameter.
inline double max_grad_error(const LossBuilder& build, const std::vector<Parameter*>& params, double h = 1e-5,
                             double floor = 1e-6) {
  std::vector<Matrix> analytic;
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
    for (Parameter* p : params) {
      analytic.push_back(tape.has_param(*p) ? tape.gradient(*p) : Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double saved = p.value(i);
      p.value(i) = saved + h;
      const double up = evaluate(build);
      p.value(i) = saved - h;
      const double down = evaluate(build);
      p.value(i) = saved;
      worst = std::max(worst, relative_error(analytic[k](i), (up - down) / (2.0 * h), floor));
    }
  }
  return worst;
}

}  // namespace testutil
