// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/optimizer.hpp"

#include <cmath>

namespace epiforge {

Adam::Adam(std::vector<ad::Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const ad::Parameter* p : params_) {
    m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Parameter& p = *params_[i];
    if (p.frozen || p.grad.size() == 0) continue;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw DimensionError("Adam: gradient shape mismatch for '" + p.name + "'");
    }
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * p.grad;
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -=
        options_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + options_.eps);
  }
}

void optimizer_step(std::vector<ad::Parameter*>& params, double lr) {
  AdamOptions options;
  options.lr = lr;
  Adam adam(params, options);
  adam.step();
}

}  // namespace epiforge
