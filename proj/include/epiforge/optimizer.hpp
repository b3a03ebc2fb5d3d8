// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "epiforge/autodiff.hpp"

namespace epiforge {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter list. Frozen parameters are skipped and left
/// byte-identical.
class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, AdamOptions options = {});

  /// Applies one update using each parameter's `grad`.
  void step();
  void set_lr(double lr) { options_.lr = lr; }
  const AdamOptions& options() const { return options_; }
  long steps() const { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<ad::Matrix> m_;
  std::vector<ad::Matrix> v_;
  AdamOptions options_;
  long t_ = 0;
};

/// Single stateless-from-scratch Adam step (first moment/second moment start
/// at zero), exposed for the optimizer contract tests.
void optimizer_step(std::vector<ad::Parameter*>& params, double lr);

}  // namespace epiforge
