// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <functional>

namespace epiforge {

struct NelderMeadOptions {
  /// Stop when max(f) - min(f) over the simplex falls below this.
  double tol = 1e-10;
  int max_iters = 2000;
  /// Initial simplex edge: x0_i + step (or step if x0_i == 0 scaled).
  double initial_step = 0.5;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Downhill simplex minimization. NaN objective values are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& options = {});

}  // namespace epiforge
