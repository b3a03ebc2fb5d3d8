// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "epiforge/errors.hpp"

namespace epiforge {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& options) {
  const Eigen::Index d = x0.size();
  if (d < 1) throw DimensionError("nelder_mead: empty starting point");

  NelderMeadResult result;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++result.evaluations;
    const double v = objective(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(x0);
  values.push_back(eval(x0));
  if (!std::isfinite(values.front())) throw DomainError("nelder_mead: objective not finite at x0");
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd x = x0;
    x(i) += x0(i) != 0.0 ? options.initial_step * std::max(1.0, std::abs(x0(i))) : options.initial_step;
    simplex.push_back(x);
    values.push_back(eval(x));
  }

  std::vector<std::size_t> order(simplex.size());
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> v2;
    for (std::size_t i : order) {
      s2.push_back(simplex[i]);
      v2.push_back(values[i]);
    }
    simplex.swap(s2);
    values.swap(v2);
  };

  sort_simplex();
  const std::size_t worst = simplex.size() - 1;
  while (result.iterations < options.max_iters) {
    if (values[worst] - values.front() < options.tol) {
      result.converged = true;
      break;
    }
    ++result.iterations;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < worst; ++i) centroid += simplex[i];
    centroid /= static_cast<double>(worst);

    Eigen::VectorXd xr = centroid + options.reflection * (centroid - simplex[worst]);
    const double fr = eval(xr);
    if (fr < values.front()) {
      Eigen::VectorXd xe = centroid + options.expansion * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
    } else if (fr < values[worst - 1]) {
      simplex[worst] = xr;
      values[worst] = fr;
    } else {
      const bool outside = fr < values[worst];
      Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + options.contraction * (xr - centroid))
                                   : Eigen::VectorXd(centroid + options.contraction * (simplex[worst] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : values[worst])) {
        simplex[worst] = xc;
        values[worst] = fc;
      } else {
        for (std::size_t i = 1; i < simplex.size(); ++i) {
          simplex[i] = simplex.front() + options.shrink * (simplex[i] - simplex.front());
          values[i] = eval(simplex[i]);
        }
      }
    }
    sort_simplex();
  }
  if (!result.converged && values[worst] - values.front() < options.tol) result.converged = true;
  result.x = simplex.front();
  result.f = values.front();
  return result;
}

}  // namespace epiforge
