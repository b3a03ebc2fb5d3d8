// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "epiforge/errors.hpp"

namespace epiforge::eval {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("metric: truth and prediction lengths differ");
}

double rmse(std::span<const double> y, std::span<const double> p) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - p[i]) * (y[i] - p[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

std::vector<double> truths(std::span<const ForecastRecord> r) {
  std::vector<double> out;
  for (const auto& x : r) out.push_back(x.truth);
  return out;
}

std::vector<double> preds(std::span<const ForecastRecord> r) {
  std::vector<double> out;
  for (const auto& x : r) out.push_back(x.predicted);
  return out;
}

}  // namespace

std::optional<double> nr1(std::span<const double> y, std::span<const double> p, MetricOptions opt) {
  check_lengths(y, p);
  if (y.empty()) return std::nullopt;
  double mean_abs = 0.0;
  for (double v : y) mean_abs += std::abs(v);
  mean_abs /= static_cast<double>(y.size());
  const double denom = mean_abs + (opt.plus_one_guard ? 1.0 : 0.0);
  if (denom == 0.0) return std::nullopt;
  return rmse(y, p) / denom;
}

std::optional<double> nr2(std::span<const double> y, std::span<const double> p) {
  check_lengths(y, p);
  if (y.empty()) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double range = *hi - *lo;
  if (range == 0.0) return std::nullopt;
  return rmse(y, p) / range;
}

std::optional<double> nd(std::span<const double> y, std::span<const double> p, MetricOptions opt) {
  check_lengths(y, p);
  if (y.empty()) return std::nullopt;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += std::abs(y[i] - p[i]);
    den += std::abs(y[i]);
  }
  if (opt.plus_one_guard) den += 1.0;
  if (den == 0.0) return std::nullopt;
  return num / den;
}

std::optional<double> pearson(std::span<const double> y, std::span<const double> p) {
  check_lengths(y, p);
  const std::size_t n = y.size();
  if (n < 2) return std::nullopt;
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  // Rounding in the mean can leave a tiny variance on an exactly flat series.
  if (constant(y) || constant(p)) return std::nullopt;
  double my = 0.0;
  double mp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    my += y[i];
    mp += p[i];
  }
  my /= static_cast<double>(n);
  mp /= static_cast<double>(n);
  double syy = 0.0;
  double spp = 0.0;
  double syp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    syy += (y[i] - my) * (y[i] - my);
    spp += (p[i] - mp) * (p[i] - mp);
    syp += (y[i] - my) * (p[i] - mp);
  }
  if (syy == 0.0 || spp == 0.0) return std::nullopt;
  return std::clamp(syp / std::sqrt(syy * spp), -1.0, 1.0);
}

std::optional<double> nr1(std::span<const ForecastRecord> r, MetricOptions opt) {
  const auto y = truths(r);
  const auto p = preds(r);
  return nr1(y, p, opt);
}

std::optional<double> nr2(std::span<const ForecastRecord> r) {
  const auto y = truths(r);
  const auto p = preds(r);
  return nr2(y, p);
}

std::optional<double> nd(std::span<const ForecastRecord> r, MetricOptions opt) {
  const auto y = truths(r);
  const auto p = preds(r);
  return nd(y, p, opt);
}

std::optional<double> pearson_per_week(std::span<const ForecastRecord> week_records) {
  std::vector<ForecastRecord> sorted(week_records.begin(), week_records.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.horizon < b.horizon; });
  const auto y = truths(sorted);
  const auto p = preds(sorted);
  return pearson(y, p);
}

std::optional<double> median_defined(std::vector<std::optional<double>> values) {
  std::vector<double> v;
  for (const auto& x : values) {
    if (x) v.push_back(*x);
  }
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const ScoreRow* ScoreTable::find(const std::string& model, const std::string& region) const {
  for (const ScoreRow& r : rows) {
    if (r.model == model && r.region == region) return &r;
  }
  return nullptr;
}

namespace {

void fill_errors(ScoreRow& row, const std::vector<ForecastRecord>& recs, MetricOptions opt, int short_max) {
  std::vector<ForecastRecord> s;
  std::vector<ForecastRecord> l;
  for (const auto& r : recs) (r.horizon <= short_max ? s : l).push_back(r);
  row.nr1_short = nr1(std::span<const ForecastRecord>(s), opt);
  row.nr2_short = nr2(std::span<const ForecastRecord>(s));
  row.nd_short = nd(std::span<const ForecastRecord>(s), opt);
  row.nr1_long = nr1(std::span<const ForecastRecord>(l), opt);
  row.nr2_long = nr2(std::span<const ForecastRecord>(l));
  row.nd_long = nd(std::span<const ForecastRecord>(l), opt);
  row.records = static_cast<int>(recs.size());
}

std::optional<double> region_pc(const std::vector<ForecastRecord>& recs) {
  std::map<int, std::vector<ForecastRecord>> by_week;
  for (const auto& r : recs) by_week[r.week].push_back(r);
  std::vector<std::optional<double>> pcs;
  for (const auto& [w, rs] : by_week) pcs.push_back(pearson_per_week(rs));
  return median_defined(std::move(pcs));
}

}  // namespace

ScoreTable aggregate_scores(std::span<const ForecastRecord> records, MetricOptions opt, int short_max) {
  std::map<std::string, std::map<std::string, std::vector<ForecastRecord>>> grouped;
  std::vector<std::string> model_order;
  for (const auto& r : records) {
    if (!grouped.count(r.model)) model_order.push_back(r.model);
    grouped[r.model][r.region].push_back(r);
  }
  ScoreTable table;
  for (const std::string& model : model_order) {
    std::vector<ForecastRecord> pooled;
    double pc_sum = 0.0;
    int pc_count = 0;
    for (const auto& [region, recs] : grouped[model]) {
      ScoreRow row;
      row.model = model;
      row.region = region;
      fill_errors(row, recs, opt, short_max);
      row.pc = region_pc(recs);
      if (row.pc) {
        pc_sum += *row.pc;
        ++pc_count;
      }
      table.rows.push_back(row);
      pooled.insert(pooled.end(), recs.begin(), recs.end());
    }
    ScoreRow all;
    all.model = model;
    fill_errors(all, pooled, opt, short_max);
    if (pc_count > 0) all.pc = pc_sum / pc_count;
    table.rows.push_back(all);
  }
  return table;
}

std::string format_metric(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return "NaN";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace epiforge::eval
