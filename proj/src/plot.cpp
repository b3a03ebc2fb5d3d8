// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace epiforge::io {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string forecast_svg(const std::string& region, const std::vector<eval::ForecastRecord>& records, int width,
                         int height) {
  std::map<int, double> truth;  // target week -> value
  std::map<std::string, std::map<int, std::vector<std::pair<int, double>>>> lines;
  std::vector<std::string> model_order;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  int w_lo = std::numeric_limits<int>::max();
  int w_hi = std::numeric_limits<int>::min();
  for (const auto& r : records) {
    if (r.region != region) continue;
    const int target_week = r.week + r.horizon - 1;
    truth[target_week] = r.truth;
    if (!lines.count(r.model)) model_order.push_back(r.model);
    lines[r.model][r.week].emplace_back(target_week, r.predicted);
    for (double v : {r.truth, r.predicted}) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    w_lo = std::min(w_lo, target_week);
    w_hi = std::max(w_hi, target_week);
  }
  const double left = 60.0, right = 160.0, top = 30.0, bottom = 40.0;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
      width, height, width, height, left, escape(region));
  if (truth.empty()) return svg + "</svg>\n";
  if (hi <= lo) hi = lo + 1.0;
  if (w_hi <= w_lo) w_hi = w_lo + 1;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  auto X = [&](int w) { return left + pw * (w - w_lo) / static_cast<double>(w_hi - w_lo); };
  auto Y = [&](double v) { return top + ph * (1.0 - (v - lo) / (hi - lo)); };

  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#444\"/>\n", left, top, top + ph);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#444\"/>\n", left, top + ph,
                     left + pw);
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"10\" "
                       "text-anchor=\"end\">{:.4g}</text>\n",
                       left - 4, Y(v) + 3, v);
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">week {} .. {}</text>\n",
                     left, height - 10, w_lo, w_hi);

  auto polyline = [&](const std::vector<std::pair<int, double>>& pts, const char* color, double stroke,
                      double opacity) {
    std::string s = fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-opacity=\"{}\" "
                                "points=\"",
                                color, stroke, opacity);
    for (const auto& [w, v] : pts) s += fmt::format("{:.2f},{:.2f} ", X(w), Y(v));
    return s + "\"/>\n";
  };
  std::vector<std::pair<int, double>> truth_pts(truth.begin(), truth.end());
  svg += polyline(truth_pts, "black", 2.5, 1.0);
  for (std::size_t m = 0; m < model_order.size(); ++m) {
    const char* color = kPalette[m % std::size(kPalette)];
    for (auto& [week, pts] : lines[model_order[m]]) {
      std::sort(pts.begin(), pts.end());
      svg += polyline(pts, color, 1.2, 0.7);
    }
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{}\">{}</text>\n",
                       left + pw + 10, top + 14.0 * (m + 1), color, escape(model_order[m]));
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\">truth</text>\n",
                     left + pw + 10, top);
  return svg + "</svg>\n";
}

}  // namespace epiforge::io
