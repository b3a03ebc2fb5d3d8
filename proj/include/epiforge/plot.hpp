// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "epiforge/metrics.hpp"

namespace epiforge::io {

/// Forecast-vs-truth line plot for one region as a standalone SVG: the
/// truth over target weeks in black, each model's K-week trajectory from
/// every prediction week in its own color.
std::string forecast_svg(const std::string& region, const std::vector<eval::ForecastRecord>& records,
                         int width = 800, int height = 420);

}  // namespace epiforge::io
