// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// JSON and CSV forms of calibration results, forecast records and score
// tables. Doubles are written with round-trip precision.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "epiforge/calibration.hpp"
#include "epiforge/metrics.hpp"

namespace epiforge::io {

nlohmann::json to_json(const calib::CalibrationResult& result);
calib::CalibrationResult calibration_from_json(const nlohmann::json& j);

nlohmann::json to_json(const eval::ForecastRecord& record);
eval::ForecastRecord record_from_json(const nlohmann::json& j);

/// One record per line.
void write_records(std::ostream& out, const std::vector<eval::ForecastRecord>& records);
std::vector<eval::ForecastRecord> read_records(std::istream& in);
std::vector<eval::ForecastRecord> read_records_file(const std::string& path);

/// Undefined metrics become null in JSON and "NaN" in CSV.
nlohmann::json to_json(const eval::ScoreTable& table);
void write_scores_csv(std::ostream& out, const eval::ScoreTable& table);

/// Writes `text` to `path`, creating parent directories.
void write_file(const std::string& path, const std::string& text);

}  // namespace epiforge::io
