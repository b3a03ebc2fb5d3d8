// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/serialization.hpp"

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

namespace epiforge::io {

using nlohmann::json;

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json metric(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const calib::CalibrationResult& r) {
  json j;
  j["model"] = ode::to_string(r.kind);
  j["window_days"] = r.window_days;
  j["initial_state"] = vec(r.initial_state);
  j["schedule"] = json::array();
  for (const ode::Params& p : r.schedule) j["schedule"].push_back(vec(p));
  j["fit_loss"] = r.fit_loss;
  return j;
}

calib::CalibrationResult calibration_from_json(const json& j) {
  try {
    calib::CalibrationResult r;
    r.kind = ode::model_kind_from_string(j.at("model").get<std::string>());
    r.window_days = j.at("window_days").get<int>();
    r.initial_state = vec_from(j.at("initial_state"));
    for (const json& p : j.at("schedule")) r.schedule.push_back(vec_from(p));
    r.fit_loss = j.at("fit_loss").get<double>();
    if (r.initial_state.size() != ode::state_dim(r.kind)) throw SchemaError("calibration: wrong state length");
    const ode::ParamBounds bounds = ode::ParamBounds::defaults(r.kind);
    for (const ode::Params& p : r.schedule) {
      if (static_cast<std::size_t>(p.size()) != bounds.size()) throw SchemaError("calibration: wrong parameter length");
    }
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("calibration: ") + e.what());
  }
}

json to_json(const eval::ForecastRecord& r) {
  json j;
  j["region"] = r.region;
  j["model"] = r.model;
  j["week"] = r.week;
  j["horizon"] = r.horizon;
  j["predicted"] = r.predicted;
  j["truth"] = r.truth;
  j["beyond_range"] = r.beyond_range;
  return j;
}

eval::ForecastRecord record_from_json(const json& j) {
  try {
    eval::ForecastRecord r;
    r.region = j.at("region").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.week = j.at("week").get<int>();
    r.horizon = j.at("horizon").get<int>();
    r.predicted = j.at("predicted").get<double>();
    r.truth = j.at("truth").get<double>();
    r.beyond_range = j.value("beyond_range", false);
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("forecast record: ") + e.what());
  }
}

void write_records(std::ostream& out, const std::vector<eval::ForecastRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<eval::ForecastRecord> read_records(std::istream& in) {
  std::vector<eval::ForecastRecord> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw SchemaError("forecast records line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<eval::ForecastRecord> read_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open forecast file '" + path + "'");
  return read_records(in);
}

json to_json(const eval::ScoreTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"model", r.model},
                    {"region", r.region.empty() ? json(nullptr) : json(r.region)},
                    {"nr1_short", metric(r.nr1_short)},
                    {"nr2_short", metric(r.nr2_short)},
                    {"nd_short", metric(r.nd_short)},
                    {"nr1_long", metric(r.nr1_long)},
                    {"nr2_long", metric(r.nr2_long)},
                    {"nd_long", metric(r.nd_long)},
                    {"pc", metric(r.pc)},
                    {"records", r.records}});
  }
  return rows;
}

void write_scores_csv(std::ostream& out, const eval::ScoreTable& table) {
  out << "model,region,nr1_short,nr2_short,nd_short,nr1_long,nr2_long,nd_long,pc,records\n";
  for (const auto& r : table.rows) {
    out << r.model << ',' << (r.region.empty() ? "ALL" : r.region) << ',' << eval::format_metric(r.nr1_short) << ','
        << eval::format_metric(r.nr2_short) << ',' << eval::format_metric(r.nd_short) << ','
        << eval::format_metric(r.nr1_long) << ',' << eval::format_metric(r.nr2_long) << ','
        << eval::format_metric(r.nd_long) << ',' << eval::format_metric(r.pc) << ',' << r.records << '\n';
  }
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace epiforge::io
