// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Run configuration: a JSON document with sections data, model, losses,
// train and eval. Unknown keys are rejected so typos surface as errors.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "epiforge/baselines.hpp"
#include "epiforge/dataset.hpp"
#include "epiforge/synthetic.hpp"
#include "epiforge/trainer.hpp"

namespace epiforge::cfg {

struct RegionSettings {
  double population = 0.0;
  /// Required in flu mode; no default.
  double outpatient_ratio = 0.0;
};

struct DataSettings {
  /// CSV input; empty when `synthetic_seed` is set.
  std::string csv;
  data::CsvSchema schema;
  data::TargetMode mode = data::TargetMode::Covid;
  ode::ModelKind model = ode::ModelKind::Seirm;
  std::map<std::string, RegionSettings> regions;
  /// Generate the two-regime synthetic world instead of reading a CSV.
  std::optional<std::uint64_t> synthetic_seed;
};

struct ModelSettings {
  einn::EinnConfig einn;
  base::RnnConfig rnn;
  bool collocate_horizon = true;
  int ar_lags = 4;
  int lasso_lags = 4;
  double lasso_lambda = 0.01;
  int calibration_restarts = 2;
  double calibration_proximal = 1e-2;
};

struct EvalSettings {
  int first_week = 8;
  int last_week = 17;
  int horizon = 8;
  std::vector<std::string> models{"EINN", "Persistence", "MechanisticOnly"};
  int jobs = 1;
};

struct Config {
  DataSettings data;
  ModelSettings model;
  train::LossWeights losses;
  train::TrainPlan train;
  EvalSettings eval;
  std::string out_dir = "out";

  /// Cross-field checks; throws ConfigError.
  void validate() const;
  /// Region settings or ConfigError naming the missing field.
  const RegionSettings& region(const std::string& name) const;
};

Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);
nlohmann::json to_json(const Config& config);

/// Loads the configured regions (CSV or synthetic), restricted to `only`
/// when non-empty. Every returned dataset has its population filled in.
std::vector<data::RegionDataset> load_regions(const Config& config, const std::vector<std::string>& only = {});

/// Sets a dotted key (e.g. "losses.ode") in a JSON config document.
void set_path(nlohmann::json& doc, const std::string& dotted, const nlohmann::json& value);

}  // namespace epiforge::cfg
