// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace epiforge::cfg {

using nlohmann::json;

namespace {

/// Reads keys from one object and rejects any it was not asked about.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
    obj_ = &doc;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    return &obj_->at(key);
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.count(key)) throw ConfigError("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json* obj_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

const json& member(const json& j, const char* key) {
  static const json null;
  return j.contains(key) ? j.at(key) : null;
}

std::string policy_name(train::ExtendPolicy p) { return p == train::ExtendPolicy::Abort ? "abort" : "extend_once"; }

}  // namespace

Config parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  Config c;
  Section top(j, "config");
  for (const char* s : {"data", "model", "losses", "train", "eval"}) top.raw(s);
  top.get("out_dir", c.out_dir);
  top.finish();

  Section d(member(j, "data"), "data");
  d.get("csv", c.data.csv);
  d.get("date_column", c.data.schema.date_column);
  d.get("region_column", c.data.schema.region_column);
  d.get("target_column", c.data.schema.target_column);
  d.get("feature_columns", c.data.schema.feature_columns);
  std::string mode = data::to_string(c.data.mode);
  d.get("mode", mode);
  c.data.mode = data::target_mode_from_string(mode);
  std::string model = ode::to_string(c.data.model);
  d.get("model", model);
  c.data.model = ode::model_kind_from_string(model);
  if (const json* seed = d.raw("synthetic_seed")) c.data.synthetic_seed = seed->get<std::uint64_t>();
  if (const json* regions = d.raw("regions")) {
    if (!regions->is_object()) throw ConfigError("config: data.regions must be an object");
    for (const auto& [name, value] : regions->items()) {
      Section r(value, "data.regions." + name);
      RegionSettings rs;
      r.get("population", rs.population);
      r.get("outpatient_ratio", rs.outpatient_ratio);
      r.finish();
      c.data.regions[name] = rs;
    }
  }
  d.finish();

  Section m(member(j, "model"), "model");
  m.get("fourier_rows", c.model.einn.time.fourier_rows);
  m.get("fourier_sigma", c.model.einn.time.fourier_sigma);
  m.get("trunk", c.model.einn.time.trunk);
  m.get("head_hidden", c.model.einn.time.head_hidden);
  m.get("feature_hidden", c.model.einn.feature.hidden);
  m.get("feature_layers", c.model.einn.feature.layers);
  m.get("embed_dim", c.model.einn.feature.embed_dim);
  m.get("rnn_epochs", c.model.rnn.epochs);
  m.get("rnn_lr", c.model.rnn.lr);
  m.get("regularization_weight", c.model.rnn.ode_weight);
  m.get("collocate_horizon", c.model.collocate_horizon);
  m.get("ar_lags", c.model.ar_lags);
  m.get("lasso_lags", c.model.lasso_lags);
  m.get("lasso_lambda", c.model.lasso_lambda);
  m.get("calibration_restarts", c.model.calibration_restarts);
  m.get("calibration_proximal", c.model.calibration_proximal);
  m.finish();
  c.model.rnn.net = c.model.einn.feature;
  c.model.rnn.head_hidden = c.model.einn.time.head_hidden;

  Section l(member(j, "losses"), "losses");
  l.get("ode", c.losses.ode);
  l.get("mono", c.losses.mono);
  l.get("param", c.losses.param);
  l.get("helper", c.losses.helper);
  l.get("data_time", c.losses.data_time);
  l.get("data_feature", c.losses.data_feature);
  l.get("emb", c.losses.emb);
  l.get("output", c.losses.output);
  l.get("ode_feature", c.losses.ode_feature);
  l.finish();

  Section t(member(j, "train"), "train");
  t.get("epochs_phase1", c.train.epochs_phase1);
  t.get("epochs_phase2", c.train.epochs_phase2);
  t.get("emb_threshold", c.train.emb_threshold);
  t.get("lr", c.train.lr);
  t.get("seed", c.train.seed);
  t.get("gradient_matching", c.train.gradient_matching);
  std::string policy = policy_name(c.train.policy);
  t.get("extend_policy", policy);
  if (policy == "extend_once") {
    c.train.policy = train::ExtendPolicy::ExtendOnce;
  } else if (policy == "abort") {
    c.train.policy = train::ExtendPolicy::Abort;
  } else {
    throw ConfigError("config: train.extend_policy must be 'extend_once' or 'abort'");
  }
  t.finish();

  Section e(member(j, "eval"), "eval");
  e.get("first_week", c.eval.first_week);
  e.get("last_week", c.eval.last_week);
  e.get("horizon", c.eval.horizon);
  e.get("models", c.eval.models);
  e.get("jobs", c.eval.jobs);
  e.finish();

  c.validate();
  return c;
}

void Config::validate() const {
  losses.validate();
  train.validate();
  if (data.csv.empty() && !data.synthetic_seed) throw ConfigError("config: data.csv or data.synthetic_seed is required");
  if (data.synthetic_seed && (data.model != ode::ModelKind::Seirm || data.mode != data::TargetMode::Covid)) {
    throw ConfigError("config: the synthetic world is a SEIRM death series (model seirm, mode covid)");
  }
  if (eval.horizon < 1) throw ConfigError("config: eval.horizon must be at least 1");
  if (eval.first_week < 1 || eval.last_week < eval.first_week) throw ConfigError("config: bad eval week range");
  if (eval.jobs < 1) throw ConfigError("config: eval.jobs must be at least 1");
  if (model.ar_lags < 1 || model.lasso_lags < 1) throw ConfigError("config: lag counts must be at least 1");
  if (model.lasso_lambda < 0.0) throw ConfigError("config: model.lasso_lambda must be non-negative");
  if (model.rnn.epochs < 1) throw ConfigError("config: model.rnn_epochs must be at least 1");
  for (const auto& [name, r] : data.regions) {
    if (!(r.population > 0.0)) throw ConfigError("config: region '" + name + "' needs a positive population");
    if (data.mode == data::TargetMode::Flu && !(r.outpatient_ratio > 0.0 && r.outpatient_ratio <= 1.0)) {
      throw ConfigError("config: region '" + name + "' needs an outpatient_ratio in (0, 1] in flu mode");
    }
  }
}

const RegionSettings& Config::region(const std::string& name) const {
  auto it = data.regions.find(name);
  if (it == data.regions.end()) throw ConfigError("config: missing population for region '" + name + "'");
  return it->second;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const Config& c) {
  json j;
  json& d = j["data"];
  if (!c.data.csv.empty()) d["csv"] = c.data.csv;
  if (c.data.synthetic_seed) d["synthetic_seed"] = *c.data.synthetic_seed;
  d["date_column"] = c.data.schema.date_column;
  d["region_column"] = c.data.schema.region_column;
  d["target_column"] = c.data.schema.target_column;
  d["feature_columns"] = c.data.schema.feature_columns;
  d["mode"] = data::to_string(c.data.mode);
  d["model"] = ode::to_string(c.data.model);
  d["regions"] = json::object();
  for (const auto& [name, r] : c.data.regions) {
    d["regions"][name] = {{"population", r.population}, {"outpatient_ratio", r.outpatient_ratio}};
  }
  j["model"] = {{"fourier_rows", c.model.einn.time.fourier_rows},
                {"fourier_sigma", c.model.einn.time.fourier_sigma},
                {"trunk", c.model.einn.time.trunk},
                {"head_hidden", c.model.einn.time.head_hidden},
                {"feature_hidden", c.model.einn.feature.hidden},
                {"feature_layers", c.model.einn.feature.layers},
                {"embed_dim", c.model.einn.feature.embed_dim},
                {"rnn_epochs", c.model.rnn.epochs},
                {"rnn_lr", c.model.rnn.lr},
                {"regularization_weight", c.model.rnn.ode_weight},
                {"collocate_horizon", c.model.collocate_horizon},
                {"ar_lags", c.model.ar_lags},
                {"lasso_lags", c.model.lasso_lags},
                {"lasso_lambda", c.model.lasso_lambda},
                {"calibration_restarts", c.model.calibration_restarts},
                {"calibration_proximal", c.model.calibration_proximal}};
  j["losses"] = json::object();
  for (const auto& [name, w] : c.losses.named()) j["losses"][name] = w;
  j["train"] = {{"epochs_phase1", c.train.epochs_phase1}, {"epochs_phase2", c.train.epochs_phase2},
                {"emb_threshold", c.train.emb_threshold}, {"lr", c.train.lr},
                {"seed", c.train.seed},                   {"gradient_matching", c.train.gradient_matching},
                {"extend_policy", policy_name(c.train.policy)}};
  j["eval"] = {{"first_week", c.eval.first_week},
               {"last_week", c.eval.last_week},
               {"horizon", c.eval.horizon},
               {"models", c.eval.models},
               {"jobs", c.eval.jobs}};
  j["out_dir"] = c.out_dir;
  return j;
}

std::vector<data::RegionDataset> load_regions(const Config& config, const std::vector<std::string>& only) {
  std::vector<data::RegionDataset> all;
  if (config.data.synthetic_seed) {
    all.push_back(data::make_synthetic_world(data::two_regime_world(*config.data.synthetic_seed)).dataset);
  } else {
    all = data::load_csv(config.data.csv, config.data.schema);
  }
  std::vector<data::RegionDataset> out;
  for (data::RegionDataset& ds : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), ds.region) == only.end()) continue;
    auto it = config.data.regions.find(ds.region);
    if (it != config.data.regions.end()) {
      ds.population = it->second.population;
    } else if (!config.data.synthetic_seed) {
      throw ConfigError("config: missing population for region '" + ds.region + "'");
    }
    if (config.data.mode == data::TargetMode::Flu &&
        (it == config.data.regions.end() || !(it->second.outpatient_ratio > 0.0))) {
      throw ConfigError("config: missing outpatient_ratio for region '" + ds.region + "'");
    }
    out.push_back(std::move(ds));
  }
  for (const std::string& name : only) {
    if (std::none_of(out.begin(), out.end(), [&](const auto& ds) { return ds.region == name; })) {
      throw ConfigError("config: region '" + name + "' is not in the data");
    }
  }
  return out;
}

void set_path(json& doc, const std::string& dotted, const json& value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("config: bad key path '" + dotted + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace epiforge::cfg
