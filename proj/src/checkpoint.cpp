// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/checkpoint.hpp"

#include <fstream>

#include "epiforge/serialization.hpp"

namespace epiforge::io {

using nlohmann::json;

namespace {

json matrix_json(const ad::Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

ad::Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw SchemaError("checkpoint: matrix size mismatch");
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[static_cast<std::size_t>(i * cols + c)];
  }
  return m;
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

Checkpoint make_checkpoint(einn::Einn& model, const einn::Problem& problem, const data::Scaler& scaler) {
  Checkpoint c;
  c.kind = problem.physics.kind;
  c.physics = problem.physics;
  c.train_days = problem.train_days;
  c.horizon_days = problem.horizon_days;
  c.fourier_b = model.time.fourier.b();
  nn::ParamList params;
  model.collect(params);
  for (ad::Parameter* p : params) {
    if (!c.params.emplace(p->name, p->value).second) throw SchemaError("checkpoint: duplicate parameter " + p->name);
  }
  c.scaler = scaler;
  return c;
}

json to_json(const Checkpoint& c) {
  json j;
  j["format"] = "epiforge-checkpoint";
  j["version"] = 1;
  j["model"] = ode::to_string(c.kind);
  j["train_days"] = c.train_days;
  j["horizon_days"] = c.horizon_days;
  j["physics"] = {{"population", c.physics.population},   {"outpatient_ratio", c.physics.outpatient_ratio},
                  {"t0", c.physics.t0},                   {"span", c.physics.span},
                  {"state_scale", vec(c.physics.state_scale)}, {"target_scale", c.physics.target_scale}};
  j["fourier_b"] = matrix_json(c.fourier_b);
  j["scaler"] = {{"mean", vec(c.scaler.mean)},
                 {"stddev", vec(c.scaler.stddev)},
                 {"kept", c.scaler.kept},
                 {"dropped", c.scaler.dropped}};
  json params = json::object();
  for (const auto& [name, m] : c.params) params[name] = matrix_json(m);
  j["params"] = params;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "epiforge-checkpoint") throw SchemaError("checkpoint: unknown format");
    Checkpoint c;
    c.kind = ode::model_kind_from_string(j.at("model").get<std::string>());
    c.train_days = j.at("train_days").get<int>();
    c.horizon_days = j.at("horizon_days").get<int>();
    const json& p = j.at("physics");
    c.physics.kind = c.kind;
    c.physics.population = p.at("population").get<double>();
    c.physics.outpatient_ratio = p.at("outpatient_ratio").get<double>();
    c.physics.t0 = p.at("t0").get<double>();
    c.physics.span = p.at("span").get<double>();
    c.physics.state_scale = vec_from(p.at("state_scale"));
    c.physics.target_scale = p.at("target_scale").get<double>();
    c.fourier_b = matrix_from(j.at("fourier_b"));
    const json& s = j.at("scaler");
    c.scaler.mean = vec_from(s.at("mean"));
    c.scaler.stddev = vec_from(s.at("stddev"));
    c.scaler.kept = s.at("kept").get<std::vector<int>>();
    c.scaler.dropped = s.at("dropped").get<std::vector<int>>();
    for (const auto& [name, m] : j.at("params").items()) c.params[name] = matrix_from(m);
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file(path, to_json(ckpt).dump() + "\n"); }

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

void restore(einn::Einn& model, const Checkpoint& ckpt) {
  if (ckpt.fourier_b.rows() != model.time.fourier.b().rows() || ckpt.fourier_b.cols() != 1) {
    throw SchemaError("checkpoint: Fourier matrix shape differs from the model");
  }
  nn::ParamList params;
  model.collect(params);
  for (ad::Parameter* p : params) {
    auto it = ckpt.params.find(p->name);
    if (it == ckpt.params.end()) throw SchemaError("checkpoint: missing parameter " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw SchemaError("checkpoint: shape mismatch for " + p->name);
    }
  }
  for (ad::Parameter* p : params) p->value = ckpt.params.at(p->name);
  model.time.fourier = einn::FourierMap(ckpt.fourier_b);
}

}  // namespace epiforge::io
