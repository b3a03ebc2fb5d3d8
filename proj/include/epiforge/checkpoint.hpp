// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// JSON checkpoints: every named parameter array of a trained model plus the
// Fourier matrix B and the normalization constants needed to reuse it.

#include <map>
#include <string>

#include <json.hpp>

#include "epiforge/dataset.hpp"
#include "epiforge/einn.hpp"

namespace epiforge::io {

struct Checkpoint {
  ode::ModelKind kind = ode::ModelKind::Seirm;
  einn::Physics physics;
  int train_days = 0;
  int horizon_days = 0;
  ad::Matrix fourier_b;
  std::map<std::string, ad::Matrix> params;
  data::Scaler scaler;
};

Checkpoint make_checkpoint(einn::Einn& model, const einn::Problem& problem, const data::Scaler& scaler);
nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Copies parameter values and B into `model`. Throws SchemaError on a
/// missing name or a shape mismatch.
void restore(einn::Einn& model, const Checkpoint& ckpt);

}  // namespace epiforge::io
