// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Feature-input recurrent model: a bidirectional GRU encoder with masked
// self-attention pooling, a time-conditioned GRU decoder producing the
// embedding e^F, and the gradient-matching losses that tie it to the time
// module.

#include <vector>

#include "epiforge/nn.hpp"
#include "epiforge/time_module.hpp"

namespace epiforge::einn {

struct FeatureNetConfig {
  int hidden = 32;
  int layers = 2;
  int embed_dim = 20;
};

struct Encoding {
  Var hidden;   // 2H x T
  Var weights;  // 1 x T attention weights, zero on masked steps
  Var summary;  // 2H x 1
};

class FeatureNet {
 public:
  FeatureNet() = default;
  FeatureNet(int input_dim, const FeatureNetConfig& config, nn::Rng& rng);

  /// `x` is T x D_x (scaled); mask[t] false marks padding.
  Encoding encode(Tape& tape, const Matrix& x, const std::vector<bool>& mask);
  /// One decoder step per column of `tau` (1 x n), from hidden state u.
  /// Returns D_e x n.
  Dual decode(Tape& tape, const Var& summary, const Dual& tau);

  void collect(nn::ParamList& out);

  int input_dim() const { return encoder.empty() ? 0 : encoder.front().forward_dir.input(); }
  int hidden() const { return decoder_fwd.hidden(); }

  std::vector<nn::BiGruLayer> encoder;
  nn::Linear query;
  nn::Linear key;
  nn::GruWeights decoder_fwd;
  nn::GruWeights decoder_bwd;
  nn::Linear projection;
};

enum class Phase { One, Two };

/// Mean over days of |e - e^F|^2.
Var loss_emb(const Var& e, const Var& e_feature);

/// Gradient-matching ODE loss. The feature states' time derivative is the
/// head's Jacobian at e^F applied to de/dtau from the time module. Only
/// valid in phase two.
Var loss_ode_feature(const Physics& physics, Phase phase, nn::Mlp& head, const Var& e_feature,
                     const Var& de_dtau, const Var& omega);

Var loss_data_feature(const Physics& physics, const Var& feature_states, const Var& omega, const Matrix& target);

/// Mean over days of |s - s^F|^2.
Var loss_output_kd(const Var& states, const Var& feature_states);

}  // namespace epiforge::einn
