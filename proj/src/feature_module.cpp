// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/feature_module.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace epiforge::einn {

FeatureNet::FeatureNet(int input_dim, const FeatureNetConfig& config, nn::Rng& rng) {
  if (input_dim < 1) throw DimensionError("FeatureNet: need at least one feature column");
  const int H = config.hidden;
  int in = input_dim;
  for (int l = 0; l < config.layers; ++l) {
    encoder.emplace_back("feature.encoder." + std::to_string(l), in, H, rng);
    in = 2 * H;
  }
  query = nn::Linear("feature.attention.query", 2 * H, 2 * H, rng);
  key = nn::Linear("feature.attention.key", 2 * H, 2 * H, rng);
  decoder_fwd = nn::GruWeights("feature.decoder.fwd", 1, H, rng);
  decoder_bwd = nn::GruWeights("feature.decoder.bwd", 1, H, rng);
  projection = nn::Linear("feature.projection", 2 * H, config.embed_dim, rng);
}

Encoding FeatureNet::encode(Tape& tape, const Matrix& x, const std::vector<bool>& mask) {
  const Eigen::Index T = x.rows();
  if (T < 1) throw DimensionError("FeatureNet::encode: empty sequence");
  if (x.cols() != input_dim()) throw DimensionError("FeatureNet::encode: feature count mismatch");
  if (static_cast<Eigen::Index>(mask.size()) != T) throw DimensionError("FeatureNet::encode: mask length mismatch");
  int valid = 0;
  Matrix keep(1, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    keep(0, t) = mask[static_cast<std::size_t>(t)] ? 1.0 : 0.0;
    valid += mask[static_cast<std::size_t>(t)] ? 1 : 0;
  }
  if (valid == 0) throw DimensionError("FeatureNet::encode: every step is masked");

  Var h = tape.constant(x.transpose());
  for (nn::BiGruLayer& layer : encoder) h = layer.forward(tape, h, mask);

  // Scaled dot-product scores, masked softmax over keys, then the weights
  // averaged over unmasked queries.
  Var q = query.forward(tape, h);
  Var k = key.forward(tape, h);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h.rows()));
  Var scores = ad::matmul(ad::transpose(q), k) * scale;  // T x T
  Matrix shift(T, 1);
  for (Eigen::Index i = 0; i < T; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < T; ++j) {
      if (mask[static_cast<std::size_t>(j)]) m = std::max(m, scores.value()(i, j));
    }
    shift(i, 0) = m;
  }
  Var expd = ad::exp(scores - tape.constant(shift)) * tape.constant(keep);
  Var probs = expd / ad::row_sums(expd);
  Var weights = ad::matmul(tape.constant(keep), probs) / static_cast<double>(valid);

  Encoding out;
  out.hidden = h;
  out.weights = weights;
  out.summary = ad::matmul(h, ad::transpose(weights));
  return out;
}

Dual FeatureNet::decode(Tape& tape, const Var& summary, const Dual& tau) {
  const Eigen::Index H = hidden();
  if (summary.rows() != 2 * H || summary.cols() != 1) throw DimensionError("FeatureNet::decode: bad summary shape");
  Dual f = nn::gru_cell(tape, decoder_fwd, tau, ad::rows(summary, 0, H));
  Dual b = nn::gru_cell(tape, decoder_bwd, tau, ad::rows(summary, H, H));
  return projection.forward(tape, ad::concat_rows({f, b}));
}

void FeatureNet::collect(nn::ParamList& out) {
  for (nn::BiGruLayer& l : encoder) l.collect(out);
  query.collect(out);
  key.collect(out);
  decoder_fwd.collect(out);
  decoder_bwd.collect(out);
  projection.collect(out);
}

Var loss_emb(const Var& e, const Var& e_feature) { return mean_column_sq(e - e_feature); }

Var loss_ode_feature(const Physics& physics, Phase phase, nn::Mlp& head, const Var& e_feature, const Var& de_dtau,
                     const Var& omega) {
  if (phase != Phase::Two) {
    throw ContractError("loss_ode_feature: the gradient-matching loss is only defined once embeddings are aligned");
  }
  Tape& tape = e_feature.tape();
  Dual s = head.forward(tape, Dual(e_feature, de_dtau));
  return mean_column_sq(ode_residual(physics, s, omega));
}

Var loss_data_feature(const Physics& physics, const Var& feature_states, const Var& omega, const Matrix& target) {
  return mse(observable(physics, feature_states, omega), target);
}

Var loss_output_kd(const Var& states, const Var& feature_states) { return mean_column_sq(states - feature_states); }

}  // namespace epiforge::einn
