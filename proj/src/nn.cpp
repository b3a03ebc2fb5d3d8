// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/nn.hpp"

#include <cmath>
#include <memory>

namespace epiforge::nn {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng)
    : weight(name + ".weight", uniform_matrix(out, in, std::sqrt(6.0 / (in + out)), rng)),
      bias(name + ".bias", Matrix::Zero(out, 1)) {}

Dual Linear::forward(Tape& tape, const Dual& x) {
  return ad::matmul(tape.param(weight), x) + tape.param(bias);
}

void Linear::collect(ParamList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Mlp::Mlp(const std::string& name, const std::vector<int>& sizes, bool activate_last_, Rng& rng)
    : activate_last(activate_last_) {
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers.emplace_back(name + "." + std::to_string(i), sizes[i], sizes[i + 1], rng);
  }
}

Dual Mlp::forward(Tape& tape, const Dual& x) {
  Dual h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(tape, h);
    if (i + 1 < layers.size() || activate_last) h = ad::tanh(h);
  }
  return h;
}

void Mlp::collect(ParamList& out) {
  for (Linear& l : layers) l.collect(out);
}

GruWeights::GruWeights(const std::string& name, int input, int hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_ih = Parameter(name + ".w_ih", uniform_matrix(3 * hidden, input, bound, rng));
  w_hh = Parameter(name + ".w_hh", uniform_matrix(3 * hidden, hidden, bound, rng));
  b_ih = Parameter(name + ".b_ih", uniform_matrix(3 * hidden, 1, bound, rng));
  b_hh = Parameter(name + ".b_hh", uniform_matrix(3 * hidden, 1, bound, rng));
}

void GruWeights::collect(ParamList& out) {
  out.push_back(&w_ih);
  out.push_back(&w_hh);
  out.push_back(&b_ih);
  out.push_back(&b_hh);
}

namespace {

Eigen::ArrayXd logistic(const Eigen::ArrayXd& x) { return 1.0 / (1.0 + (-x).exp()); }

struct StepCache {
  Eigen::VectorXd h_prev;
  Eigen::ArrayXd r, z, n, hn;  // hn = W_hn h + b_hn
};

}  // namespace

Eigen::VectorXd gru_step(const GruWeights& w, const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  const Eigen::Index H = h.size();
  Eigen::VectorXd gi = w.w_ih.value * x + w.b_ih.value;
  Eigen::VectorXd gh = w.w_hh.value * h + w.b_hh.value;
  Eigen::ArrayXd r = logistic(gi.segment(0, H).array() + gh.segment(0, H).array());
  Eigen::ArrayXd z = logistic(gi.segment(H, H).array() + gh.segment(H, H).array());
  Eigen::ArrayXd n = (gi.segment(2 * H, H).array() + r * gh.segment(2 * H, H).array()).tanh();
  return ((1.0 - z) * n + z * h.array()).matrix();
}

Var gru_sequence(Tape& tape, const Var& x, GruWeights& w, const std::vector<bool>& mask, bool reverse) {
  const Eigen::Index T = x.cols();
  const Eigen::Index H = w.hidden();
  if (x.rows() != w.input()) throw DimensionError("gru_sequence: input rows do not match w_ih");
  if (static_cast<Eigen::Index>(mask.size()) != T) throw DimensionError("gru_sequence: mask length mismatch");

  Var wih = tape.param(w.w_ih);
  Var whh = tape.param(w.w_hh);
  Var bih = tape.param(w.b_ih);
  Var bhh = tape.param(w.b_hh);

  const Matrix& X = x.value();
  const Matrix& Wih = w.w_ih.value;
  const Matrix& Whh = w.w_hh.value;
  Matrix gi_all = Wih * X;
  gi_all.colwise() += w.b_ih.value.col(0);

  Matrix out(H, T);
  auto cache = std::make_shared<std::vector<StepCache>>(static_cast<std::size_t>(T));
  Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    StepCache& c = (*cache)[static_cast<std::size_t>(t)];
    c.h_prev = h;
    if (mask[static_cast<std::size_t>(t)]) {
      Eigen::VectorXd gh = Whh * h + w.b_hh.value.col(0);
      auto gi = gi_all.col(t);
      c.r = logistic(gi.segment(0, H).array() + gh.segment(0, H).array());
      c.z = logistic(gi.segment(H, H).array() + gh.segment(H, H).array());
      c.hn = gh.segment(2 * H, H).array();
      c.n = (gi.segment(2 * H, H).array() + c.r * c.hn).tanh();
      h = ((1.0 - c.z) * c.n + c.z * h.array()).matrix();
    }
    out.col(t) = h;
  }

  auto backward = [cache, X, Wih, Whh, mask, reverse, T, H](const Matrix& adj, std::span<Matrix* const> in) {
    Matrix& dX = *in[0];
    Matrix& dWih = *in[1];
    Matrix& dWhh = *in[2];
    Matrix& dbih = *in[3];
    Matrix& dbhh = *in[4];
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd gi(3 * H);
    Eigen::VectorXd gh(3 * H);
    for (Eigen::Index s = T - 1; s >= 0; --s) {
      const Eigen::Index t = reverse ? T - 1 - s : s;
      const StepCache& c = (*cache)[static_cast<std::size_t>(t)];
      Eigen::VectorXd dh = adj.col(t) + dh_next;
      if (!mask[static_cast<std::size_t>(t)]) {
        dh_next = dh;
        continue;
      }
      Eigen::ArrayXd dn = dh.array() * (1.0 - c.z);
      Eigen::ArrayXd dz = dh.array() * (c.h_prev.array() - c.n);
      Eigen::ArrayXd dpre_n = dn * (1.0 - c.n.square());
      Eigen::ArrayXd dpre_r = dpre_n * c.hn * c.r * (1.0 - c.r);
      Eigen::ArrayXd dpre_z = dz * c.z * (1.0 - c.z);
      gi << dpre_r.matrix(), dpre_z.matrix(), dpre_n.matrix();
      gh << dpre_r.matrix(), dpre_z.matrix(), (dpre_n * c.r).matrix();
      dWih.noalias() += gi * X.col(t).transpose();
      dbih += gi;
      dX.col(t).noalias() += Wih.transpose() * gi;
      dWhh.noalias() += gh * c.h_prev.transpose();
      dbhh += gh;
      dh_next = (dh.array() * c.z).matrix() + Whh.transpose() * gh;
    }
  };
  return tape.custom({x, wih, whh, bih, bhh}, std::move(out), std::move(backward),
                     reverse ? "gru_sequence(reverse)" : "gru_sequence");
}

BiGruLayer::BiGruLayer(const std::string& name, int input, int hidden, Rng& rng)
    : forward_dir(name + ".fwd", input, hidden, rng), backward_dir(name + ".bwd", input, hidden, rng) {}

Var BiGruLayer::forward(Tape& tape, const Var& x, const std::vector<bool>& mask) {
  Var f = gru_sequence(tape, x, forward_dir, mask, false);
  Var b = gru_sequence(tape, x, backward_dir, mask, true);
  return ad::concat_rows({f, b});
}

void BiGruLayer::collect(ParamList& out) {
  forward_dir.collect(out);
  backward_dir.collect(out);
}

Dual gru_cell(Tape& tape, GruWeights& w, const Dual& x, const Var& h) {
  const Eigen::Index H = w.hidden();
  Dual gi = ad::matmul(tape.param(w.w_ih), x) + tape.param(w.b_ih);
  Var gh = ad::matmul(tape.param(w.w_hh), h) + tape.param(w.b_hh);
  Dual r = ad::sigmoid(ad::rows(gi, 0, H) + ad::rows(gh, 0, H));
  Dual z = ad::sigmoid(ad::rows(gi, H, H) + ad::rows(gh, H, H));
  Dual n = ad::tanh(ad::rows(gi, 2 * H, H) + r * Dual(ad::rows(gh, 2 * H, H)));
  // h' = n + z * (h - n)
  return n + z * (Dual(h) - n);
}

}  // namespace epiforge::nn
