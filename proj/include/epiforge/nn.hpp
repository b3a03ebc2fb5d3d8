// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Layers built on the tape: dense layers, tanh MLPs, GRUs.
// All layers take column-batched inputs (features x batch).

#include <random>
#include <string>
#include <vector>

#include "epiforge/autodiff.hpp"

namespace epiforge::nn {

using ad::Dual;
using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

using Rng = std::mt19937_64;

/// Parameters are exposed as a flat list of pointers into the owning layer.
using ParamList = std::vector<Parameter*>;

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng);

  Dual forward(Tape& tape, const Dual& x);
  Var forward(Tape& tape, const Var& x) { return forward(tape, Dual(x)).value; }
  void collect(ParamList& out);

  int in() const { return static_cast<int>(weight.value.cols()); }
  int out() const { return static_cast<int>(weight.value.rows()); }

  Parameter weight;
  Parameter bias;
};

/// Stack of dense layers with tanh between them. `sizes` lists layer widths
/// including the input, e.g. {40, 40, 40, 20} is three dense layers.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<int>& sizes, bool activate_last, Rng& rng);

  Dual forward(Tape& tape, const Dual& x);
  Var forward(Tape& tape, const Var& x) { return forward(tape, Dual(x)).value; }
  void collect(ParamList& out);

  std::vector<Linear> layers;
  bool activate_last = false;
};

/// Parameters of one GRU direction (gate order r, z, n as in cuDNN/PyTorch).
struct GruWeights {
  GruWeights() = default;
  GruWeights(const std::string& name, int input, int hidden, Rng& rng);
  void collect(ParamList& out);
  int hidden() const { return static_cast<int>(w_hh.value.cols()); }
  int input() const { return static_cast<int>(w_ih.value.cols()); }

  Parameter w_ih;  // 3H x D
  Parameter w_hh;  // 3H x H
  Parameter b_ih;  // 3H x 1
  Parameter b_hh;  // 3H x 1
};

/// Runs one GRU direction over the columns of `x` (D x T) from a zero state
/// as a single fused tape node. Masked steps are skipped: the hidden state
/// carries through unchanged. Returns H x T hidden states.
Var gru_sequence(Tape& tape, const Var& x, GruWeights& w, const std::vector<bool>& mask, bool reverse);

/// Reference GRU step on plain matrices; used by the fused op and tests.
Eigen::VectorXd gru_step(const GruWeights& w, const Eigen::VectorXd& x, const Eigen::VectorXd& h);

class BiGruLayer {
 public:
  BiGruLayer() = default;
  BiGruLayer(const std::string& name, int input, int hidden, Rng& rng);

  /// D x T -> 2H x T (forward states on top).
  Var forward(Tape& tape, const Var& x, const std::vector<bool>& mask);
  void collect(ParamList& out);

  GruWeights forward_dir;
  GruWeights backward_dir;
};

/// One GRU step from an explicit hidden state, composed from tape primitives
/// so that tangents propagate. `h` is H x 1 (broadcast) or H x n.
Dual gru_cell(Tape& tape, GruWeights& w, const Dual& x, const Var& h);

}  // namespace epiforge::nn
