// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Weighted loss assembly and the two-phase schedule: joint training of both
// modules, then head-and-parameter training with the gradient-matching ODE
// loss once the embeddings agree.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epiforge/einn.hpp"

namespace epiforge::train {

using einn::Einn;
using einn::Phase;
using einn::Problem;
using ad::Matrix;

struct LossWeights {
  double ode = 10.0;
  double mono = 10.0;
  double param = 0.001;
  double helper = 0.1;
  double data_time = 1.0;
  double data_feature = 1.0;
  double emb = 1.0;
  double output = 1.0;
  double ode_feature = 10.0;

  void validate() const;
  /// (name, weight) in log order.
  std::vector<std::pair<std::string, double>> named() const;
};

enum class ExtendPolicy { ExtendOnce, Abort };

struct TrainPlan {
  int epochs_phase1 = 1500;
  int epochs_phase2 = 1500;
  double emb_threshold = 1e-2;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// False gives the ablation without embedding alignment and without the
  /// feature ODE loss.
  bool gradient_matching = true;
  ExtendPolicy policy = ExtendPolicy::ExtendOnce;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  int phase = 1;
  std::vector<std::pair<std::string, double>> terms;
  double total = 0.0;
  double wall_ms = 0.0;
};

/// Gap between the chain-rule derivative (ds^F/de^F)(de/dt) and the true
/// ds^F/dt, with its bound |J| * |de/dt - de^F/dt|, maxima over days.
struct GradientTrickGap {
  double max_gap = 0.0;
  double max_bound = 0.0;
  bool finite = true;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  double embedding_gap = 0.0;
  bool extended = false;
  GradientTrickGap gap;
};

/// Phase-two inputs that do not change once everything before the
/// embeddings is frozen.
struct FrozenEmbeddings {
  Matrix e;
  Matrix de_dtau;
  Matrix e_feature;
};

struct LossTerms {
  std::vector<std::pair<std::string, ad::Var>> terms;
  ad::Var total;
};

/// Builds every term for one step on `tape`. Terms with zero weight are still
/// built so they can be logged. With `frozen`, the embeddings are taken from
/// it instead of being recomputed.
LossTerms build_losses(ad::Tape& tape, Einn& model, const Problem& problem, const LossWeights& weights, Phase phase,
                       bool gradient_matching, const FrozenEmbeddings* frozen = nullptr);

FrozenEmbeddings freeze_embeddings(Einn& model, const Problem& problem);

/// Mean embedding gap over the training days.
double embedding_gap(Einn& model, const Problem& problem);

std::vector<EpochRecord> train_phase1(Einn& model, const Problem& problem, const LossWeights& weights,
                                      const TrainPlan& plan, int epochs, std::ostream* log = nullptr,
                                      int first_epoch = 0);

/// Freezes the trunk and the feature module up to e^F, trains the head and
/// the parameter table, and restores the freeze flags afterwards. Throws
/// ContractError if gradient matching is on and the embedding gap is not
/// below the plan's threshold.
std::vector<EpochRecord> train_phase2(Einn& model, const Problem& problem, const LossWeights& weights,
                                      const TrainPlan& plan, int epochs, std::ostream* log = nullptr,
                                      int first_epoch = 0);

GradientTrickGap gradient_trick_gap(Einn& model, const Problem& problem);

/// Both phases with the plan's extension policy.
TrainReport train_einn(Einn& model, const Problem& problem, const LossWeights& weights, const TrainPlan& plan,
                       std::ostream* log = nullptr);

/// One JSON object per line: epoch, phase, terms, weights, total, wall_ms.
void write_epoch(std::ostream& out, const EpochRecord& record, const LossWeights& weights);

}  // namespace epiforge::train
