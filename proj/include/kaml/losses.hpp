// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Batch losses: masked binary cross-entropy, its dynamically averaged form
// (per-task normalization by the task's valid-sample count in the batch), the
// filtered pairwise ranking loss over confirmed positives vs zero-labeled
// samples, and the joint objective gamma * BCE + (1 - gamma) * Ranking.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "kaml/engine.hpp"

namespace kaml {

struct LossConfig {
  double gamma = 0.7;          // BCE / ranking balance
  std::vector<double> beta;    // per-task ranking weights, default 1
  int pair_cap = 10000;        // max ranking pairs per (batch, task)
  bool use_ranking = true;

  void validate(int n_actions);
};

// Batch views: row-major (batch_size x n_actions) flat arrays.
struct BatchView {
  size_t n = 0;
  int n_actions = 0;
  const double* logits = nullptr;
  const double* probs = nullptr;
  const uint8_t* labels = nullptr;
  const uint8_t* mask = nullptr;

  size_t idx(size_t i, int j) const { return i * n_actions + j; }
};

struct BceResult {
  double mean = 0.0;                 // (1/|D|) * sum of masked cross-entropies
  std::vector<double> task_sums;     // per-task masked CE sums
  std::vector<long> task_counts;     // per-task valid-sample counts
};

// Cross-entropy summed over entries with mask = 1; masked-out entries
// contribute exactly zero. Probabilities are clamped to [1e-12, 1 - 1e-12].
BceResult masked_bce(const BatchView& b);

// Per-task mean over the task's valid samples, summed across tasks; a task
// with no valid sample in the batch contributes zero.
double dynamic_average_bce(const BatchView& b);

// Valid ranking pairs per task: (positive, negative) index pairs with
// observed label 1 vs 0, uniformly subsampled beyond the per-task cap.
// Depends on labels only, never on scores.
struct RankingPairs {
  std::vector<std::vector<std::pair<int, int>>> per_task;
  long total = 0;
};

RankingPairs build_ranking_pairs(const uint8_t* labels, size_t n, int n_actions,
                                 int pair_cap, std::mt19937_64& rng);

// Per-pair loss -log(sigmoid(s_pos - s_neg)) weighted beta_k, normalized by
// the batch's total valid-pair count (0-safe).
double ranking_loss(const double* logits, size_t n, int n_actions,
                    const RankingPairs& pairs, const std::vector<double>& beta);

// Adds `scale` times the gradient of ranking_loss to d_logits (same layout).
void add_ranking_grad(const double* logits, size_t n, int n_actions,
                      const RankingPairs& pairs, const std::vector<double>& beta,
                      double scale, double* d_logits);

struct BatchLossReport {
  double total = 0.0;
  double bce = 0.0;      // dynamic-average BCE term
  double ranking = 0.0;
  std::vector<double> task_bce;
  std::vector<long> task_valid;
  long pair_count = 0;
};

// Joint objective; also fills d_logits (batch x n_actions) with
// dTotal/dLogit when d_logits != nullptr.
BatchLossReport joint_loss(const BatchView& b, const RankingPairs& pairs,
                           const LossConfig& cfg, double* d_logits = nullptr);

}  // namespace kaml
