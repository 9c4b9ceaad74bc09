// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch training with Adam, deterministic per seed, plus the ablation
// runner that trains named variant presets across a seed list and averages
// the resulting metrics.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kaml/data.hpp"
#include "kaml/losses.hpp"
#include "kaml/masking.hpp"
#include "kaml/metrics.hpp"
#include "kaml/model.hpp"

namespace kaml {

enum class MaskStrategy { Base, Adm, Observed };

MaskStrategy mask_strategy_from_string(const std::string& s);
std::string mask_strategy_name(MaskStrategy m);

struct AdmConfig {
  std::vector<double> alpha;    // per action; empty = default 10 everywhere
  double alpha_quantile = -1.0; // in [0, 1]: derive alpha from the nonzero
                                // per-task conversion-count quantile instead
  double window_days = -1.0;    // < 0: whole training period
  double horizon_days = 28.0;
};

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 512;
  int epochs = 3;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  Variant variant = Variant::MMoE;
  MaskStrategy mask = MaskStrategy::Base;
  LossConfig loss;
  AdmConfig adm;
  ModelConfig model;  // field_vocab filled from the dataset when empty
  bool eval_every_epoch = true;

  void validate() const;
};

struct AdamState {
  std::vector<Vector> m;
  std::vector<Vector> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void init(const ParamStore& ps);
};

// Standard Adam with bias correction; non-finite gradients abort with the
// offending tensor named.
void adam_step(ParamStore& ps, AdamState& state, double lr);

struct EpochStats {
  int epoch = 0;
  double total_loss = 0.0;
  double bce = 0.0;
  double ranking = 0.0;
  long pair_count = 0;
  MetricsReport test;
};

struct RunHistory {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
};

struct TrainResult {
  CvrModel model;
  RunHistory history;
};

MaskMatrix build_mask(const Dataset& ds, MaskStrategy strategy, const AdmConfig& adm);

TrainResult train(const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                  uint64_t seed);

// Ablation grid: a named preset per row. "kaml" = mmoe_hke + adm + ranking.
struct VariantPreset {
  std::string name;
  Variant variant;
  MaskStrategy mask;
  bool use_ranking;
};

VariantPreset preset_from_name(const std::string& name);
std::vector<std::string> default_ablation_grid();

struct AblationCell {
  std::optional<double> mean;
  double stddev = 0.0;
};

struct AblationRow {
  std::string name;
  std::vector<AblationCell> action_auc;
  std::vector<AblationCell> action_logloss;
  AblationCell overall_auc;
  AblationCell overall_logloss;
  std::vector<MetricsReport> per_seed;
};

std::vector<AblationRow> run_ablation(const Dataset& train_set, const Dataset& test_set,
                                      const TrainConfig& base_cfg,
                                      const std::vector<std::string>& presets,
                                      const std::vector<uint64_t>& seeds);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);
std::string ablation_to_json(const std::vector<AblationRow>& rows);

void write_history_tsv(const std::string& path, const RunHistory& history);

}  // namespace kaml
