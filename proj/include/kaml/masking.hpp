// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Training-eligibility masks. The base mask admits a (sample, task) pair only
// when the task matches the sample's target conversion action. The
// attribution-driven mask (ADM) additionally admits samples whose advertising
// task has at least alpha_j confirmed conversions of action j within the
// count window. The routing indicator marks "original" samples per task and
// always equals the base mask.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kaml/data.hpp"

namespace kaml {

// Observed-positive counts per (advertising task, action) within the window.
// Built from observed labels only; true labels are never consulted.
struct ConversionCounts {
  int n_tasks = 0;
  int n_actions = 0;
  std::vector<long> c;

  long at(int task, int action) const {
    return c[static_cast<size_t>(task) * n_actions + action];
  }
  long& at(int task, int action) {
    return c[static_cast<size_t>(task) * n_actions + action];
  }
};

// Samples are time-ordered; row position stands in for the timestamp. A
// window of w days covers the last w days of the horizon. window_days < 0
// means the whole training period.
ConversionCounts count_conversions(const Dataset& ds, double window_days = -1.0,
                                   double horizon_days = 28.0);

struct MaskMatrix {
  size_t n = 0;
  int n_actions = 0;
  std::vector<uint8_t> train;  // |D| x N training eligibility
  std::vector<uint8_t> route;  // |D| x N routing indicator M (1 = original)

  uint8_t train_at(size_t i, int j) const { return train[i * n_actions + j]; }
  uint8_t route_at(size_t i, int j) const { return route[i * n_actions + j]; }
};

inline uint8_t base_mask_entry(const Sample& s, int action) {
  return s.target == action ? 1 : 0;
}

// mask[i][j] = 1 iff o_i = j or c^j(task of i) >= alpha_j. The target-action
// disjunct keeps a task's own samples trainable even when its confirmed
// conversion count is below threshold.
uint8_t adm_mask_entry(const Sample& s, const ConversionCounts& counts,
                       const std::vector<double>& alpha, int action);

inline uint8_t route_indicator_entry(const Sample& s, int action) {
  return base_mask_entry(s, action);
}

MaskMatrix build_base_mask(const Dataset& ds);
MaskMatrix build_adm_mask(const Dataset& ds, const ConversionCounts& counts,
                          const std::vector<double>& alpha);
// Per-sample observability mask for protocol-adapted datasets; falls back to
// the base mask for samples without observability flags.
MaskMatrix build_observed_mask(const Dataset& ds);

// Suggests per-action thresholds as a quantile of the nonzero per-task counts.
std::vector<double> suggest_alpha(const ConversionCounts& counts, double quantile);

struct CoverageReport {
  // Per action: fraction of samples with train mask 1.
  std::vector<double> proportions;
  // Base strategy only: share of samples excluded for every task (untracked
  // target), mirroring the "Other" column of a coverage table.
  double other_share = 0.0;
  std::vector<long> usable_counts;
  long total = 0;
};

CoverageReport coverage_stats(const Dataset& ds, const MaskMatrix& mask);

void write_mask(const std::string& path, const MaskMatrix& mask);
void write_coverage_csv(const std::string& path, const CoverageReport& base_report,
                        const CoverageReport& adm_report);

}  // namespace kaml
