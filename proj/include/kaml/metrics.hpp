// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Target-conditional evaluation: every test sample is scored once, on its own
// target conversion action. Per-action metrics run on the subset of samples
// targeting that action; the overall row pools the per-sample target-action
// scores and labels.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kaml/data.hpp"
#include "kaml/model.hpp"

namespace kaml {

// Mann-Whitney AUC with average ranks for ties. Throws MetricError when the
// labels are degenerate (no positive or no negative).
double auc(const Vector& scores, const std::vector<uint8_t>& labels);

// Mean negative log-likelihood; probabilities clamped to [1e-12, 1 - 1e-12].
double logloss(const Vector& probs, const std::vector<uint8_t>& labels);

// 100 * [(a - 0.5) / (b - 0.5) - 1]. Both AUCs must exceed 0.5 in `b`.
double relaimpr(double auc_model, double auc_baseline);

struct ActionMetrics {
  std::optional<double> auc;  // unavailable on a degenerate subset
  double logloss = 0.0;
  long count = 0;
  long positives = 0;
};

struct MetricsReport {
  std::vector<ActionMetrics> per_action;
  std::optional<double> overall_auc;
  double overall_logloss = 0.0;
  long evaluated = 0;
  long skipped = 0;  // untracked-target samples, never evaluated
};

MetricsReport evaluate(const Dataset& test, const CvrModel& model);

void write_report_csv(const std::string& path, const MetricsReport& rep);
std::string report_to_json(const MetricsReport& rep);

}  // namespace kaml
