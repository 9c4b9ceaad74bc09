// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "kaml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace kaml {

double auc(const Vector& scores, const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size()) throw DimError("auc: size mismatch");
  long pos = std::count(labels.begin(), labels.end(), 1);
  long neg = static_cast<long>(labels.size()) - pos;
  if (pos == 0 || neg == 0) {
    throw MetricError("auc: degenerate label set (" + std::to_string(pos) + " positives, " +
                      std::to_string(neg) + " negatives)");
  }
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });
  // Average ranks over tie groups (1-based ranks).
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) pos_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double logloss(const Vector& probs, const std::vector<uint8_t>& labels) {
  if (probs.size() != labels.size()) throw DimError("logloss: size mismatch");
  if (probs.empty()) throw MetricError("logloss: empty input");
  double sum = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    double p = std::clamp(probs[i], kProbEps, 1.0 - kProbEps);
    sum += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(probs.size());
}

double relaimpr(double auc_model, double auc_baseline) {
  if (auc_baseline <= 0.5) {
    throw MetricError("relaimpr: baseline AUC must exceed 0.5");
  }
  return 100.0 * ((auc_model - 0.5) / (auc_baseline - 0.5) - 1.0);
}

MetricsReport evaluate(const Dataset& test, const CvrModel& model) {
  int N = test.n_actions;
  MetricsReport rep;
  rep.per_action.resize(N);
  std::vector<Vector> scores(N);
  std::vector<std::vector<uint8_t>> labels(N);
  Vector all_scores;
  std::vector<uint8_t> all_labels;

  for (const Sample& s : test.samples) {
    if (s.target == kOtherTarget) {
      ++rep.skipped;
      continue;
    }
    // Only the target-action label of a test sample is ever read.
    double p = model.serve_score(s.fields, s.target);
    uint8_t y = s.observed[s.target];
    scores[s.target].push_back(p);
    labels[s.target].push_back(y);
    all_scores.push_back(p);
    all_labels.push_back(y);
    ++rep.evaluated;
  }

  for (int j = 0; j < N; ++j) {
    ActionMetrics& m = rep.per_action[j];
    m.count = static_cast<long>(scores[j].size());
    m.positives = std::count(labels[j].begin(), labels[j].end(), 1);
    if (m.count == 0) continue;
    m.logloss = logloss(scores[j], labels[j]);
    try {
      m.auc = auc(scores[j], labels[j]);
    } catch (const MetricError&) {
      m.auc = std::nullopt;  // reported as unavailable, never fabricated
    }
  }
  if (!all_scores.empty()) {
    rep.overall_logloss = logloss(all_scores, all_labels);
    try {
      rep.overall_auc = auc(all_scores, all_labels);
    } catch (const MetricError&) {
      rep.overall_auc = std::nullopt;
    }
  }
  return rep;
}

void write_report_csv(const std::string& path, const MetricsReport& rep) {
  std::ofstream out(path);
  if (!out) throw ConfigError("report: cannot write " + path);
  out << "action,auc,logloss,count,positives\n";
  auto fmt = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("unavailable");
  };
  for (size_t j = 0; j < rep.per_action.size(); ++j) {
    const ActionMetrics& m = rep.per_action[j];
    out << "action_" << (j + 1) << "," << fmt(m.auc) << "," << m.logloss << "," << m.count
        << "," << m.positives << "\n";
  }
  out << "all," << fmt(rep.overall_auc) << "," << rep.overall_logloss << "," << rep.evaluated
      << ",\n";
}

std::string report_to_json(const MetricsReport& rep) {
  nlohmann::json j;
  j["evaluated"] = rep.evaluated;
  j["skipped"] = rep.skipped;
  j["overall"] = {{"logloss", rep.overall_logloss}};
  if (rep.overall_auc) j["overall"]["auc"] = *rep.overall_auc;
  j["actions"] = nlohmann::json::array();
  for (size_t a = 0; a < rep.per_action.size(); ++a) {
    const ActionMetrics& m = rep.per_action[a];
    nlohmann::json e = {{"action", a + 1},
                        {"logloss", m.logloss},
                        {"count", m.count},
                        {"positives", m.positives}};
    if (m.auc) e["auc"] = *m.auc;
    j["actions"].push_back(e);
  }
  return j.dump(2);
}

}  // namespace kaml
