// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "kaml/losses.hpp"

#include <algorithm>
#include <cmath>

namespace kaml {

void LossConfig::validate(int n_actions) {
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("loss: gamma must be in [0, 1]");
  if (pair_cap < 1) throw ConfigError("loss: pair_cap must be >= 1");
  if (beta.empty()) beta.assign(n_actions, 1.0);
  if (static_cast<int>(beta.size()) == 1 && n_actions > 1) beta.assign(n_actions, beta[0]);
  if (static_cast<int>(beta.size()) != n_actions) {
    throw ConfigError("loss: beta size must match action count");
  }
  for (double b : beta) {
    if (b < 0.0) throw ConfigError("loss: beta must be non-negative");
  }
}

namespace {

inline double cross_entropy(double p, uint8_t y) {
  return y ? -clamped_log(p) : -clamped_log(1.0 - p);
}

}  // namespace

BceResult masked_bce(const BatchView& b) {
  BceResult r;
  r.task_sums.assign(b.n_actions, 0.0);
  r.task_counts.assign(b.n_actions, 0);
  for (size_t i = 0; i < b.n; ++i) {
    for (int j = 0; j < b.n_actions; ++j) {
      size_t idx = b.idx(i, j);
      if (!b.mask[idx]) continue;
      r.task_sums[j] += cross_entropy(b.probs[idx], b.labels[idx]);
      ++r.task_counts[j];
    }
  }
  double sum = 0.0;
  for (double s : r.task_sums) sum += s;
  r.mean = b.n > 0 ? sum / static_cast<double>(b.n) : 0.0;
  return r;
}

double dynamic_average_bce(const BatchView& b) {
  BceResult r = masked_bce(b);
  double total = 0.0;
  for (int j = 0; j < b.n_actions; ++j) {
    total += r.task_sums[j] / static_cast<double>(std::max<long>(1, r.task_counts[j]));
  }
  return total;
}

RankingPairs build_ranking_pairs(const uint8_t* labels, size_t n, int n_actions,
                                 int pair_cap, std::mt19937_64& rng) {
  RankingPairs out;
  out.per_task.resize(n_actions);
  for (int k = 0; k < n_actions; ++k) {
    std::vector<int> pos, neg;
    for (size_t i = 0; i < n; ++i) {
      (labels[i * n_actions + k] ? pos : neg).push_back(static_cast<int>(i));
    }
    if (pos.empty() || neg.empty()) continue;
    uint64_t all = static_cast<uint64_t>(pos.size()) * neg.size();
    auto& pairs = out.per_task[k];
    if (all <= static_cast<uint64_t>(pair_cap)) {
      pairs.reserve(all);
      for (int p : pos) {
        for (int q : neg) pairs.emplace_back(p, q);
      }
    } else {
      // Floyd's sampling without replacement over the flat pair index space.
      std::vector<uint64_t> chosen;
      chosen.reserve(pair_cap);
      for (uint64_t t = all - pair_cap; t < all; ++t) {
        std::uniform_int_distribution<uint64_t> dist(0, t);
        uint64_t v = dist(rng);
        if (std::find(chosen.begin(), chosen.end(), v) != chosen.end()) v = t;
        chosen.push_back(v);
      }
      std::sort(chosen.begin(), chosen.end());
      pairs.reserve(pair_cap);
      for (uint64_t v : chosen) {
        pairs.emplace_back(pos[v / neg.size()], neg[v % neg.size()]);
      }
    }
    out.total += static_cast<long>(pairs.size());
  }
  return out;
}

double ranking_loss(const double* logits, size_t n, int n_actions,
                    const RankingPairs& pairs, const std::vector<double>& beta) {
  (void)n;
  if (pairs.total == 0) return 0.0;
  double sum = 0.0;
  for (int k = 0; k < n_actions; ++k) {
    double task_sum = 0.0;
    for (const auto& [i, j] : pairs.per_task[k]) {
      double diff = logits[static_cast<size_t>(i) * n_actions + k] -
                    logits[static_cast<size_t>(j) * n_actions + k];
      task_sum += -clamped_log(sigmoid(diff));
    }
    sum += beta[k] * task_sum;
  }
  return sum / static_cast<double>(pairs.total);
}

void add_ranking_grad(const double* logits, size_t n, int n_actions,
                      const RankingPairs& pairs, const std::vector<double>& beta,
                      double scale, double* d_logits) {
  (void)n;
  if (pairs.total == 0) return;
  double norm = scale / static_cast<double>(pairs.total);
  for (int k = 0; k < n_actions; ++k) {
    double w = norm * beta[k];
    if (w == 0.0) continue;
    for (const auto& [i, j] : pairs.per_task[k]) {
      size_t ii = static_cast<size_t>(i) * n_actions + k;
      size_t jj = static_cast<size_t>(j) * n_actions + k;
      double g = w * (sigmoid(logits[ii] - logits[jj]) - 1.0);
      d_logits[ii] += g;
      d_logits[jj] -= g;
    }
  }
}

BatchLossReport joint_loss(const BatchView& b, const RankingPairs& pairs,
                           const LossConfig& cfg, double* d_logits) {
  BatchLossReport rep;
  BceResult bce = masked_bce(b);
  rep.task_bce = bce.task_sums;
  rep.task_valid = bce.task_counts;
  for (int j = 0; j < b.n_actions; ++j) {
    rep.bce += bce.task_sums[j] / static_cast<double>(std::max<long>(1, bce.task_counts[j]));
  }
  double gamma = cfg.use_ranking ? cfg.gamma : 1.0;
  if (cfg.use_ranking) {
    rep.ranking = ranking_loss(b.logits, b.n, b.n_actions, pairs, cfg.beta);
    rep.pair_count = pairs.total;
  }
  rep.total = gamma * rep.bce + (1.0 - gamma) * rep.ranking;

  if (d_logits) {
    std::fill(d_logits, d_logits + b.n * b.n_actions, 0.0);
    for (size_t i = 0; i < b.n; ++i) {
      for (int j = 0; j < b.n_actions; ++j) {
        size_t idx = b.idx(i, j);
        if (!b.mask[idx]) continue;
        double denom = static_cast<double>(std::max<long>(1, bce.task_counts[j]));
        d_logits[idx] += gamma * (b.probs[idx] - b.labels[idx]) / denom;
      }
    }
    if (cfg.use_ranking && gamma < 1.0) {
      add_ranking_grad(b.logits, b.n, b.n_actions, pairs, cfg.beta, 1.0 - gamma, d_logits);
    }
  }
  return rep;
}

}  // namespace kaml
