// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "kaml/masking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace kaml {

ConversionCounts count_conversions(const Dataset& ds, double window_days,
                                   double horizon_days) {
  ConversionCounts counts;
  counts.n_tasks = static_cast<int>(ds.tasks.size());
  counts.n_actions = ds.n_actions;
  counts.c.assign(static_cast<size_t>(counts.n_tasks) * counts.n_actions, 0);
  if (ds.samples.empty()) return counts;
  size_t n = ds.samples.size();
  size_t first = 0;
  if (window_days >= 0.0 && horizon_days > 0.0 && window_days < horizon_days) {
    double keep = window_days / horizon_days;
    first = n - static_cast<size_t>(std::floor(keep * n));
  }
  for (size_t i = first; i < n; ++i) {
    const Sample& s = ds.samples[i];
    for (int j = 0; j < ds.n_actions; ++j) {
      if (s.observed[j]) ++counts.at(s.task_id, j);
    }
  }
  return counts;
}

uint8_t adm_mask_entry(const Sample& s, const ConversionCounts& counts,
                       const std::vector<double>& alpha, int action) {
  if (alpha[action] < 0.0) throw ConfigError("adm: alpha must be non-negative");
  if (s.target == action) return 1;
  return counts.at(s.task_id, action) >= alpha[action] ? 1 : 0;
}

namespace {

MaskMatrix alloc_mask(const Dataset& ds) {
  MaskMatrix m;
  m.n = ds.samples.size();
  m.n_actions = ds.n_actions;
  m.train.assign(m.n * ds.n_actions, 0);
  m.route.assign(m.n * ds.n_actions, 0);
  return m;
}

void fill_route(const Dataset& ds, MaskMatrix& m) {
  for (size_t i = 0; i < m.n; ++i) {
    const Sample& s = ds.samples[i];
    for (int j = 0; j < m.n_actions; ++j) {
      m.route[i * m.n_actions + j] = route_indicator_entry(s, j);
    }
  }
}

}  // namespace

MaskMatrix build_base_mask(const Dataset& ds) {
  MaskMatrix m = alloc_mask(ds);
  for (size_t i = 0; i < m.n; ++i) {
    const Sample& s = ds.samples[i];
    for (int j = 0; j < m.n_actions; ++j) {
      m.train[i * m.n_actions + j] = base_mask_entry(s, j);
    }
  }
  fill_route(ds, m);
  return m;
}

MaskMatrix build_adm_mask(const Dataset& ds, const ConversionCounts& counts,
                          const std::vector<double>& alpha) {
  if (static_cast<int>(alpha.size()) != ds.n_actions) {
    throw ConfigError("adm: alpha size must match action count");
  }
  MaskMatrix m = alloc_mask(ds);
  for (size_t i = 0; i < m.n; ++i) {
    const Sample& s = ds.samples[i];
    for (int j = 0; j < m.n_actions; ++j) {
      m.train[i * m.n_actions + j] = adm_mask_entry(s, counts, alpha, j);
    }
  }
  fill_route(ds, m);
  return m;
}

MaskMatrix build_observed_mask(const Dataset& ds) {
  MaskMatrix m = alloc_mask(ds);
  for (size_t i = 0; i < m.n; ++i) {
    const Sample& s = ds.samples[i];
    for (int j = 0; j < m.n_actions; ++j) {
      uint8_t v = s.observable.empty() ? base_mask_entry(s, j) : s.observable[j];
      m.train[i * m.n_actions + j] = v;
    }
  }
  fill_route(ds, m);
  return m;
}

std::vector<double> suggest_alpha(const ConversionCounts& counts, double quantile) {
  if (quantile < 0.0 || quantile > 1.0) throw ConfigError("adm: quantile must be in [0, 1]");
  std::vector<double> alpha(counts.n_actions, 0.0);
  for (int j = 0; j < counts.n_actions; ++j) {
    std::vector<long> nz;
    for (int t = 0; t < counts.n_tasks; ++t) {
      if (counts.at(t, j) > 0) nz.push_back(counts.at(t, j));
    }
    if (nz.empty()) continue;
    std::sort(nz.begin(), nz.end());
    size_t idx = std::min(nz.size() - 1,
                          static_cast<size_t>(quantile * static_cast<double>(nz.size())));
    alpha[j] = static_cast<double>(nz[idx]);
  }
  return alpha;
}

CoverageReport coverage_stats(const Dataset& ds, const MaskMatrix& mask) {
  CoverageReport r;
  r.total = static_cast<long>(ds.samples.size());
  r.usable_counts.assign(ds.n_actions, 0);
  long other = 0;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    bool any = false;
    for (int j = 0; j < ds.n_actions; ++j) {
      if (mask.train_at(i, j)) {
        ++r.usable_counts[j];
        any = true;
      }
    }
    if (!any) ++other;
  }
  r.proportions.assign(ds.n_actions, 0.0);
  if (r.total > 0) {
    for (int j = 0; j < ds.n_actions; ++j) {
      r.proportions[j] = static_cast<double>(r.usable_counts[j]) / r.total;
    }
    r.other_share = static_cast<double>(other) / r.total;
  }
  return r;
}

void write_mask(const std::string& path, const MaskMatrix& mask) {
  std::ofstream out(path);
  if (!out) throw ConfigError("mask: cannot write " + path);
  out << "sample";
  for (int j = 1; j <= mask.n_actions; ++j) out << "\ttrain_" << j;
  for (int j = 1; j <= mask.n_actions; ++j) out << "\troute_" << j;
  out << "\n";
  for (size_t i = 0; i < mask.n; ++i) {
    out << i;
    for (int j = 0; j < mask.n_actions; ++j) out << "\t" << static_cast<int>(mask.train_at(i, j));
    for (int j = 0; j < mask.n_actions; ++j) out << "\t" << static_cast<int>(mask.route_at(i, j));
    out << "\n";
  }
}

void write_coverage_csv(const std::string& path, const CoverageReport& base_report,
                        const CoverageReport& adm_report) {
  std::ofstream out(path);
  if (!out) throw ConfigError("coverage: cannot write " + path);
  out << "mask_strategy";
  for (size_t j = 1; j <= base_report.proportions.size(); ++j) out << ",action_" << j;
  out << ",other\n";
  char buf[32];
  auto row = [&](const char* name, const CoverageReport& r, bool with_other) {
    out << name;
    for (double p : r.proportions) {
      std::snprintf(buf, sizeof(buf), "%.4f", 100.0 * p);
      out << "," << buf << "%";
    }
    if (with_other) {
      std::snprintf(buf, sizeof(buf), "%.4f", 100.0 * r.other_share);
      out << "," << buf << "%";
    } else {
      out << ",-";
    }
    out << "\n";
  };
  row("base", base_report, true);
  row("adm", adm_report, false);
}

}  // namespace kaml
