// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "kaml/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace kaml {

MaskStrategy mask_strategy_from_string(const std::string& s) {
  if (s == "base") return MaskStrategy::Base;
  if (s == "adm") return MaskStrategy::Adm;
  if (s == "observed") return MaskStrategy::Observed;
  throw ConfigError("unknown mask strategy: " + s + " (expected base|adm|observed)");
}

std::string mask_strategy_name(MaskStrategy m) {
  switch (m) {
    case MaskStrategy::Base: return "base";
    case MaskStrategy::Adm: return "adm";
    default: return "observed";
  }
}

void TrainConfig::validate() const {
  if (lr < 0.0) throw ConfigError("train: learning rate must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (seeds.empty()) throw ConfigError("train: need at least one seed");
}

void AdamState::init(const ParamStore& ps) {
  m.clear();
  v.clear();
  for (const auto& t : ps.tensors()) {
    m.emplace_back(t.size(), 0.0);
    v.emplace_back(t.size(), 0.0);
  }
  step = 0;
}

void adam_step(ParamStore& ps, AdamState& state, double lr) {
  if (state.m.size() != ps.tensors().size()) throw StateError("adam: state not initialized");
  ++state.step;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  size_t ti = 0;
  for (auto& t : ps.tensors()) {
    Vector& m = state.m[ti];
    Vector& v = state.v[ti];
    ++ti;
    for (size_t i = 0; i < t.size(); ++i) {
      double g = t.g[i];
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient in " + t.name + " at index " +
                           std::to_string(i));
      }
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      t.v[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

MaskMatrix build_mask(const Dataset& ds, MaskStrategy strategy, const AdmConfig& adm) {
  switch (strategy) {
    case MaskStrategy::Base:
      return build_base_mask(ds);
    case MaskStrategy::Observed:
      return build_observed_mask(ds);
    case MaskStrategy::Adm:
    default: {
      ConversionCounts counts = count_conversions(ds, adm.window_days, adm.horizon_days);
      std::vector<double> alpha = adm.alpha;
      if (adm.alpha_quantile >= 0.0) {
        alpha = suggest_alpha(counts, adm.alpha_quantile);
      } else if (alpha.empty()) {
        alpha.assign(ds.n_actions, 10.0);
      }
      if (static_cast<int>(alpha.size()) == 1 && ds.n_actions > 1) {
        alpha.assign(ds.n_actions, alpha[0]);
      }
      return build_adm_mask(ds, counts, alpha);
    }
  }
}

TrainResult train(const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg_in,
                  uint64_t seed) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  if (train_set.samples.empty()) throw ConfigError("train: empty dataset");
  int N = train_set.n_actions;
  cfg.loss.validate(N);

  ModelConfig mc = cfg.model;
  mc.n_actions = N;
  mc.variant = cfg.variant;
  if (mc.field_vocab.empty()) mc.field_vocab = train_set.field_vocab;
  mc.validate();

  auto t0 = std::chrono::steady_clock::now();
  MaskMatrix mask = build_mask(train_set, cfg.mask, cfg.adm);

  CvrModel model(mc, seed);
  AdamState adam;
  adam.init(model.params());

  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 1);
  size_t n = train_set.samples.size();
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  RunHistory history;
  size_t B = static_cast<size_t>(cfg.batch_size);
  std::vector<ForwardCache> caches(B);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double loss_sum = 0.0, bce_sum = 0.0, rank_sum = 0.0;
    long pair_sum = 0;
    size_t n_batches = 0;

    for (size_t start = 0; start < n; start += B) {
      size_t bs = std::min(B, n - start);
      std::vector<double> logits(bs * N), probs(bs * N), d_logits(bs * N);
      std::vector<uint8_t> labels(bs * N), bmask(bs * N);
      std::vector<uint8_t> route(N);
      for (size_t b = 0; b < bs; ++b) {
        size_t i = perm[start + b];
        const Sample& s = train_set.samples[i];
        for (int j = 0; j < N; ++j) {
          route[j] = mask.route_at(i, j);
          labels[b * N + j] = s.observed[j];
          bmask[b * N + j] = mask.train_at(i, j);
        }
        Prediction p = model.forward(s.fields, route, &caches[b]);
        std::copy(p.logits.begin(), p.logits.end(), logits.begin() + b * N);
        std::copy(p.probs.begin(), p.probs.end(), probs.begin() + b * N);
      }
      RankingPairs pairs;
      if (cfg.loss.use_ranking) {
        pairs = build_ranking_pairs(labels.data(), bs, N, cfg.loss.pair_cap, rng);
      }
      BatchView view{bs, N, logits.data(), probs.data(), labels.data(), bmask.data()};
      BatchLossReport rep = joint_loss(view, pairs, cfg.loss, d_logits.data());

      model.params().zero_grad();
      Vector dl(N);
      for (size_t b = 0; b < bs; ++b) {
        bool any = false;
        for (int j = 0; j < N; ++j) {
          dl[j] = d_logits[b * N + j];
          any = any || dl[j] != 0.0;
        }
        if (any) model.backward(caches[b], dl);
      }
      adam_step(model.params(), adam, cfg.lr);

      loss_sum += rep.total;
      bce_sum += rep.bce;
      rank_sum += rep.ranking;
      pair_sum += rep.pair_count;
      ++n_batches;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.total_loss = loss_sum / static_cast<double>(n_batches);
    stats.bce = bce_sum / static_cast<double>(n_batches);
    stats.ranking = rank_sum / static_cast<double>(n_batches);
    stats.pair_count = pair_sum;
    if (!test_set.samples.empty() && (cfg.eval_every_epoch || epoch + 1 == cfg.epochs)) {
      stats.test = evaluate(test_set, model);
    }
    history.epochs.push_back(std::move(stats));
  }
  history.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return TrainResult{std::move(model), std::move(history)};
}

VariantPreset preset_from_name(const std::string& name) {
  if (name == "singletask") return {name, Variant::SingleTask, MaskStrategy::Base, false};
  if (name == "sharedbottom") return {name, Variant::SharedBottom, MaskStrategy::Base, false};
  if (name == "mmoe") return {name, Variant::MMoE, MaskStrategy::Base, false};
  if (name == "mmoe_adm") return {name, Variant::MMoE, MaskStrategy::Adm, false};
  if (name == "mmoe_adm_hke") return {name, Variant::MMoEHKE, MaskStrategy::Adm, false};
  if (name == "mmoe_rlu") return {name, Variant::MMoE, MaskStrategy::Base, true};
  if (name == "kaml") return {name, Variant::MMoEHKE, MaskStrategy::Adm, true};
  throw ConfigError("unknown ablation preset: " + name);
}

std::vector<std::string> default_ablation_grid() {
  return {"mmoe", "mmoe_adm", "mmoe_adm_hke", "mmoe_rlu", "kaml"};
}

namespace {

AblationCell aggregate(const std::vector<std::optional<double>>& xs) {
  AblationCell cell;
  std::vector<double> vals;
  for (const auto& x : xs) {
    if (x) vals.push_back(*x);
  }
  if (vals.empty()) return cell;
  double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  cell.mean = mean;
  cell.stddev = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1)) : 0.0;
  return cell;
}

}  // namespace

std::vector<AblationRow> run_ablation(const Dataset& train_set, const Dataset& test_set,
                                      const TrainConfig& base_cfg,
                                      const std::vector<std::string>& presets,
                                      const std::vector<uint64_t>& seeds) {
  if (presets.empty()) throw ConfigError("ablation: need at least one variant");
  if (seeds.empty()) throw ConfigError("ablation: need at least one seed");
  int N = train_set.n_actions;
  std::vector<AblationRow> rows;
  for (const std::string& name : presets) {
    VariantPreset preset = preset_from_name(name);
    AblationRow row;
    row.name = name;
    for (uint64_t seed : seeds) {
      TrainConfig cfg = base_cfg;
      cfg.variant = preset.variant;
      cfg.mask = preset.mask;
      cfg.loss.use_ranking = preset.use_ranking;
      cfg.eval_every_epoch = false;
      TrainResult res = train(train_set, test_set, cfg, seed);
      row.per_seed.push_back(res.history.epochs.back().test);
    }
    row.action_auc.resize(N);
    row.action_logloss.resize(N);
    for (int j = 0; j < N; ++j) {
      std::vector<std::optional<double>> aucs, lls;
      for (const auto& rep : row.per_seed) {
        aucs.push_back(rep.per_action[j].auc);
        lls.push_back(rep.per_action[j].count > 0
                          ? std::optional<double>(rep.per_action[j].logloss)
                          : std::nullopt);
      }
      row.action_auc[j] = aggregate(aucs);
      row.action_logloss[j] = aggregate(lls);
    }
    std::vector<std::optional<double>> oa, ol;
    for (const auto& rep : row.per_seed) {
      oa.push_back(rep.overall_auc);
      ol.push_back(rep.evaluated > 0 ? std::optional<double>(rep.overall_logloss)
                                     : std::nullopt);
    }
    row.overall_auc = aggregate(oa);
    row.overall_logloss = aggregate(ol);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string cell_str(const AblationCell& c) {
  if (!c.mean) return "unavailable";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", *c.mean);
  return buf;
}

}  // namespace

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("ablation: cannot write " + path);
  if (rows.empty()) return;
  size_t N = rows.front().action_auc.size();
  out << "variant";
  for (size_t j = 1; j <= N; ++j) {
    out << ",action_" << j << "_auc,action_" << j << "_logloss";
  }
  out << ",all_auc,all_logloss,all_auc_std\n";
  for (const auto& r : rows) {
    out << r.name;
    for (size_t j = 0; j < N; ++j) {
      out << "," << cell_str(r.action_auc[j]) << "," << cell_str(r.action_logloss[j]);
    }
    out << "," << cell_str(r.overall_auc) << "," << cell_str(r.overall_logloss) << ","
        << r.overall_auc.stddev << "\n";
  }
}

std::string ablation_to_json(const std::vector<AblationRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json e;
    e["variant"] = r.name;
    e["actions"] = nlohmann::json::array();
    for (size_t a = 0; a < r.action_auc.size(); ++a) {
      nlohmann::json m;
      m["action"] = a + 1;
      if (r.action_auc[a].mean) {
        m["auc"] = *r.action_auc[a].mean;
        m["auc_std"] = r.action_auc[a].stddev;
      }
      if (r.action_logloss[a].mean) {
        m["logloss"] = *r.action_logloss[a].mean;
        m["logloss_std"] = r.action_logloss[a].stddev;
      }
      e["actions"].push_back(m);
    }
    if (r.overall_auc.mean) {
      e["all"]["auc"] = *r.overall_auc.mean;
      e["all"]["auc_std"] = r.overall_auc.stddev;
    }
    if (r.overall_logloss.mean) {
      e["all"]["logloss"] = *r.overall_logloss.mean;
      e["all"]["logloss_std"] = r.overall_logloss.stddev;
    }
    j.push_back(e);
  }
  return j.dump(2);
}

void write_history_tsv(const std::string& path, const RunHistory& history) {
  std::ofstream out(path);
  if (!out) throw ConfigError("history: cannot write " + path);
  out << "epoch\ttotal_loss\tbce\tranking\tpairs\toverall_auc\toverall_logloss\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << "\t" << e.total_loss << "\t" << e.bce << "\t" << e.ranking << "\t"
        << e.pair_count << "\t";
    if (e.test.overall_auc) {
      out << *e.test.overall_auc;
    } else {
      out << "unavailable";
    }
    out << "\t" << e.test.overall_logloss << "\n";
  }
}

}  // namespace kaml
