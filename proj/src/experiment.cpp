// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "kaml/experiment.hpp"

#include <filesystem>

namespace kaml {

namespace {

// Per-action overrides like "adm.alpha.3 = 25" on top of a scalar/list key.
std::vector<double> per_action(KvConfig& kv, const std::string& base_key, int n_actions,
                               std::vector<double> values) {
  if (static_cast<int>(values.size()) == 1 && n_actions > 1) {
    values.assign(n_actions, values[0]);
  }
  for (int j = 1; j <= n_actions; ++j) {
    std::string key = base_key + "." + std::to_string(j);
    if (kv.has(key)) {
      if (static_cast<int>(values.size()) != n_actions) values.resize(n_actions, 0.0);
      values[j - 1] = kv.get_double(key, 0.0);
    }
  }
  kv.consume_prefix(base_key + ".");
  return values;
}

void require_exists(const std::string& path, const std::string& what) {
  if (!path.empty() && !std::filesystem::exists(path)) {
    throw ConfigError(what + " does not exist: " + path);
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  KvConfig kv = KvConfig::parse_file(path);
  return from_kv(kv);
}

ExperimentConfig ExperimentConfig::from_kv(KvConfig& kv) {
  ExperimentConfig ec;

  DatagenConfig& dg = ec.datagen;
  dg.n_actions = kv.get_int("dataset.n_actions", dg.n_actions);
  dg.n_train = kv.get_int("dataset.n_train", dg.n_train);
  dg.n_test = kv.get_int("dataset.n_test", dg.n_test);
  dg.tasks_per_action = kv.get_int("dataset.tasks_per_action", dg.tasks_per_action);
  dg.other_share = kv.get_double("dataset.other_share", dg.other_share);
  dg.base_rates = kv.get_double_list("dataset.base_rates", dg.base_rates);
  dg.target_shares = kv.get_double_list("dataset.target_shares", dg.target_shares);
  dg.latent_dim = kv.get_int("dataset.latent_dim", dg.latent_dim);
  dg.correlation = kv.get_double("dataset.correlation", dg.correlation);
  dg.weight_scale = kv.get_double("dataset.weight_scale", dg.weight_scale);
  dg.campaign_scale = kv.get_double("dataset.campaign_scale", dg.campaign_scale);
  dg.campaign_buckets = kv.get_int("dataset.campaign_buckets", dg.campaign_buckets);
  dg.user_vocab = kv.get_int("dataset.user_vocab", dg.user_vocab);
  dg.context_vocab = kv.get_int("dataset.context_vocab", dg.context_vocab);
  dg.propensity_lo = kv.get_double("dataset.propensity_lo", dg.propensity_lo);
  dg.propensity_hi = kv.get_double("dataset.propensity_hi", dg.propensity_hi);
  dg.track_rate = kv.get_double("dataset.track_rate", dg.track_rate);
  dg.report_context_skew =
      kv.get_double("dataset.report_context_skew", dg.report_context_skew);
  dg.horizon_days = kv.get_int("dataset.horizon_days", dg.horizon_days);
  dg.seed = kv.get_u64("dataset.seed", dg.seed);

  ec.train_file = kv.get_str("dataset.train_file", "");
  ec.test_file = kv.get_str("dataset.test_file", "");
  ec.tasks_file = kv.get_str("dataset.tasks_file", "");
  require_exists(ec.train_file, "dataset.train_file");
  require_exists(ec.test_file, "dataset.test_file");
  require_exists(ec.tasks_file, "dataset.tasks_file");

  int n_actions = dg.n_actions;

  TrainConfig& tc = ec.train;
  tc.lr = kv.get_double("train.lr", tc.lr);
  tc.batch_size = kv.get_int("train.batch_size", tc.batch_size);
  tc.epochs = kv.get_int("train.epochs", tc.epochs);
  tc.seeds = kv.get_u64_list("train.seeds", tc.seeds);
  tc.mask = mask_strategy_from_string(kv.get_str("train.mask", mask_strategy_name(tc.mask)));
  tc.variant = variant_from_string(kv.get_str("model.variant", variant_name(tc.variant)));

  ModelConfig& mc = tc.model;
  mc.embedding_dim = kv.get_int("model.embedding_dim", mc.embedding_dim);
  mc.num_experts = kv.get_int("model.num_experts", mc.num_experts);
  mc.expert_hidden = kv.get_int_list("model.expert_hidden", mc.expert_hidden);
  mc.tower_hidden = kv.get_int_list("model.tower_hidden", mc.tower_hidden);
  mc.subtower_hidden = kv.get_int_list("model.subtower_hidden", mc.subtower_hidden);
  mc.merge_hidden = kv.get_int_list("model.merge_hidden", mc.merge_hidden);

  LossConfig& lc = tc.loss;
  lc.gamma = kv.get_double("loss.gamma", lc.gamma);
  lc.pair_cap = kv.get_int("loss.pair_cap", lc.pair_cap);
  lc.use_ranking = kv.get_bool("loss.use_ranking", lc.use_ranking);
  lc.beta = per_action(kv, "loss.beta", n_actions,
                       kv.get_double_list("loss.beta", lc.beta));

  AdmConfig& adm = tc.adm;
  adm.alpha_quantile = kv.get_double("adm.alpha_quantile", adm.alpha_quantile);
  adm.window_days = kv.get_double("adm.window_days", adm.window_days);
  adm.horizon_days = static_cast<double>(dg.horizon_days);
  adm.alpha = per_action(kv, "adm.alpha", n_actions,
                         kv.get_double_list("adm.alpha", adm.alpha));

  RawLogConfig& raw = ec.raw;
  raw.file = kv.get_str("raw.file", "");
  require_exists(raw.file, "raw.file");
  raw.item_column = kv.get_str("raw.item_column", raw.item_column);
  raw.user_column = kv.get_str("raw.user_column", raw.user_column);
  raw.time_column = kv.get_str("raw.time_column", raw.time_column);
  {
    std::string cols = kv.get_str("raw.feedback_columns", "");
    raw.feedback_columns.clear();
    std::string cur;
    for (char ch : cols + ",") {
      if (ch == ',') {
        if (!cur.empty()) raw.feedback_columns.push_back(cur);
        cur.clear();
      } else if (ch != ' ') {
        cur += ch;
      }
    }
  }
  std::string delim = kv.get_str("raw.delim", "tab");
  raw.delim = delim == "comma" ? ',' : '\t';
  raw.adapt.neg_keep_rate = kv.get_double("raw.neg_keep_rate", raw.adapt.neg_keep_rate);
  raw.adapt.train_frac = kv.get_double("raw.train_frac", raw.adapt.train_frac);
  raw.adapt.user_vocab = kv.get_int("raw.user_vocab", raw.adapt.user_vocab);
  raw.adapt.kaml_extra_feedbacks =
      kv.get_int("raw.kaml_extra_feedbacks", raw.adapt.kaml_extra_feedbacks);

  ec.out_dir = kv.get_str("output.dir", ec.out_dir);
  {
    std::string variants = kv.get_str("ablate.variants", "");
    ec.ablate_variants.clear();
    std::string cur;
    for (char ch : variants + ",") {
      if (ch == ',') {
        if (!cur.empty()) ec.ablate_variants.push_back(cur);
        cur.clear();
      } else if (ch != ' ') {
        cur += ch;
      }
    }
  }

  kv.reject_unknown();
  return ec;
}

GeneratedData ExperimentConfig::load_data() const {
  if (train_file.empty() && test_file.empty()) {
    return generate_dataset(datagen);
  }
  if (train_file.empty() || test_file.empty()) {
    throw ConfigError("config: dataset.train_file and dataset.test_file must both be set");
  }
  GeneratedData data;
  data.train = read_dataset(train_file);
  data.test = read_dataset(test_file);
  if (!tasks_file.empty()) {
    read_tasks(tasks_file, data.train);
    data.test.tasks = data.train.tasks;
  }
  return data;
}

}  // namespace kaml
