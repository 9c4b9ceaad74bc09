// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kaml/trainer.hpp"

using namespace kaml;

namespace {

GeneratedData small_data(int n_train, int n_test, uint64_t seed) {
  DatagenConfig cfg;
  cfg.n_train = n_train;
  cfg.n_test = n_test;
  cfg.seed = seed;
  return generate_dataset(cfg);
}

TrainConfig small_train_config(const Dataset& train_set) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 256;
  cfg.model.n_actions = train_set.n_actions;
  cfg.model.num_experts = 2;
  cfg.model.embedding_dim = 4;
  cfg.model.expert_hidden = {16, 8};
  cfg.model.subtower_hidden = {8};
  cfg.model.merge_hidden = {4};
  cfg.model.tower_hidden = {8};
  return cfg;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// Reference Adam written out long-hand: the optimizer must match it to
// round-off on every scalar, including bias correction across steps.
TEST_CASE("adam_step matches a scalar reference implementation") {
  ParamStore ps;
  Tensor& a = ps.add("a", 2, 3);
  Tensor& b = ps.add("b", 1, 4);
  for (size_t i = 0; i < a.size(); ++i) a.v[i] = 0.1 * static_cast<double>(i) - 0.2;
  for (size_t i = 0; i < b.size(); ++i) b.v[i] = 0.5 - 0.3 * static_cast<double>(i);

  AdamState st;
  st.init(ps);

  std::vector<std::vector<double>> ref = {a.v, b.v};
  std::vector<std::vector<double>> m(2), v(2);
  m[0].assign(a.size(), 0.0);
  m[1].assign(b.size(), 0.0);
  v[0].assign(a.size(), 0.0);
  v[1].assign(b.size(), 0.0);

  const double lr = 0.05;
  for (int step = 1; step <= 7; ++step) {
    // Deterministic synthetic gradients that vary by step and index.
    for (size_t i = 0; i < a.size(); ++i) a.g[i] = std::sin(0.7 * step + 1.3 * i);
    for (size_t i = 0; i < b.size(); ++i) b.g[i] = std::cos(0.3 * step - 0.9 * i);

    std::vector<std::vector<double>> grads = {a.g, b.g};
    for (int t = 0; t < 2; ++t) {
      for (size_t i = 0; i < ref[t].size(); ++i) {
        m[t][i] = st.beta1 * m[t][i] + (1.0 - st.beta1) * grads[t][i];
        v[t][i] = st.beta2 * v[t][i] + (1.0 - st.beta2) * grads[t][i] * grads[t][i];
        double mhat = m[t][i] / (1.0 - std::pow(st.beta1, step));
        double vhat = v[t][i] / (1.0 - std::pow(st.beta2, step));
        ref[t][i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
      }
    }

    adam_step(ps, st, lr);
    CHECK(st.step == step);
    for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.v[i] - ref[0][i]) <= 1e-12);
    for (size_t i = 0; i < b.size(); ++i) CHECK(std::abs(b.v[i] - ref[1][i]) <= 1e-12);
  }
}

TEST_CASE("adam_step leaves parameters unchanged on zero gradients or zero lr") {
  ParamStore ps;
  Tensor& w = ps.add("w", 3, 3);
  for (size_t i = 0; i < w.size(); ++i) w.v[i] = 1.0 + static_cast<double>(i);
  AdamState st;
  st.init(ps);

  std::vector<double> before = w.v;
  adam_step(ps, st, 0.01);  // grads are all zero
  CHECK(w.v == before);

  for (size_t i = 0; i < w.size(); ++i) w.g[i] = 2.5;
  adam_step(ps, st, 0.0);  // nonzero grads but lr = 0
  CHECK(w.v == before);
}

TEST_CASE("adam_step rejects uninitialized state and non-finite gradients") {
  ParamStore ps;
  ps.add("w", 2, 2);
  AdamState st;
  CHECK_THROWS_AS(adam_step(ps, st, 0.01), StateError);

  st.init(ps);
  ps.at("w").g[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(ps, st, 0.01), NumericError);
}

TEST_CASE("mask strategy names round-trip and bad names are rejected") {
  for (MaskStrategy m : {MaskStrategy::Base, MaskStrategy::Adm, MaskStrategy::Observed}) {
    CHECK(mask_strategy_from_string(mask_strategy_name(m)) == m);
  }
  CHECK_THROWS_AS(mask_strategy_from_string("everything"), ConfigError);
}

TEST_CASE("preset table covers the grid and rejects unknown names") {
  for (const std::string& name : default_ablation_grid()) {
    VariantPreset p = preset_from_name(name);
    CHECK(p.name == name);
  }
  VariantPreset kaml = preset_from_name("kaml");
  CHECK(kaml.variant == Variant::MMoEHKE);
  CHECK(kaml.mask == MaskStrategy::Adm);
  CHECK(kaml.use_ranking);
  VariantPreset base = preset_from_name("mmoe");
  CHECK(base.variant == Variant::MMoE);
  CHECK(base.mask == MaskStrategy::Base);
  CHECK(!base.use_ranking);
  CHECK_THROWS_AS(preset_from_name("mmoe_xl"), ConfigError);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  GeneratedData data = small_data(4000, 800, 11);
  TrainConfig cfg = small_train_config(data.train);

  TrainResult r1 = train(data.train, data.test, cfg, 42);
  TrainResult r2 = train(data.train, data.test, cfg, 42);

  r1.model.save("trainer_det_a.bin");
  r2.model.save("trainer_det_b.bin");
  CHECK(read_bytes("trainer_det_a.bin") == read_bytes("trainer_det_b.bin"));
  std::remove("trainer_det_a.bin");
  std::remove("trainer_det_b.bin");

  REQUIRE(r1.history.epochs.size() == r2.history.epochs.size());
  for (size_t e = 0; e < r1.history.epochs.size(); ++e) {
    CHECK(r1.history.epochs[e].total_loss == r2.history.epochs[e].total_loss);
    CHECK(r1.history.epochs[e].test.overall_logloss == r2.history.epochs[e].test.overall_logloss);
  }

  // A different seed must change the trained weights.
  TrainResult r3 = train(data.train, data.test, cfg, 43);
  r3.model.save("trainer_det_c.bin");
  r1.model.save("trainer_det_a.bin");
  CHECK(read_bytes("trainer_det_a.bin") != read_bytes("trainer_det_c.bin"));
  std::remove("trainer_det_a.bin");
  std::remove("trainer_det_c.bin");
}

TEST_CASE("training loss decreases and the learned model separates the data") {
  GeneratedData data = small_data(20000, 4000, 5);
  TrainConfig cfg = small_train_config(data.train);
  cfg.epochs = 3;

  TrainResult r = train(data.train, data.test, cfg, 1);
  REQUIRE(r.history.epochs.size() == 3);
  CHECK(r.history.epochs.back().total_loss < r.history.epochs.front().total_loss);
  REQUIRE(r.history.epochs.back().test.overall_auc.has_value());
  CHECK(*r.history.epochs.back().test.overall_auc > 0.8);
  CHECK(r.history.wall_seconds > 0.0);
}

TEST_CASE("build_mask strategies agree with the dataset they come from") {
  GeneratedData data = small_data(3000, 300, 9);
  const Dataset& ds = data.train;

  MaskMatrix base = build_mask(ds, MaskStrategy::Base, AdmConfig{});
  MaskMatrix obs = build_mask(ds, MaskStrategy::Observed, AdmConfig{});
  REQUIRE(base.n == ds.size());
  REQUIRE(obs.n == ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    for (int a = 0; a < ds.n_actions; ++a) {
      // Synthetic logs carry no protocol-exposure vector, so the observed
      // strategy falls back to the target-only base mask.
      CHECK(obs.train_at(i, a) == base.train_at(i, a));
      if (base.train_at(i, a)) CHECK(ds.samples[i].target == a);
    }
  }

  AdmConfig loose;
  loose.alpha = {0.0};  // broadcast: every cell admitted
  MaskMatrix adm = build_mask(ds, MaskStrategy::Adm, loose);
  long n_base = 0, n_adm = 0;
  for (size_t i = 0; i < ds.size(); ++i) {
    for (int a = 0; a < ds.n_actions; ++a) {
      n_base += base.train_at(i, a);
      n_adm += adm.train_at(i, a);
    }
  }
  CHECK(n_adm >= n_base);

  // The quantile knob must reproduce the explicit alpha it derives.
  AdmConfig byq;
  byq.alpha_quantile = 0.5;
  AdmConfig byval;
  byval.alpha = suggest_alpha(count_conversions(ds), 0.5);
  MaskMatrix mq = build_mask(ds, MaskStrategy::Adm, byq);
  MaskMatrix mv = build_mask(ds, MaskStrategy::Adm, byval);
  CHECK(mq.train == mv.train);
  CHECK(mq.route == mv.route);
}

TEST_CASE("run_ablation aggregates per-seed reports") {
  GeneratedData data = small_data(10000, 2000, 21);
  TrainConfig cfg = small_train_config(data.train);

  std::vector<std::string> presets = {"mmoe", "kaml"};
  std::vector<uint64_t> seeds = {1, 2};
  std::vector<AblationRow> rows = run_ablation(data.train, data.test, cfg, presets, seeds);
  REQUIRE(rows.size() == 2);
  for (const AblationRow& row : rows) {
    CHECK(row.per_seed.size() == seeds.size());
    REQUIRE(row.overall_auc.mean.has_value());
    CHECK(*row.overall_auc.mean > 0.5);
    CHECK(*row.overall_auc.mean < 1.0);
    // The reported mean must match the per-seed reports it came from.
    double sum = 0.0;
    for (const MetricsReport& rep : row.per_seed) {
      REQUIRE(rep.overall_auc.has_value());
      sum += *rep.overall_auc;
    }
    CHECK(std::abs(*row.overall_auc.mean - sum / seeds.size()) <= 1e-12);
  }

  CHECK_THROWS_AS(run_ablation(data.train, data.test, cfg, {}, seeds), ConfigError);
  CHECK_THROWS_AS(run_ablation(data.train, data.test, cfg, presets, {}), ConfigError);

  write_ablation_csv("trainer_abl.csv", rows);
  std::ifstream in("trainer_abl.csv");
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header.find("variant") != std::string::npos);
  in.close();
  std::remove("trainer_abl.csv");

  std::string js = ablation_to_json(rows);
  CHECK(js.find("\"kaml\"") != std::string::npos);
  CHECK(js.find("\"all\"") != std::string::npos);
  CHECK(js.find("\"auc\"") != std::string::npos);
}

TEST_CASE("history TSV round-trips the epoch table") {
  GeneratedData data = small_data(2000, 400, 33);
  TrainConfig cfg = small_train_config(data.train);
  TrainResult r = train(data.train, data.test, cfg, 7);

  write_history_tsv("trainer_hist.tsv", r.history);
  std::ifstream in("trainer_hist.tsv");
  REQUIRE(in.good());
  std::string line;
  int n_lines = 0;
  while (std::getline(in, line)) ++n_lines;
  CHECK(n_lines == static_cast<int>(r.history.epochs.size()) + 1);
  in.close();
  std::remove("trainer_hist.tsv");
}
