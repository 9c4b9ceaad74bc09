// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance gate. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero if any criterion fails. Tolerances are
// pinned here, next to the checks that use them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kaml/data.hpp"
#include "kaml/losses.hpp"
#include "kaml/masking.hpp"
#include "kaml/metrics.hpp"
#include "kaml/model.hpp"
#include "kaml/trainer.hpp"

using namespace kaml;

namespace {

int g_failures = 0;

void report(int id, const std::string& what, bool ok, const std::string& detail = "") {
  std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << what;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- 1. finite-difference gradient check of the full joint objective ----

void criterion_grad_check() {
  double t0 = now_seconds();

  DatagenConfig dg;
  dg.n_actions = 3;
  dg.n_train = 400;
  dg.n_test = 50;
  dg.seed = 3;
  Dataset ds = generate_dataset(dg).train;

  ModelConfig mc;
  mc.n_actions = 3;
  mc.num_experts = 2;
  mc.embedding_dim = 4;
  mc.field_vocab = ds.field_vocab;
  mc.expert_hidden = {8, 6};
  mc.subtower_hidden = {6};
  mc.merge_hidden = {4};
  mc.variant = Variant::MMoEHKE;
  CvrModel model(mc, 99);

  // Move parameters away from tiny init values so no pre-activation sits
  // within the finite-difference step of a ReLU kink.
  std::mt19937_64 jitter(7919);
  std::uniform_real_distribution<double> ju(-0.6, 0.6);
  for (Tensor& t : model.params().tensors()) {
    for (double& v : t.v) v = ju(jitter);
  }

  const size_t B = 16;
  const int N = 3;
  AdmConfig adm;
  adm.alpha = {2.0, 2.0, 2.0};  // admits cross samples, mask is non-trivial
  MaskMatrix mask = build_mask(ds, MaskStrategy::Adm, adm);

  std::vector<uint8_t> labels(B * N), bmask(B * N), route(B * N);
  for (size_t i = 0; i < B; ++i) {
    for (int j = 0; j < N; ++j) {
      labels[i * N + j] = ds.samples[i].observed[j];
      bmask[i * N + j] = mask.train_at(i, j);
      route[i * N + j] = mask.route_at(i, j);
    }
  }

  LossConfig lc;  // gamma = 0.7, beta = 1, ranking on
  lc.validate(N);
  std::mt19937_64 pair_rng(5);
  RankingPairs pairs = build_ranking_pairs(labels.data(), B, N, lc.pair_cap, pair_rng);

  auto batch_loss = [&](double* d_logits) {
    std::vector<ForwardCache> caches(B);
    std::vector<double> logits(B * N), probs(B * N);
    for (size_t i = 0; i < B; ++i) {
      std::vector<uint8_t> r(route.begin() + i * N, route.begin() + (i + 1) * N);
      Prediction p = model.forward(ds.samples[i].fields, r, &caches[i]);
      for (int j = 0; j < N; ++j) {
        logits[i * N + j] = p.logits[j];
        probs[i * N + j] = p.probs[j];
      }
    }
    BatchView b{B, N, logits.data(), probs.data(), labels.data(), bmask.data()};
    BatchLossReport rep = joint_loss(b, pairs, lc, d_logits);
    if (d_logits != nullptr) {
      for (size_t i = 0; i < B; ++i) {
        Vector d(d_logits + i * N, d_logits + (i + 1) * N);
        model.backward(caches[i], d);
      }
    }
    return rep.total;
  };

  model.params().zero_grad();
  std::vector<double> d_logits(B * N, 0.0);
  batch_loss(d_logits.data());

  double err = grad_check(model.params(), [&] { return batch_loss(nullptr); });
  double secs = now_seconds() - t0;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "max rel err %.3g, %.1f s", err, secs);
  report(1, "joint-loss gradients match finite differences (< 1e-4, < 30 s)",
         err < 1e-4 && secs < 30.0, detail);
}

// ---- 2. AUC vs exhaustive pair counting ----

void criterion_auc_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dn(10, 60);
  std::uniform_int_distribution<int> dscore(0, 9);  // coarse grid forces ties
  std::uniform_int_distribution<int> dlabel(0, 1);
  double worst = 0.0;
  int done = 0;
  for (int rep = 0; rep < 200; ++rep) {
    int n = dn(rng);
    Vector scores(n);
    std::vector<uint8_t> labels(n);
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = dscore(rng) / 10.0;
      labels[i] = static_cast<uint8_t>(dlabel(rng));
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) {
      --rep;
      continue;
    }
    double num = 0.0;
    long pairs = 0;
    for (int i = 0; i < n; ++i) {
      if (!labels[i]) continue;
      for (int j = 0; j < n; ++j) {
        if (labels[j]) continue;
        ++pairs;
        if (scores[i] > scores[j]) num += 1.0;
        else if (scores[i] == scores[j]) num += 0.5;
      }
    }
    worst = std::max(worst, std::abs(auc(scores, labels) - num / pairs));
    ++done;
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%d instances, max abs diff %.3g", done, worst);
  report(2, "rank-based AUC equals pair counting (within 1e-12)", worst < 1e-12, detail);
}

// ---- 3. published RelaImpr pairs ----

void criterion_relaimpr() {
  double a = relaimpr(0.8714, 0.8388);
  double b = relaimpr(0.9133, 0.9116);
  // Published to two decimals: 9.62% and 0.41%.
  bool ok = std::abs(std::round(a * 100.0) / 100.0 - 9.62) < 1e-9 &&
            std::abs(std::round(b * 100.0) / 100.0 - 0.41) < 1e-9;
  char detail[64];
  std::snprintf(detail, sizeof(detail), "%.4f%%, %.4f%%", a, b);
  report(3, "RelaImpr reproduces the published pairs (9.62, 0.41)", ok, detail);
}

// ---- 4. ADM mask limit cases and monotonicity ----

void criterion_mask_reductions() {
  DatagenConfig dg;
  dg.n_train = 10000;
  dg.n_test = 100;
  dg.seed = 7;
  Dataset ds = generate_dataset(dg).train;
  ConversionCounts counts = count_conversions(ds);
  MaskMatrix base = build_base_mask(ds);

  std::vector<double> inf_alpha(ds.n_actions, 1e18);
  MaskMatrix hi = build_adm_mask(ds, counts, inf_alpha);
  bool eq_base = hi.train == base.train;

  std::vector<double> zero_alpha(ds.n_actions, 0.0);
  MaskMatrix lo = build_adm_mask(ds, counts, zero_alpha);
  bool all_ones =
      std::all_of(lo.train.begin(), lo.train.end(), [](uint8_t v) { return v == 1; });

  bool monotone = true;
  MaskMatrix prev = lo;
  for (double a : {5.0, 20.0, 80.0, 320.0, 1280.0}) {
    std::vector<double> alpha(ds.n_actions, a);
    MaskMatrix cur = build_adm_mask(ds, counts, alpha);
    for (size_t i = 0; i < cur.train.size(); ++i) {
      if (cur.train[i] > prev.train[i]) monotone = false;
    }
    prev = std::move(cur);
  }
  report(4, "ADM mask: alpha->inf gives base, alpha=0 gives ones, monotone in alpha",
         eq_base && all_ones && monotone);
}

// ---- 5. dynamic-average BCE duplication invariance ----

void criterion_bce_invariance() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dp(0.05, 0.95);
  std::uniform_int_distribution<int> d01(0, 1);
  const size_t n = 37;
  const int N = 5;
  std::vector<double> probs(n * N), logits(n * N);
  std::vector<uint8_t> labels(n * N), mask(n * N);
  for (size_t i = 0; i < n * N; ++i) {
    probs[i] = dp(rng);
    logits[i] = std::log(probs[i] / (1.0 - probs[i]));
    labels[i] = static_cast<uint8_t>(d01(rng));
    mask[i] = static_cast<uint8_t>(d01(rng));
  }
  BatchView b{n, N, logits.data(), probs.data(), labels.data(), mask.data()};
  double once = dynamic_average_bce(b);

  std::vector<double> probs2(probs), logits2(logits);
  std::vector<uint8_t> labels2(labels), mask2(mask);
  probs2.insert(probs2.end(), probs.begin(), probs.end());
  logits2.insert(logits2.end(), logits.begin(), logits.end());
  labels2.insert(labels2.end(), labels.begin(), labels.end());
  mask2.insert(mask2.end(), mask.begin(), mask.end());
  BatchView b2{2 * n, N, logits2.data(), probs2.data(), labels2.data(), mask2.data()};
  double twice = dynamic_average_bce(b2);

  char detail[64];
  std::snprintf(detail, sizeof(detail), "abs diff %.3g", std::abs(once - twice));
  report(5, "dynamic-average BCE is invariant to duplicating the batch (< 1e-12)",
         std::abs(once - twice) < 1e-12, detail);
}

// ---- 6. ranking-loss closed forms ----

void criterion_ranking_properties() {
  const int N = 2;
  std::mt19937_64 rng(13);

  // No positives anywhere: the term must be exactly zero.
  std::vector<uint8_t> zeros(6 * N, 0);
  RankingPairs none = build_ranking_pairs(zeros.data(), 6, N, 10000, rng);
  std::vector<double> some_logits(6 * N, 0.3);
  bool zero_ok =
      none.total == 0 && ranking_loss(some_logits.data(), 6, N, none, {1.5, 1.5}) == 0.0;

  // One pair with equal logits: loss = beta * ln 2.
  std::vector<uint8_t> pair_labels = {1, 0, 0, 0};  // task 0: one pos, one neg
  RankingPairs one = build_ranking_pairs(pair_labels.data(), 2, N, 10000, rng);
  std::vector<double> eq_logits = {0.4, 0.0, 0.4, 0.0};
  double beta = 1.5;
  double l = ranking_loss(eq_logits.data(), 2, N, one, {beta, beta});
  bool ln2_ok = std::abs(l - beta * std::log(2.0)) < 1e-12;

  // Shifting every logit of one task by a constant leaves the term unchanged.
  const size_t n = 24;
  std::vector<uint8_t> labels(n * N);
  std::vector<double> logits(n * N);
  std::uniform_real_distribution<double> dl(-2.0, 2.0);
  std::uniform_int_distribution<int> d01(0, 1);
  for (size_t i = 0; i < n * N; ++i) {
    labels[i] = static_cast<uint8_t>(d01(rng));
    logits[i] = dl(rng);
  }
  RankingPairs pairs = build_ranking_pairs(labels.data(), n, N, 10000, rng);
  double before = ranking_loss(logits.data(), n, N, pairs, {1.0, 1.0});
  std::vector<double> shifted = logits;
  for (size_t i = 0; i < n; ++i) shifted[i * N] += 3.7;       // task 0
  for (size_t i = 0; i < n; ++i) shifted[i * N + 1] -= 1.9;   // task 1
  double after = ranking_loss(shifted.data(), n, N, pairs, {1.0, 1.0});
  bool shift_ok = std::abs(before - after) < 1e-10;

  report(6, "ranking loss: zero without positives, beta*ln2 on an equal pair, shift-invariant",
         zero_ok && ln2_ok && shift_ok);
}

// ---- 7. HKE routing isolates the unused sub-tower exactly ----

void criterion_hke_gating() {
  ModelConfig mc;
  mc.n_actions = 3;
  mc.num_experts = 2;
  mc.embedding_dim = 4;
  mc.field_vocab = {20, 10, 6};
  mc.expert_hidden = {8, 6};
  mc.subtower_hidden = {6};
  mc.merge_hidden = {4};
  mc.variant = Variant::MMoEHKE;
  CvrModel model(mc, 17);

  auto grads_zero = [&](const std::string& prefix) {
    for (const Tensor& t : model.params().tensors()) {
      if (t.name.rfind(prefix, 0) != 0) continue;
      for (double g : t.g) {
        if (g != 0.0) return false;
      }
    }
    return true;
  };

  bool ok = true;
  for (int routed : {1, 0}) {
    model.params().zero_grad();
    std::vector<uint8_t> route(3, static_cast<uint8_t>(routed));
    for (int s = 0; s < 8; ++s) {
      ForwardCache cache;
      std::vector<int> fields = {s % 20, s % 10, s % 6};
      model.forward(fields, route, &cache);
      model.backward(cache, {0.3, -0.2, 0.5});
    }
    for (int j = 0; j < 3; ++j) {
      std::string tower = "tower." + std::to_string(j);
      // With M=1 the extended sub-tower must stay untouched; with M=0 the
      // original one must. The active sub-tower must receive gradient.
      ok = ok && grads_zero(tower + (routed ? ".ext" : ".orig"));
      ok = ok && !grads_zero(tower + (routed ? ".orig" : ".ext"));
    }
  }
  report(7, "HKE routing leaves the unused sub-tower with exactly zero gradients", ok);
}

// ---- 8. ablation ordering on the default synthetic dataset ----

void criterion_ablation_ordering() {
  double t0 = now_seconds();

  DatagenConfig dg;  // defaults: 200k train / 20k test, propensities in [0.1, 0.7]
  dg.seed = 1;
  GeneratedData data = generate_dataset(dg);

  TrainConfig cfg;
  cfg.adm.alpha_quantile = 0.45;  // per-action threshold from the count profile
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<AblationRow> rows =
      run_ablation(data.train, data.test, cfg, default_ablation_grid(), seeds);

  auto mean_of = [&](const std::string& name) {
    for (const AblationRow& r : rows) {
      if (r.name == name && r.overall_auc.mean) return *r.overall_auc.mean;
    }
    return -1.0;
  };
  double mmoe = mean_of("mmoe");
  double adm = mean_of("mmoe_adm");
  double hke = mean_of("mmoe_adm_hke");
  double rlu = mean_of("mmoe_rlu");
  double kaml = mean_of("kaml");

  double secs = now_seconds() - t0;
  bool ok = adm >= mmoe + 0.003 && hke >= adm && kaml >= mmoe && kaml >= adm &&
            kaml >= hke && kaml >= rlu && secs < 900.0;
  char detail[192];
  std::snprintf(detail, sizeof(detail),
                "mmoe %.4f, adm %.4f, hke %.4f, rlu %.4f, kaml %.4f; %.0f s",
                mmoe, adm, hke, rlu, kaml, secs);
  report(8, "ablation: adm > base + 0.003, hke >= adm, kaml >= all, < 15 min", ok, detail);
}

// ---- 9. protocol comparison on a synthetic multi-feedback log ----

void criterion_protocol_ordering() {
  // A scarce, strongly correlated log: extra observable feedback carries
  // transferable signal that the single-label protocol cannot reach.
  RawLog raw = make_synthetic_feedback_log(12000, 1500, 60, 4, {0.10, 0.14, 0.18, 0.22},
                                           0.95, 3.0, 404);
  AdaptConfig ac;
  ac.neg_keep_rate = 0.7;
  ac.user_vocab = 1500;

  std::vector<double> kaml_auc(4, 0.0), vanilla_auc(4, 0.0);
  for (uint64_t seed : {1, 2, 3, 4, 5}) {
    for (Protocol proto : {Protocol::Kaml, Protocol::Vanilla}) {
      auto [train_set, test_set] = kuairand_adapt(raw, proto, ac, 91);
      TrainConfig cfg;
      cfg.mask = MaskStrategy::Observed;
      cfg.epochs = 3;
      cfg.model.num_experts = 2;
      cfg.model.embedding_dim = 4;
      cfg.model.expert_hidden = {16, 8};
      cfg.model.subtower_hidden = {8};
      cfg.model.merge_hidden = {4};
      TrainResult r = train(train_set, test_set, cfg, seed);
      MetricsReport rep = evaluate(test_set, r.model);
      for (int j = 0; j < 4; ++j) {
        if (!rep.per_action[j].auc) continue;
        (proto == Protocol::Kaml ? kaml_auc : vanilla_auc)[j] += *rep.per_action[j].auc;
      }
    }
  }

  int wins = 0;
  std::ostringstream detail;
  for (int j = 0; j < 4; ++j) {
    double k = kaml_auc[j] / 5.0, v = vanilla_auc[j] / 5.0;
    if (k > v) ++wins;
    detail << "a" << j + 1 << " " << (k > v ? "+" : "-") << std::abs(k - v) * 1000.0
           << (j + 1 < 4 ? "e-3 " : "e-3");
  }
  report(9, "multi-feedback protocol beats single-label on >= 3 of 4 target AUCs",
         wins >= 3, detail.str());
}

// ---- 10. coverage table shape ----

void criterion_coverage() {
  DatagenConfig dg;
  dg.n_train = 50000;
  dg.n_test = 100;
  dg.seed = 1;
  Dataset ds = generate_dataset(dg).train;

  MaskMatrix base = build_base_mask(ds);
  AdmConfig adm;
  adm.alpha_quantile = 0.45;
  MaskMatrix ext = build_mask(ds, MaskStrategy::Adm, adm);
  CoverageReport cb = coverage_stats(ds, base);
  CoverageReport ca = coverage_stats(ds, ext);

  // The base strategy admits exactly one entry per tracked-target sample, so
  // its usable counts plus the untracked "other" rows partition the log.
  long n_other = 0;
  for (const Sample& s : ds.samples) {
    if (s.target == kOtherTarget) ++n_other;
  }
  long base_usable = 0;
  for (long c : cb.usable_counts) base_usable += c;
  bool partition = base_usable + n_other == static_cast<long>(ds.size()) &&
                   cb.other_share == static_cast<double>(n_other) / ds.size();

  // Per action: ADM coverage never below base, strictly above wherever some
  // task with a different target has nonzero submission propensity for it.
  bool ok = partition;
  for (int j = 0; j < ds.n_actions; ++j) {
    if (ca.usable_counts[j] < cb.usable_counts[j]) ok = false;
    bool cross = false;
    for (const AdTaskProfile& t : ds.tasks) {
      if (t.target != j && t.propensity[j] > 0.0) cross = true;
    }
    if (cross && ca.usable_counts[j] <= cb.usable_counts[j]) ok = false;
  }
  report(10, "coverage: ADM >= base per action, strict under cross-submission, other excluded",
         ok);
}

// ---- 11. bit-identical reruns ----

void criterion_reproducibility() {
  DatagenConfig dg;
  dg.n_train = 8000;
  dg.n_test = 1000;
  dg.seed = 5;

  std::string snap[2], json[2], csv[2];
  for (int run = 0; run < 2; ++run) {
    GeneratedData data = generate_dataset(dg);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.variant = Variant::MMoEHKE;
    cfg.mask = MaskStrategy::Adm;
    cfg.adm.alpha_quantile = 0.45;
    TrainResult r = train(data.train, data.test, cfg, 9);
    std::string path = "acceptance_snap_" + std::to_string(run) + ".bin";
    r.model.save(path);
    snap[run] = read_bytes(path);
    std::remove(path.c_str());
    MetricsReport rep = evaluate(data.test, r.model);
    json[run] = report_to_json(rep);
    std::string cpath = "acceptance_rep_" + std::to_string(run) + ".csv";
    write_report_csv(cpath, rep);
    csv[run] = read_bytes(cpath);
    std::remove(cpath.c_str());
  }
  bool ok = !snap[0].empty() && snap[0] == snap[1] && json[0] == json[1] && csv[0] == csv[1];
  report(11, "identical config and seed give bit-identical snapshots and reports", ok);
}

}  // namespace

int main() {
  criterion_grad_check();
  criterion_auc_oracle();
  criterion_relaimpr();
  criterion_mask_reductions();
  criterion_bce_invariance();
  criterion_ranking_properties();
  criterion_hke_gating();
  criterion_ablation_ordering();
  criterion_protocol_ordering();
  criterion_coverage();
  criterion_reproducibility();
  if (g_failures == 0) {
    std::cout << "ALL CRITERIA PASSED" << std::endl;
  } else {
    std::cout << "FAILURES: " << g_failures << std::endl;
  }
  return g_failures == 0 ? 0 : 1;
}
