// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "kaml/masking.hpp"

using namespace kaml;

namespace {

Dataset make_data(int n, uint64_t seed) {
  DatagenConfig cfg;
  cfg.n_train = n;
  cfg.n_test = 50;
  cfg.seed = seed;
  return generate_dataset(cfg).train;
}

}  // namespace

TEST_CASE("count_conversions matches a brute-force oracle") {
  Dataset ds = make_data(3000, 3);
  ConversionCounts c = count_conversions(ds);
  REQUIRE(c.n_actions == ds.n_actions);
  std::vector<long> oracle(static_cast<size_t>(c.n_tasks) * c.n_actions, 0);
  for (const Sample& s : ds.samples) {
    for (int j = 0; j < ds.n_actions; ++j) {
      if (s.observed[j]) ++oracle[static_cast<size_t>(s.task_id) * c.n_actions + j];
    }
  }
  CHECK(c.c == oracle);
}

TEST_CASE("count window restricts to the trailing rows") {
  Dataset ds = make_data(2000, 5);
  // Half horizon: only the last half of the rows counts.
  ConversionCounts half = count_conversions(ds, 14.0, 28.0);
  std::vector<long> oracle(half.c.size(), 0);
  for (size_t i = ds.size() / 2; i < ds.size(); ++i) {
    const Sample& s = ds.samples[i];
    for (int j = 0; j < ds.n_actions; ++j) {
      if (s.observed[j]) ++oracle[static_cast<size_t>(s.task_id) * half.n_actions + j];
    }
  }
  CHECK(half.c == oracle);
  // Full window equals the default.
  CHECK(count_conversions(ds, 28.0, 28.0).c == count_conversions(ds).c);
}

TEST_CASE("adm reduces to base as alpha grows to infinity") {
  Dataset ds = make_data(10000, 7);
  ConversionCounts c = count_conversions(ds);
  std::vector<double> huge(ds.n_actions, 1e18);
  MaskMatrix adm = build_adm_mask(ds, c, huge);
  MaskMatrix base = build_base_mask(ds);
  CHECK(adm.train == base.train);
  CHECK(adm.route == base.route);
}

TEST_CASE("adm saturates to all ones at alpha zero") {
  Dataset ds = make_data(2000, 7);
  ConversionCounts c = count_conversions(ds);
  MaskMatrix adm = build_adm_mask(ds, c, std::vector<double>(ds.n_actions, 0.0));
  for (uint8_t m : adm.train) CHECK(m == 1);
}

TEST_CASE("raising any alpha never adds a mask entry") {
  Dataset ds = make_data(4000, 9);
  ConversionCounts c = count_conversions(ds);
  double sweep[] = {0.0, 5.0, 25.0, 100.0, 1e6};
  MaskMatrix prev;
  bool first = true;
  for (double a : sweep) {
    MaskMatrix cur = build_adm_mask(ds, c, std::vector<double>(ds.n_actions, a));
    if (!first) {
      for (size_t i = 0; i < cur.train.size(); ++i) {
        CHECK(cur.train[i] <= prev.train[i]);
      }
    }
    prev = std::move(cur);
    first = false;
  }
}

TEST_CASE("adm target-override keeps a task's own samples trainable") {
  Dataset ds = make_data(2000, 11);
  ConversionCounts c = count_conversions(ds);
  std::vector<double> huge(ds.n_actions, 1e18);
  for (const Sample& s : ds.samples) {
    if (s.target == kOtherTarget) continue;
    CHECK(adm_mask_entry(s, c, huge, s.target) == 1);
  }
}

TEST_CASE("negative alpha is rejected") {
  Dataset ds = make_data(500, 11);
  ConversionCounts c = count_conversions(ds);
  std::vector<double> alpha(ds.n_actions, 1.0);
  alpha[0] = -1.0;
  CHECK_THROWS_AS(build_adm_mask(ds, c, alpha), ConfigError);
}

TEST_CASE("routing indicator equals the base mask under adm") {
  Dataset ds = make_data(2000, 13);
  ConversionCounts c = count_conversions(ds);
  MaskMatrix adm = build_adm_mask(ds, c, std::vector<double>(ds.n_actions, 0.0));
  MaskMatrix base = build_base_mask(ds);
  CHECK(adm.route == base.route);
}

TEST_CASE("adm equals base when no cross-submissions exist") {
  Dataset ds = make_data(3000, 15);
  // Zero out every non-target observed label, then recount.
  for (Sample& s : ds.samples) {
    for (int j = 0; j < ds.n_actions; ++j) {
      if (j != s.target) s.observed[j] = 0;
    }
  }
  ConversionCounts c = count_conversions(ds);
  MaskMatrix adm = build_adm_mask(ds, c, std::vector<double>(ds.n_actions, 1.0));
  MaskMatrix base = build_base_mask(ds);
  CHECK(adm.train == base.train);
}

TEST_CASE("coverage partitions and reports the excluded other share") {
  Dataset ds = make_data(6000, 17);
  MaskMatrix base = build_base_mask(ds);
  CoverageReport rep = coverage_stats(ds, base);
  REQUIRE(static_cast<int>(rep.proportions.size()) == ds.n_actions);
  double sum = rep.other_share;
  long other = 0;
  for (const Sample& s : ds.samples) other += s.target == kOtherTarget ? 1 : 0;
  for (int j = 0; j < ds.n_actions; ++j) sum += rep.proportions[j];
  // Base mask admits exactly one action per tracked sample, none for "other",
  // so the proportions plus the other share partition the dataset.
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.other_share == doctest::Approx(static_cast<double>(other) / ds.size())
                               .epsilon(1e-12));
  CHECK(rep.other_share > 0.0);

  // ADM coverage dominates base coverage per action.
  ConversionCounts c = count_conversions(ds);
  CoverageReport adm = coverage_stats(ds, build_adm_mask(ds, c, suggest_alpha(c, 0.45)));
  for (int j = 0; j < ds.n_actions; ++j) CHECK(adm.proportions[j] >= rep.proportions[j]);
}

TEST_CASE("suggest_alpha picks a count quantile") {
  ConversionCounts c;
  c.n_tasks = 4;
  c.n_actions = 1;
  c.c = {0, 10, 20, 30};
  CHECK(suggest_alpha(c, 0.0)[0] == doctest::Approx(10.0));
  CHECK(suggest_alpha(c, 1.0)[0] == doctest::Approx(30.0));
  CHECK_THROWS_AS(suggest_alpha(c, 1.5), ConfigError);
}

TEST_CASE("mask and coverage files are written") {
  Dataset ds = make_data(500, 19);
  MaskMatrix base = build_base_mask(ds);
  std::string mpath = "/tmp/kaml_mask.tsv";
  write_mask(mpath, base);
  std::ifstream in(mpath);
  REQUIRE(in.good());
  std::string line;
  size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == ds.size() + 1);  // header + one row per sample
  std::remove(mpath.c_str());

  ConversionCounts c = count_conversions(ds);
  CoverageReport adm = coverage_stats(ds, build_adm_mask(ds, c, suggest_alpha(c, 0.5)));
  std::string cpath = "/tmp/kaml_coverage.csv";
  write_coverage_csv(cpath, coverage_stats(ds, base), adm);
  std::ifstream cin2(cpath);
  REQUIRE(cin2.good());
  std::remove(cpath.c_str());
}
