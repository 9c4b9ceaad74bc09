// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic asymmetric multi-label advertising logs. A planted latent-factor
// ground truth drives per-action conversion probabilities; advertiser
// submission policies then hide a portion of the non-target labels, which is
// what creates Type A / B / C samples. Also adapts external multi-feedback
// interaction logs (Oracle / Vanilla / KAML protocols).

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "kaml/engine.hpp"

namespace kaml {

// Actions are 0-based in memory, 1-based in files. kOtherTarget marks samples
// whose ad task bids on an untracked conversion action ("Other"): never
// trainable under the base mask, never evaluated, but reachable through ADM.
constexpr int kOtherTarget = -1;

struct Sample {
  int64_t id = 0;
  int task_id = 0;
  int target = 0;  // 0-based action index, or kOtherTarget
  std::vector<int> fields;
  std::vector<uint8_t> observed;
  std::vector<uint8_t> truth;        // synthetic / adapted logs only
  std::vector<uint8_t> observable;   // adapted logs: which actions the protocol exposes
  bool has_truth = false;
};

struct AdTaskProfile {
  int task_id = 0;
  int target = 0;  // 0-based, or kOtherTarget
  std::vector<double> propensity;  // per action; target entry fixed at 1
  int campaign_feature = 0;
};

enum class SampleType { TypeA, TypeB, TypeC };

// TypeA: observed positive. TypeB: true negative. TypeC: unsubmitted true
// positive (label 0, actually converted).
inline SampleType type_tag(uint8_t observed, uint8_t truth) {
  if (observed) return SampleType::TypeA;
  return truth ? SampleType::TypeC : SampleType::TypeB;
}

struct Dataset {
  int n_actions = 0;
  std::vector<int> field_vocab;
  std::vector<AdTaskProfile> tasks;
  std::vector<Sample> samples;

  size_t size() const { return samples.size(); }
};

struct DatagenConfig {
  int n_actions = 5;
  int n_train = 200000;
  int n_test = 20000;
  // Total tracked-task budget is n_actions * tasks_per_action, apportioned to
  // actions proportionally to target_shares so every task draws a similar
  // number of log rows (keeps per-task conversion counts comparable).
  int tasks_per_action = 4;
  double other_share = 0.25;            // train-only share of untracked-target samples
  std::vector<double> base_rates;       // per action; default filled in normalize()
  std::vector<double> target_shares;    // per tracked action; renormalized
  int latent_dim = 8;
  double correlation = 0.7;             // shared latent factor weight across actions
  double weight_scale = 3.0;
  double campaign_scale = 0.15;         // damping on campaign-id latents
  // Campaign-id buckets shared by several ad tasks (0 = about three tasks
  // per bucket). Submission behavior varies per task, so a bucketed campaign
  // feature cannot stand in for the task's reporting propensities.
  int campaign_buckets = 0;
  int user_vocab = 500;
  int context_vocab = 16;
  // Cross-submission propensities are two-tier: each (task, non-target
  // action) cell is "tracked" with probability track_rate and draws its
  // propensity near the top of [lo, hi], otherwise near the bottom. Tracked
  // cells therefore accumulate many more confirmed conversions, which is
  // what a count threshold can detect.
  double propensity_lo = 0.1;
  double propensity_hi = 0.7;
  double track_rate = 0.5;
  // Reporting is channel-dependent: for half of the (context, task, action)
  // combinations the non-target submission propensity is multiplied by
  // (1 - report_context_skew), so missingness correlates with features
  // instead of acting as uniform label thinning.
  double report_context_skew = 0.7;
  int horizon_days = 28;
  uint64_t seed = 1;

  std::vector<int> task_counts() const;  // tracked tasks per action
  int other_task_count() const;
  int n_tasks() const;
  int n_campaigns() const;
  void normalize();  // fills defaults, validates; throws ConfigError
};

// Planted conversion process: each categorical id owns a latent vector, a
// sample's latent is the sum over its fields, and every action scores it with
// a logistic model whose bias is Monte-Carlo calibrated to the configured
// base rate.
struct GroundTruthModel {
  int n_actions = 0;
  int latent_dim = 0;
  std::vector<Matrix> field_latent;  // per field: vocab x latent_dim
  Matrix action_w;                   // n_actions x latent_dim
  Vector bias;

  Vector latent_of(const std::vector<int>& fields) const;
  double prob(int action, const Vector& z) const;
};

GroundTruthModel make_ground_truth(const DatagenConfig& cfg, uint64_t seed);

std::vector<AdTaskProfile> make_ad_tasks(const DatagenConfig& cfg, uint64_t seed);

// Draws n samples with true labels; observed starts equal to truth.
std::vector<Sample> sample_logs(const GroundTruthModel& gt,
                                const std::vector<AdTaskProfile>& tasks,
                                const DatagenConfig& cfg, int n, int64_t first_id,
                                uint64_t seed);

// Per sample: observed[o] = truth[o]; for j != o, observed[j] = truth[j] with
// probability propensity[j], else 0. With context_skew > 0 the propensity is
// scaled by (1 - context_skew) for odd (context + task + action) parities.
void apply_submission_policy(std::vector<Sample>& samples,
                             const std::vector<AdTaskProfile>& tasks, uint64_t seed,
                             double context_skew = 0.0);

struct GeneratedData {
  Dataset train;
  Dataset test;  // tracked targets only, no submission thinning of the target label
};

GeneratedData generate_dataset(const DatagenConfig& cfg);

// ---- External multi-feedback logs (KuaiRand-style protocol) ----

struct RawLog {
  std::vector<std::string> feedback_names;  // selected feedback columns, >= 4
  struct Row {
    int user = 0;
    int item = 0;
    int64_t ts = 0;
    std::vector<uint8_t> feedback;
  };
  std::vector<Row> rows;
};

enum class Protocol { Oracle, Vanilla, Kaml };

Protocol protocol_from_string(const std::string& s);
std::string protocol_name(Protocol p);

struct AdaptConfig {
  double neg_keep_rate = 1.0;  // keep probability for rows with all-zero feedback
  double train_frac = 0.8;     // timestamp split
  int user_vocab = 1000;
  int kaml_extra_feedbacks = 2;
};

// Per item, one feedback kind is chosen uniformly as the target action
// (consistent across that item's rows). Oracle exposes all labels, Vanilla
// only the target, KAML the target plus `kaml_extra_feedbacks` random others.
std::pair<Dataset, Dataset> kuairand_adapt(const RawLog& raw, Protocol protocol,
                                           const AdaptConfig& cfg, uint64_t seed);

// Delimited text with a header line naming the columns.
RawLog read_raw_log(const std::string& path, const std::string& item_col,
                    const std::string& user_col, const std::string& time_col,
                    const std::vector<std::string>& feedback_cols, char delim = '\t');

void write_raw_log(const std::string& path, const RawLog& log, char delim = '\t');

// Synthetic analog of a public multi-feedback log, used where the real data
// set is unavailable.
RawLog make_synthetic_feedback_log(int n_rows, int n_users, int n_items, int n_feedbacks,
                                   const std::vector<double>& base_rates, double correlation,
                                   double weight_scale, uint64_t seed);

// ---- Dataset files: header line, then tab-separated rows ----

void write_dataset(const std::string& path, const Dataset& ds, bool include_truth);
Dataset read_dataset(const std::string& path);

void write_tasks(const std::string& path, const Dataset& ds);
// Merges task profiles from a tasks file into ds (after read_dataset).
void read_tasks(const std::string& path, Dataset& ds);

}  // namespace kaml
