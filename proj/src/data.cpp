// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "kaml/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace kaml {

namespace {

constexpr uint64_t kMix = 0x9E3779B97F4A7C15ULL;

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, delim)) out.push_back(tok);
  return out;
}

}  // namespace

std::vector<int> DatagenConfig::task_counts() const {
  DatagenConfig c = *this;
  c.normalize();
  int total = c.n_actions * c.tasks_per_action;
  std::vector<int> out(c.n_actions);
  for (int a = 0; a < c.n_actions; ++a) {
    out[a] = std::max(1, static_cast<int>(std::lround(c.target_shares[a] * total)));
  }
  return out;
}

int DatagenConfig::other_task_count() const {
  DatagenConfig c = *this;
  c.normalize();
  if (c.other_share <= 0.0) return 0;
  double total = static_cast<double>(c.n_actions * c.tasks_per_action);
  return std::max(1, static_cast<int>(std::lround(c.other_share * total /
                                                  (1.0 - c.other_share))));
}

int DatagenConfig::n_tasks() const {
  std::vector<int> counts = task_counts();
  int n = 0;
  for (int c : counts) n += c;
  return n + other_task_count();
}

int DatagenConfig::n_campaigns() const {
  if (campaign_buckets > 0) return std::min(campaign_buckets, n_tasks());
  return std::max(2, (n_tasks() + 2) / 3);
}

void DatagenConfig::normalize() {
  if (n_actions < 1) throw ConfigError("datagen: n_actions must be >= 1");
  if (tasks_per_action < 1) throw ConfigError("datagen: tasks_per_action must be >= 1");
  if (latent_dim < 1) throw ConfigError("datagen: latent_dim must be >= 1");
  if (user_vocab < 1 || context_vocab < 1) throw ConfigError("datagen: vocab sizes must be >= 1");
  if (other_share < 0.0 || other_share >= 1.0) {
    throw ConfigError("datagen: other_share must be in [0, 1)");
  }
  if (propensity_lo < 0.0 || propensity_hi > 1.0 || propensity_lo > propensity_hi) {
    throw ConfigError("datagen: propensity range must satisfy 0 <= lo <= hi <= 1");
  }
  if (track_rate < 0.0 || track_rate > 1.0) {
    throw ConfigError("datagen: track_rate must be in [0, 1]");
  }
  if (campaign_buckets < 0) throw ConfigError("datagen: campaign_buckets must be >= 0");
  if (report_context_skew < 0.0 || report_context_skew > 1.0) {
    throw ConfigError("datagen: report_context_skew must be in [0, 1]");
  }
  if (base_rates.empty()) {
    base_rates.assign(n_actions, 0.05);
    double defaults[] = {0.05, 0.08, 0.06, 0.04, 0.07};
    for (int j = 0; j < n_actions; ++j) base_rates[j] = defaults[j % 5];
  }
  if (static_cast<int>(base_rates.size()) == 1 && n_actions > 1) {
    base_rates.assign(n_actions, base_rates[0]);
  }
  if (static_cast<int>(base_rates.size()) != n_actions) {
    throw ConfigError("datagen: base_rates size must match n_actions");
  }
  for (double r : base_rates) {
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("datagen: base rates must be in (0, 1)");
  }
  if (target_shares.empty()) {
    target_shares.assign(n_actions, 1.0);
    double defaults[] = {0.45, 0.20, 0.15, 0.12, 0.08};
    for (int j = 0; j < n_actions; ++j) target_shares[j] = defaults[j % 5];
  }
  if (static_cast<int>(target_shares.size()) != n_actions) {
    throw ConfigError("datagen: target_shares size must match n_actions");
  }
  double sum = std::accumulate(target_shares.begin(), target_shares.end(), 0.0);
  if (sum <= 0.0) throw ConfigError("datagen: target_shares must have positive sum");
  for (double& s : target_shares) s /= sum;
}

Vector GroundTruthModel::latent_of(const std::vector<int>& fields) const {
  if (fields.size() != field_latent.size()) throw DimError("ground truth: field count mismatch");
  Vector z(latent_dim, 0.0);
  for (size_t f = 0; f < fields.size(); ++f) {
    const Matrix& m = field_latent[f];
    int id = fields[f];
    if (id < 0 || id >= m.rows) id = 0;
    const double* row = m.row(id);
    for (int d = 0; d < latent_dim; ++d) z[d] += row[d];
  }
  return z;
}

double GroundTruthModel::prob(int action, const Vector& z) const {
  const double* w = action_w.row(action);
  double s = bias[action];
  for (int d = 0; d < latent_dim; ++d) s += w[d] * z[d];
  return sigmoid(s);
}

namespace {

// Unit-norm action directions with a shared component controlling the
// cross-action label correlation.
Matrix make_action_weights(int n_actions, int latent_dim, double correlation,
                           double weight_scale, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector shared(latent_dim);
  for (double& s : shared) s = gauss(rng);
  Matrix w(n_actions, latent_dim);
  double c = std::clamp(correlation, 0.0, 1.0);
  double oc = std::sqrt(1.0 - c * c);
  for (int j = 0; j < n_actions; ++j) {
    double norm2 = 0.0;
    for (int d = 0; d < latent_dim; ++d) {
      double v = c * shared[d] + oc * gauss(rng);
      w.at(j, d) = v;
      norm2 += v * v;
    }
    double scale = norm2 > 0.0 ? weight_scale / std::sqrt(norm2) : 0.0;
    for (int d = 0; d < latent_dim; ++d) w.at(j, d) *= scale;
  }
  return w;
}

}  // namespace

GroundTruthModel make_ground_truth(const DatagenConfig& cfg_in, uint64_t seed) {
  DatagenConfig cfg = cfg_in;
  cfg.normalize();
  GroundTruthModel gt;
  gt.n_actions = cfg.n_actions;
  gt.latent_dim = cfg.latent_dim;
  std::mt19937_64 rng(seed);
  std::vector<int> vocabs = {cfg.user_vocab, cfg.n_campaigns(), cfg.context_vocab};
  double field_std = 1.0 / std::sqrt(static_cast<double>(vocabs.size()));
  std::normal_distribution<double> gauss(0.0, field_std);
  for (size_t f = 0; f < vocabs.size(); ++f) {
    Matrix m(vocabs[f], cfg.latent_dim);
    for (double& x : m.a) x = gauss(rng);
    // Field 1 is the campaign id; damping it keeps per-task conversion rates
    // near the action base rates so per-task counts reflect propensities.
    if (f == 1) {
      for (double& x : m.a) x *= cfg.campaign_scale;
    }
    gt.field_latent.push_back(std::move(m));
  }
  gt.action_w = make_action_weights(cfg.n_actions, cfg.latent_dim, cfg.correlation,
                                    cfg.weight_scale, rng);

  // Calibrate per-action biases by Monte Carlo over random field tuples.
  const int kDraws = 20000;
  std::vector<Vector> dots(cfg.n_actions, Vector(kDraws));
  {
    std::uniform_int_distribution<int> du(0, vocabs[0] - 1);
    std::uniform_int_distribution<int> dt(0, vocabs[1] - 1);
    std::uniform_int_distribution<int> dc(0, vocabs[2] - 1);
    for (int i = 0; i < kDraws; ++i) {
      Vector z = gt.latent_of({du(rng), dt(rng), dc(rng)});
      for (int j = 0; j < cfg.n_actions; ++j) {
        const double* w = gt.action_w.row(j);
        double s = 0.0;
        for (int d = 0; d < cfg.latent_dim; ++d) s += w[d] * z[d];
        dots[j][i] = s;
      }
    }
  }
  gt.bias.resize(cfg.n_actions);
  for (int j = 0; j < cfg.n_actions; ++j) {
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 80; ++it) {
      double mid = 0.5 * (lo + hi);
      double mean = 0.0;
      for (double s : dots[j]) mean += sigmoid(s + mid);
      mean /= kDraws;
      if (mean < cfg.base_rates[j]) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    gt.bias[j] = 0.5 * (lo + hi);
  }
  return gt;
}

std::vector<AdTaskProfile> make_ad_tasks(const DatagenConfig& cfg_in, uint64_t seed) {
  DatagenConfig cfg = cfg_in;
  cfg.normalize();
  std::mt19937_64 rng(seed ^ kMix);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double span = cfg.propensity_hi - cfg.propensity_lo;
  std::uniform_real_distribution<double> tracked(cfg.propensity_hi - 0.5 * span,
                                                 cfg.propensity_hi);
  std::uniform_real_distribution<double> untracked(cfg.propensity_lo,
                                                   cfg.propensity_lo + 0.05 * span);
  std::vector<AdTaskProfile> tasks;
  auto add_group = [&](int target, int count) {
    for (int t = 0; t < count; ++t) {
      AdTaskProfile p;
      p.task_id = static_cast<int>(tasks.size());
      p.target = target;
      p.propensity.resize(cfg.n_actions);
      for (int j = 0; j < cfg.n_actions; ++j) {
        p.propensity[j] = unit(rng) < cfg.track_rate ? tracked(rng) : untracked(rng);
      }
      if (target != kOtherTarget) p.propensity[target] = 1.0;
      p.campaign_feature = p.task_id % cfg.n_campaigns();
      tasks.push_back(std::move(p));
    }
  };
  std::vector<int> counts = cfg.task_counts();
  for (int a = 0; a < cfg.n_actions; ++a) add_group(a, counts[a]);
  if (cfg.other_share > 0.0) add_group(kOtherTarget, cfg.other_task_count());
  return tasks;
}

std::vector<Sample> sample_logs(const GroundTruthModel& gt,
                                const std::vector<AdTaskProfile>& tasks,
                                const DatagenConfig& cfg_in, int n, int64_t first_id,
                                uint64_t seed) {
  if (n <= 0) throw ConfigError("sample_logs: sample count must be positive");
  if (tasks.empty()) throw ConfigError("sample_logs: empty task list");
  DatagenConfig cfg = cfg_in;
  cfg.normalize();

  std::vector<std::vector<int>> by_action(cfg.n_actions);
  std::vector<int> other_tasks;
  for (const auto& t : tasks) {
    if (t.target == kOtherTarget) {
      other_tasks.push_back(t.task_id);
    } else {
      by_action[t.target].push_back(t.task_id);
    }
  }
  for (int a = 0; a < cfg.n_actions; ++a) {
    if (by_action[a].empty()) throw ConfigError("sample_logs: no ad task targets action " +
                                                std::to_string(a + 1));
  }
  if (cfg.other_share > 0.0 && other_tasks.empty()) {
    throw ConfigError("sample_logs: other_share > 0 but no untracked-target tasks");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> du(0, gt.field_latent[0].rows - 1);
  std::uniform_int_distribution<int> dc(0, gt.field_latent[2].rows - 1);
  std::discrete_distribution<int> daction(cfg.target_shares.begin(), cfg.target_shares.end());

  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.id = first_id + i;
    int task_id;
    if (cfg.other_share > 0.0 && unit(rng) < cfg.other_share) {
      task_id = other_tasks[rng() % other_tasks.size()];
    } else {
      int a = daction(rng);
      task_id = by_action[a][rng() % by_action[a].size()];
    }
    const AdTaskProfile& task = tasks[task_id];
    s.task_id = task_id;
    s.target = task.target;
    s.fields = {du(rng), task.campaign_feature, dc(rng)};
    Vector z = gt.latent_of(s.fields);
    s.truth.resize(gt.n_actions);
    for (int j = 0; j < gt.n_actions; ++j) {
      s.truth[j] = unit(rng) < gt.prob(j, z) ? 1 : 0;
    }
    s.observed = s.truth;
    s.has_truth = true;
    out.push_back(std::move(s));
  }
  return out;
}

void apply_submission_policy(std::vector<Sample>& samples,
                             const std::vector<AdTaskProfile>& tasks, uint64_t seed,
                             double context_skew) {
  if (context_skew < 0.0 || context_skew > 1.0) {
    throw ConfigError("submission: context skew must be in [0, 1]");
  }
  std::mt19937_64 rng(seed ^ (kMix * 3));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Sample& s : samples) {
    const AdTaskProfile& task = tasks.at(s.task_id);
    int context = s.fields.size() > 2 ? s.fields[2] : 0;
    for (size_t j = 0; j < s.truth.size(); ++j) {
      if (static_cast<int>(j) == s.target) {
        s.observed[j] = s.truth[j];  // target-action labels are always submitted
      } else {
        double p = task.propensity[j];
        if (((context + s.task_id + static_cast<int>(j)) & 1) != 0) p *= 1.0 - context_skew;
        s.observed[j] = (s.truth[j] && unit(rng) < p) ? 1 : 0;
      }
    }
  }
}

GeneratedData generate_dataset(const DatagenConfig& cfg_in) {
  DatagenConfig cfg = cfg_in;
  cfg.normalize();
  if (cfg.n_train <= 0 || cfg.n_test <= 0) {
    throw ConfigError("datagen: n_train and n_test must be positive");
  }
  GroundTruthModel gt = make_ground_truth(cfg, cfg.seed);
  std::vector<AdTaskProfile> tasks = make_ad_tasks(cfg, cfg.seed + 1);

  GeneratedData out;
  auto fill_meta = [&](Dataset& ds) {
    ds.n_actions = cfg.n_actions;
    ds.field_vocab = {cfg.user_vocab, cfg.n_campaigns(), cfg.context_vocab};
    ds.tasks = tasks;
  };
  fill_meta(out.train);
  fill_meta(out.test);

  out.train.samples = sample_logs(gt, tasks, cfg, cfg.n_train, 0, cfg.seed + 2);
  apply_submission_policy(out.train.samples, tasks, cfg.seed + 3, cfg.report_context_skew);

  // Test samples model deployment traffic: every sample belongs to a tracked
  // advertiser, and the target-action label is always known.
  DatagenConfig test_cfg = cfg;
  test_cfg.other_share = 0.0;
  out.test.samples = sample_logs(gt, tasks, test_cfg, cfg.n_test, cfg.n_train, cfg.seed + 4);
  apply_submission_policy(out.test.samples, tasks, cfg.seed + 5, cfg.report_context_skew);
  return out;
}

// ---- Protocol adaptation ----

Protocol protocol_from_string(const std::string& s) {
  if (s == "oracle") return Protocol::Oracle;
  if (s == "vanilla") return Protocol::Vanilla;
  if (s == "kaml") return Protocol::Kaml;
  throw ConfigError("unknown protocol: " + s + " (expected oracle|vanilla|kaml)");
}

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Oracle: return "oracle";
    case Protocol::Vanilla: return "vanilla";
    default: return "kaml";
  }
}

std::pair<Dataset, Dataset> kuairand_adapt(const RawLog& raw, Protocol protocol,
                                           const AdaptConfig& cfg, uint64_t seed) {
  int n_actions = static_cast<int>(raw.feedback_names.size());
  if (n_actions < 2) throw FormatError("adapt: need at least 2 feedback columns");
  if (raw.rows.empty()) throw FormatError("adapt: empty raw log");

  // Dense item ids in first-appearance order.
  std::unordered_map<int, int> item_id;
  std::vector<int> item_of;
  for (const auto& r : raw.rows) {
    if (!item_id.count(r.item)) {
      item_id[r.item] = static_cast<int>(item_of.size());
      item_of.push_back(r.item);
    }
  }
  int n_items = static_cast<int>(item_of.size());

  // Per-item target action and, for the KAML protocol, the extra observable
  // feedbacks; keyed by item so the choice is consistent across its rows.
  std::vector<int> target(n_items);
  std::vector<std::vector<uint8_t>> observable(n_items,
                                               std::vector<uint8_t>(n_actions, 0));
  int extra = std::min(cfg.kaml_extra_feedbacks, n_actions - 1);
  for (int it = 0; it < n_items; ++it) {
    std::mt19937_64 rng(seed ^ (kMix * (static_cast<uint64_t>(it) + 1)));
    std::uniform_int_distribution<int> dact(0, n_actions - 1);
    target[it] = dact(rng);
    auto& obs = observable[it];
    if (protocol == Protocol::Oracle) {
      std::fill(obs.begin(), obs.end(), 1);
    } else {
      obs[target[it]] = 1;
      if (protocol == Protocol::Kaml) {
        std::vector<int> others;
        for (int j = 0; j < n_actions; ++j) {
          if (j != target[it]) others.push_back(j);
        }
        std::shuffle(others.begin(), others.end(), rng);
        for (int e = 0; e < extra; ++e) obs[others[e]] = 1;
      }
    }
  }

  // Time order, negative sampling of all-zero rows, then an 8:2 split.
  std::vector<int> order(raw.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return raw.rows[a].ts < raw.rows[b].ts;
  });
  std::mt19937_64 neg_rng(seed + 17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> kept;
  for (int idx : order) {
    const auto& r = raw.rows[idx];
    if (static_cast<int>(r.feedback.size()) != n_actions) {
      throw FormatError("adapt: row with wrong feedback count");
    }
    bool all_zero = std::none_of(r.feedback.begin(), r.feedback.end(),
                                 [](uint8_t f) { return f != 0; });
    if (all_zero && unit(neg_rng) >= cfg.neg_keep_rate) continue;
    kept.push_back(idx);
  }
  if (kept.size() < 2) throw FormatError("adapt: too few rows after negative sampling");

  Dataset base;
  base.n_actions = n_actions;
  base.field_vocab = {cfg.user_vocab, n_items};
  for (int it = 0; it < n_items; ++it) {
    AdTaskProfile p;
    p.task_id = it;
    p.target = target[it];
    p.propensity.assign(n_actions, 0.0);
    for (int j = 0; j < n_actions; ++j) p.propensity[j] = observable[it][j] ? 1.0 : 0.0;
    p.campaign_feature = it;
    base.tasks.push_back(std::move(p));
  }

  Dataset train = base, test = base;
  size_t n_train = static_cast<size_t>(cfg.train_frac * kept.size());
  for (size_t pos = 0; pos < kept.size(); ++pos) {
    const auto& r = raw.rows[kept[pos]];
    int it = item_id[r.item];
    Sample s;
    s.id = static_cast<int64_t>(pos);
    s.task_id = it;
    s.target = target[it];
    s.fields = {((r.user % cfg.user_vocab) + cfg.user_vocab) % cfg.user_vocab, it};
    s.truth.assign(r.feedback.begin(), r.feedback.end());
    s.has_truth = true;
    s.observable = observable[it];
    s.observed.resize(n_actions);
    for (int j = 0; j < n_actions; ++j) {
      s.observed[j] = observable[it][j] ? r.feedback[j] : 0;
    }
    (pos < n_train ? train : test).samples.push_back(std::move(s));
  }
  return {train, test};
}

RawLog read_raw_log(const std::string& path, const std::string& item_col,
                    const std::string& user_col, const std::string& time_col,
                    const std::vector<std::string>& feedback_cols, char delim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("raw log: cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw FormatError("raw log: missing header line");
  std::vector<std::string> names = split(header, delim);
  auto col = [&](const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw FormatError("raw log: missing column " + name);
    return static_cast<int>(it - names.begin());
  };
  int ci = col(item_col);
  int cu = col(user_col);
  int ct = col(time_col);
  std::vector<int> cf;
  for (const auto& f : feedback_cols) cf.push_back(col(f));

  RawLog log;
  log.feedback_names = feedback_cols;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> toks = split(line, delim);
    if (toks.size() < names.size()) {
      throw FormatError("raw log: line " + std::to_string(lineno) + ": too few columns");
    }
    RawLog::Row r;
    try {
      r.item = std::stoi(toks[ci]);
      r.user = std::stoi(toks[cu]);
      r.ts = std::stoll(toks[ct]);
      for (int c : cf) r.feedback.push_back(static_cast<uint8_t>(std::stoi(toks[c]) != 0));
    } catch (const std::exception&) {
      throw FormatError("raw log: line " + std::to_string(lineno) + ": bad value");
    }
    log.rows.push_back(std::move(r));
  }
  return log;
}

void write_raw_log(const std::string& path, const RawLog& log, char delim) {
  std::ofstream out(path);
  if (!out) throw ConfigError("raw log: cannot write " + path);
  out << "user_id" << delim << "item_id" << delim << "timestamp";
  for (const auto& f : log.feedback_names) out << delim << f;
  out << "\n";
  for (const auto& r : log.rows) {
    out << r.user << delim << r.item << delim << r.ts;
    for (uint8_t f : r.feedback) out << delim << static_cast<int>(f);
    out << "\n";
  }
}

RawLog make_synthetic_feedback_log(int n_rows, int n_users, int n_items, int n_feedbacks,
                                   const std::vector<double>& base_rates, double correlation,
                                   double weight_scale, uint64_t seed) {
  if (n_rows <= 0 || n_users <= 0 || n_items <= 0 || n_feedbacks < 2) {
    throw ConfigError("feedback log: bad sizes");
  }
  if (static_cast<int>(base_rates.size()) != n_feedbacks) {
    throw ConfigError("feedback log: base_rates size must match n_feedbacks");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(2.0));
  int latent_dim = 8;
  Matrix user_lat(n_users, latent_dim), item_lat(n_items, latent_dim);
  for (double& x : user_lat.a) x = gauss(rng);
  for (double& x : item_lat.a) x = gauss(rng);
  Matrix w = make_action_weights(n_feedbacks, latent_dim, correlation, weight_scale, rng);

  // Bias calibration on sampled (user, item) pairs.
  const int kDraws = 10000;
  std::uniform_int_distribution<int> du(0, n_users - 1);
  std::uniform_int_distribution<int> di(0, n_items - 1);
  std::vector<Vector> dots(n_feedbacks, Vector(kDraws));
  for (int i = 0; i < kDraws; ++i) {
    int u = du(rng), it = di(rng);
    for (int j = 0; j < n_feedbacks; ++j) {
      double s = 0.0;
      for (int d = 0; d < latent_dim; ++d) {
        s += w.at(j, d) * (user_lat.at(u, d) + item_lat.at(it, d));
      }
      dots[j][i] = s;
    }
  }
  Vector bias(n_feedbacks);
  for (int j = 0; j < n_feedbacks; ++j) {
    double lo = -30.0, hi = 30.0;
    for (int itn = 0; itn < 80; ++itn) {
      double mid = 0.5 * (lo + hi);
      double mean = 0.0;
      for (double s : dots[j]) mean += sigmoid(s + mid);
      mean /= kDraws;
      (mean < base_rates[j] ? lo : hi) = mid;
    }
    bias[j] = 0.5 * (lo + hi);
  }

  RawLog log;
  for (int j = 0; j < n_feedbacks; ++j) {
    log.feedback_names.push_back("fb_" + std::string(1, static_cast<char>('a' + j)));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n_rows; ++i) {
    RawLog::Row r;
    r.user = du(rng);
    r.item = di(rng);
    r.ts = i;
    r.feedback.resize(n_feedbacks);
    for (int j = 0; j < n_feedbacks; ++j) {
      double s = bias[j];
      for (int d = 0; d < latent_dim; ++d) {
        s += w.at(j, d) * (user_lat.at(r.user, d) + item_lat.at(r.item, d));
      }
      r.feedback[j] = unit(rng) < sigmoid(s) ? 1 : 0;
    }
    log.rows.push_back(std::move(r));
  }
  return log;
}

// ---- Dataset files ----

void write_dataset(const std::string& path, const Dataset& ds, bool include_truth) {
  std::ofstream out(path);
  if (!out) throw ConfigError("dataset: cannot write " + path);
  out << "# n_actions = " << ds.n_actions << "\n";
  out << "# field_vocab = ";
  for (size_t f = 0; f < ds.field_vocab.size(); ++f) {
    out << (f ? "," : "") << ds.field_vocab[f];
  }
  out << "\n";
  bool truth = include_truth && !ds.samples.empty() && ds.samples.front().has_truth;
  bool vis = !ds.samples.empty() && !ds.samples.front().observable.empty();
  out << "sample_id\tad_task_id\ttarget_action";
  for (size_t f = 0; f < ds.field_vocab.size(); ++f) out << "\tfield_" << f;
  for (int j = 1; j <= ds.n_actions; ++j) out << "\tobs_" << j;
  if (truth) {
    for (int j = 1; j <= ds.n_actions; ++j) out << "\ttrue_" << j;
  }
  if (vis) {
    for (int j = 1; j <= ds.n_actions; ++j) out << "\tvis_" << j;
  }
  out << "\n";
  for (const auto& s : ds.samples) {
    out << s.id << "\t" << s.task_id << "\t" << (s.target == kOtherTarget ? 0 : s.target + 1);
    for (int f : s.fields) out << "\t" << f;
    for (uint8_t o : s.observed) out << "\t" << static_cast<int>(o);
    if (truth) {
      for (uint8_t t : s.truth) out << "\t" << static_cast<int>(t);
    }
    if (vis) {
      for (uint8_t v : s.observable) out << "\t" << static_cast<int>(v);
    }
    out << "\n";
  }
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset: cannot open " + path);
  Dataset ds;
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.rfind("# n_actions", 0) == 0) {
      ds.n_actions = std::stoi(line.substr(line.find('=') + 1));
      continue;
    }
    if (line.rfind("# field_vocab", 0) == 0) {
      for (const auto& tok : split(line.substr(line.find('=') + 1), ',')) {
        ds.field_vocab.push_back(std::stoi(tok));
      }
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    header = split(line, '\t');
    break;
  }
  if (header.empty()) throw FormatError("dataset: missing header line");

  int n_fields = 0, n_obs = 0, n_true = 0, n_vis = 0;
  for (const auto& h : header) {
    if (h.rfind("field_", 0) == 0) ++n_fields;
    if (h.rfind("obs_", 0) == 0) ++n_obs;
    if (h.rfind("true_", 0) == 0) ++n_true;
    if (h.rfind("vis_", 0) == 0) ++n_vis;
  }
  if (n_obs == 0) throw FormatError("dataset: header has no obs_ columns");
  if (ds.n_actions == 0) ds.n_actions = n_obs;
  if (ds.n_actions != n_obs) throw FormatError("dataset: obs_ column count mismatch");

  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> toks = split(line, '\t');
    if (static_cast<int>(toks.size()) != static_cast<int>(header.size())) {
      throw FormatError("dataset: row " + std::to_string(lineno) + ": column count mismatch");
    }
    Sample s;
    int c = 0;
    s.id = std::stoll(toks[c++]);
    s.task_id = std::stoi(toks[c++]);
    int tgt = std::stoi(toks[c++]);
    s.target = tgt == 0 ? kOtherTarget : tgt - 1;
    for (int f = 0; f < n_fields; ++f) s.fields.push_back(std::stoi(toks[c++]));
    for (int j = 0; j < n_obs; ++j) s.observed.push_back(std::stoi(toks[c++]) != 0);
    for (int j = 0; j < n_true; ++j) s.truth.push_back(std::stoi(toks[c++]) != 0);
    for (int j = 0; j < n_vis; ++j) s.observable.push_back(std::stoi(toks[c++]) != 0);
    s.has_truth = n_true > 0;
    ds.samples.push_back(std::move(s));
  }
  if (ds.field_vocab.empty()) {
    ds.field_vocab.assign(n_fields, 1);
    for (const auto& s : ds.samples) {
      for (int f = 0; f < n_fields; ++f) {
        ds.field_vocab[f] = std::max(ds.field_vocab[f], s.fields[f] + 1);
      }
    }
  }
  return ds;
}

void write_tasks(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw ConfigError("tasks: cannot write " + path);
  out << "task_id\ttarget_action";
  for (int j = 1; j <= ds.n_actions; ++j) out << "\tp_" << j;
  out << "\n";
  char buf[64];
  for (const auto& t : ds.tasks) {
    out << t.task_id << "\t" << (t.target == kOtherTarget ? 0 : t.target + 1);
    for (double p : t.propensity) {
      std::snprintf(buf, sizeof(buf), "%.17g", p);
      out << "\t" << buf;
    }
    out << "\n";
  }
}

void read_tasks(const std::string& path, Dataset& ds) {
  std::ifstream in(path);
  if (!in) throw ConfigError("tasks: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("tasks: missing header");
  ds.tasks.clear();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> toks = split(line, '\t');
    if (static_cast<int>(toks.size()) != 2 + ds.n_actions) {
      throw FormatError("tasks: column count mismatch");
    }
    AdTaskProfile t;
    t.task_id = std::stoi(toks[0]);
    int tgt = std::stoi(toks[1]);
    t.target = tgt == 0 ? kOtherTarget : tgt - 1;
    for (int j = 0; j < ds.n_actions; ++j) t.propensity.push_back(std::stod(toks[2 + j]));
    t.campaign_feature = t.task_id;
    ds.tasks.push_back(std::move(t));
  }
}

}  // namespace kaml
