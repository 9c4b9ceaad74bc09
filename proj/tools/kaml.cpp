// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point. Subcommands: generate, train, ablate,
// adapt-public. Exit codes: 0 success, 1 runtime failure, 2 config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kaml/experiment.hpp"
#include "kaml/masking.hpp"
#include "kaml/metrics.hpp"
#include "kaml/trainer.hpp"

namespace fs = std::filesystem;
using namespace kaml;

namespace {

bool verbose() {
  const char* v = std::getenv("KAML_LOG");
  return v && std::string(v) != "" && std::string(v) != "quiet";
}

void log_line(const std::string& msg) {
  if (verbose()) std::cerr << "[kaml] " << msg << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  int64_t seed = -1;
  std::string variant;
  std::string mask;
};

ExperimentConfig load_config(const CommonOpts& opts) {
  ExperimentConfig ec = opts.config_path.empty()
                            ? ExperimentConfig{}
                            : ExperimentConfig::from_file(opts.config_path);
  if (!opts.out_dir.empty()) ec.out_dir = opts.out_dir;
  if (opts.seed >= 0) {
    ec.datagen.seed = static_cast<uint64_t>(opts.seed);
    ec.train.seeds = {static_cast<uint64_t>(opts.seed)};
  }
  if (!opts.variant.empty()) ec.train.variant = variant_from_string(opts.variant);
  if (!opts.mask.empty()) ec.train.mask = mask_strategy_from_string(opts.mask);
  fs::create_directories(ec.out_dir);
  return ec;
}

int cmd_generate(const CommonOpts& opts, bool observed_only) {
  ExperimentConfig ec = load_config(opts);
  log_line("generating synthetic dataset, seed " + std::to_string(ec.datagen.seed));
  GeneratedData data = generate_dataset(ec.datagen);
  fs::path out(ec.out_dir);
  write_dataset((out / "train.tsv").string(), data.train, !observed_only);
  write_dataset((out / "test.tsv").string(), data.test, !observed_only);
  write_tasks((out / "tasks.tsv").string(), data.train);

  MaskMatrix base = build_mask(data.train, MaskStrategy::Base, ec.train.adm);
  MaskMatrix adm = build_mask(data.train, MaskStrategy::Adm, ec.train.adm);
  write_coverage_csv((out / "coverage.csv").string(), coverage_stats(data.train, base),
                     coverage_stats(data.train, adm));
  log_line("wrote " + std::to_string(data.train.size()) + " train / " +
           std::to_string(data.test.size()) + " test rows to " + ec.out_dir);
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  ExperimentConfig ec = load_config(opts);
  GeneratedData data = ec.load_data();
  uint64_t seed = ec.train.seeds.front();
  log_line("training " + variant_name(ec.train.variant) + " / mask " +
           mask_strategy_name(ec.train.mask) + ", seed " + std::to_string(seed));
  TrainResult res = train(data.train, data.test, ec.train, seed);
  fs::path out(ec.out_dir);
  res.model.save((out / "snapshot.bin").string());
  write_history_tsv((out / "history.tsv").string(), res.history);
  const MetricsReport& rep = res.history.epochs.back().test;
  write_report_csv((out / "report.csv").string(), rep);
  write_text(out / "report.json", report_to_json(rep));
  if (rep.overall_auc) {
    std::cout << "overall_auc " << *rep.overall_auc << " overall_logloss "
              << rep.overall_logloss << "\n";
  }
  return 0;
}

int cmd_ablate(const CommonOpts& opts, const std::string& variants_arg) {
  ExperimentConfig ec = load_config(opts);
  GeneratedData data = ec.load_data();
  std::vector<std::string> presets = ec.ablate_variants;
  if (!variants_arg.empty()) {
    presets.clear();
    std::string cur;
    for (char ch : variants_arg + ",") {
      if (ch == ',') {
        if (!cur.empty()) presets.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
  }
  if (presets.empty()) presets = default_ablation_grid();
  log_line("ablation over " + std::to_string(presets.size()) + " variants x " +
           std::to_string(ec.train.seeds.size()) + " seeds");
  std::vector<AblationRow> rows = run_ablation(data.train, data.test, ec.train, presets,
                                               ec.train.seeds);
  fs::path out(ec.out_dir);
  write_ablation_csv((out / "ablation.csv").string(), rows);
  write_text(out / "ablation.json", ablation_to_json(rows));
  for (const auto& r : rows) {
    std::cout << r.name << " overall_auc ";
    if (r.overall_auc.mean) {
      std::cout << *r.overall_auc.mean << " +- " << r.overall_auc.stddev;
    } else {
      std::cout << "unavailable";
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_adapt_public(const CommonOpts& opts, const std::string& raw_path,
                     const std::string& protocol_arg) {
  ExperimentConfig ec = load_config(opts);
  if (!raw_path.empty()) ec.raw.file = raw_path;
  if (ec.raw.file.empty()) throw ConfigError("adapt-public: raw log path required");
  if (ec.raw.feedback_columns.empty()) {
    throw ConfigError("adapt-public: raw.feedback_columns must be configured");
  }
  Protocol protocol = protocol_from_string(protocol_arg);
  RawLog raw = read_raw_log(ec.raw.file, ec.raw.item_column, ec.raw.user_column,
                            ec.raw.time_column, ec.raw.feedback_columns, ec.raw.delim);
  log_line("adapting " + std::to_string(raw.rows.size()) + " rows, protocol " +
           protocol_name(protocol));
  auto [train_set, test_set] = kuairand_adapt(raw, protocol, ec.raw.adapt, ec.datagen.seed);
  fs::path out(ec.out_dir);
  std::string tag = protocol_name(protocol);
  write_dataset((out / ("train_" + tag + ".tsv")).string(), train_set, true);
  write_dataset((out / ("test_" + tag + ".tsv")).string(), test_set, true);
  write_tasks((out / ("tasks_" + tag + ".tsv")).string(), train_set);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAML lab: CVR prediction with asymmetric multi-label data"};
  app.require_subcommand(1);

  CommonOpts opts;
  bool observed_only = false;
  std::string variants_arg, raw_path, protocol_arg = "kaml";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "config file of key = value lines");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", opts.seed, "seed override");
  };

  CLI::App* gen = app.add_subcommand("generate", "generate synthetic dataset files");
  add_common(gen);
  gen->add_flag("--observed-only", observed_only, "omit true-label columns");

  CLI::App* tr = app.add_subcommand("train", "train one model");
  add_common(tr);
  tr->add_option("--variant", opts.variant, "singletask|sharedbottom|mmoe|mmoe_hke");
  tr->add_option("--mask", opts.mask, "base|adm|observed");

  CLI::App* ab = app.add_subcommand("ablate", "train the ablation grid");
  add_common(ab);
  ab->add_option("--variants", variants_arg, "comma-separated preset names");

  CLI::App* ad = app.add_subcommand("adapt-public", "adapt a multi-feedback log");
  add_common(ad);
  ad->add_option("--raw", raw_path, "raw log path (overrides raw.file)");
  ad->add_option("--protocol", protocol_arg, "oracle|vanilla|kaml");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(opts, observed_only);
    if (tr->parsed()) return cmd_train(opts);
    if (ab->parsed()) return cmd_ablate(opts, variants_arg);
    if (ad->parsed()) return cmd_adapt_public(opts, raw_path, protocol_arg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
