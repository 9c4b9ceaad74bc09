// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// One config file drives everything: dataset generation or file paths, mask
// thresholds, model shape, loss weights and the training schedule. Unknown
// keys are rejected at load.

#pragma once

#include <string>
#include <vector>

#include "kaml/data.hpp"
#include "kaml/trainer.hpp"

namespace kaml {

struct RawLogConfig {
  std::string file;
  std::string item_column = "item_id";
  std::string user_column = "user_id";
  std::string time_column = "timestamp";
  std::vector<std::string> feedback_columns;
  char delim = '\t';
  AdaptConfig adapt;
};

struct ExperimentConfig {
  DatagenConfig datagen;
  TrainConfig train;
  RawLogConfig raw;
  std::string train_file;
  std::string test_file;
  std::string tasks_file;
  std::string out_dir = ".";
  std::vector<std::string> ablate_variants;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_kv(KvConfig& kv);

  // Generated data when no files are configured, otherwise the files.
  GeneratedData load_data() const;
};

}  // namespace kaml
