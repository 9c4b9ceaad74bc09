// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// `key = value` config files. Keys are dotted paths; '#' starts a comment.
// Unknown keys are rejected so typos fail loudly instead of silently using
// defaults.

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kaml/engine.hpp"

namespace kaml {

class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_text(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_str(const std::string& key, const std::string& def);
  double get_double(const std::string& key, double def);
  int get_int(const std::string& key, int def);
  uint64_t get_u64(const std::string& key, uint64_t def);
  bool get_bool(const std::string& key, bool def);
  // Comma-separated lists.
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def);
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& def);
  std::vector<uint64_t> get_u64_list(const std::string& key, const std::vector<uint64_t>& def);

  void set(const std::string& key, const std::string& value);

  // Marks every key with this prefix as consumed (for per-action keys read
  // in a loop, e.g. "adm.alpha.").
  void consume_prefix(const std::string& prefix);

  // Throws ConfigError listing keys that were never read.
  void reject_unknown() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> consumed_;
};

}  // namespace kaml
