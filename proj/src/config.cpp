// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "kaml/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace kaml {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

KvConfig KvConfig::parse_text(const std::string& text) {
  KvConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: line " + std::to_string(lineno) + ": empty key");
    if (cfg.kv_.count(key)) throw ConfigError("config: duplicate key " + key);
    cfg.kv_[key] = val;
  }
  return cfg;
}

std::string KvConfig::get_str(const std::string& key, const std::string& def) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

double KvConfig::get_double(const std::string& key, double def) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key " + key + ": not a number: " + it->second);
  }
}

int KvConfig::get_int(const std::string& key, int def) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    long v = std::stol(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError("config: key " + key + ": not an integer: " + it->second);
  }
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t def) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key " + key + ": not an integer: " + it->second);
  }
}

bool KvConfig::get_bool(const std::string& key, bool def) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& s = it->second;
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("config: key " + key + ": not a boolean: " + s);
}

std::vector<int> KvConfig::get_int_list(const std::string& key, const std::vector<int>& def) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  std::vector<int> out;
  for (const auto& tok : split_commas(it->second)) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("config: key " + key + ": bad list element: " + tok);
    }
  }
  return out;
}

std::vector<double> KvConfig::get_double_list(const std::string& key,
                                              const std::vector<double>& def) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  std::vector<double> out;
  for (const auto& tok : split_commas(it->second)) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("config: key " + key + ": bad list element: " + tok);
    }
  }
  return out;
}

std::vector<uint64_t> KvConfig::get_u64_list(const std::string& key,
                                             const std::vector<uint64_t>& def) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  std::vector<uint64_t> out;
  for (const auto& tok : split_commas(it->second)) {
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw ConfigError("config: key " + key + ": bad list element: " + tok);
    }
  }
  return out;
}

void KvConfig::set(const std::string& key, const std::string& value) { kv_[key] = value; }

void KvConfig::consume_prefix(const std::string& prefix) {
  for (const auto& [k, v] : kv_) {
    if (k.rfind(prefix, 0) == 0) consumed_.insert(k);
  }
}

void KvConfig::reject_unknown() const {
  std::string bad;
  for (const auto& [k, v] : kv_) {
    if (!consumed_.count(k)) bad += (bad.empty() ? "" : ", ") + k;
  }
  if (!bad.empty()) throw ConfigError("config: unknown keys: " + bad);
}

}  // namespace kaml
