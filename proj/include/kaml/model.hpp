// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// The CVR network: shared embedding layer, MMoE bottom (softmax gates over
// shared experts), and per-task towers. Tower flavors: a plain MLP head, or
// the HKE pair of sub-towers (original vs extended samples) merged by a
// routing indicator. SingleTask and SharedBottom baselines share the same
// code path: SharedBottom is MMoE with one expert, SingleTask drops the
// bottom entirely.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kaml/config.hpp"
#include "kaml/engine.hpp"

namespace kaml {

enum class Variant { SingleTask, SharedBottom, MMoE, MMoEHKE };

Variant variant_from_string(const std::string& s);
std::string variant_name(Variant v);

struct ModelConfig {
  int n_actions = 5;
  int num_experts = 4;
  int embedding_dim = 8;
  std::vector<int> field_vocab;
  std::vector<int> expert_hidden = {64, 32};
  std::vector<int> tower_hidden = {32, 16};
  std::vector<int> subtower_hidden = {32};
  std::vector<int> merge_hidden = {16};
  Variant variant = Variant::MMoE;

  int x_dim() const { return static_cast<int>(field_vocab.size()) * embedding_dim; }
  int bottom_out() const { return expert_hidden.back(); }
  int experts_effective() const { return variant == Variant::SharedBottom ? 1 : num_experts; }
  void validate() const;

  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
};

struct Prediction {
  Vector logits;
  Vector probs;  // probs[j] = sigmoid(logits[j]), always in (0, 1)
};

struct ForwardCache {
  std::vector<int> fields;
  Vector x;
  std::vector<MlpCache> expert_caches;
  std::vector<Vector> expert_out;
  std::vector<Vector> gates;       // per task, distribution over experts
  std::vector<Vector> h;           // per task bottom output
  std::vector<MlpCache> tower_caches;  // base / single-task towers
  std::vector<MlpCache> sub_caches;    // HKE: cache of the routed sub-tower
  std::vector<MlpCache> merge_caches;
  std::vector<uint8_t> route;
  Prediction pred;
};

class CvrModel {
 public:
  CvrModel(const ModelConfig& cfg, uint64_t init_seed);

  // Handles point into the param store; moves are fine (deque storage keeps
  // element addresses), copies are not.
  CvrModel(const CvrModel&) = delete;
  CvrModel& operator=(const CvrModel&) = delete;
  CvrModel(CvrModel&&) = default;
  CvrModel& operator=(CvrModel&&) = default;

  // route[j] is the HKE indicator M for task j: 1 routes through the
  // "original" sub-tower, 0 through the "extended" one. Ignored by non-HKE
  // variants. Values outside {0,1} are a domain error.
  Prediction forward(const std::vector<int>& fields, const std::vector<uint8_t>& route,
                     ForwardCache* cache = nullptr) const;

  // Accumulates dLoss/dtheta into the parameter store. d_logits[j] is the
  // upstream gradient on task j's logit; tasks with exactly zero gradient are
  // skipped, so their tower parameters receive exactly zero.
  void backward(const ForwardCache& cache, const Vector& d_logits);

  // Serving always addresses the advertiser's own target action, hence M=1.
  double serve_score(const std::vector<int>& fields, int action) const;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }

  void save(const std::string& path) const;
  static CvrModel load(const std::string& path);

 private:
  void build(uint64_t init_seed);
  Vector embed(const std::vector<int>& fields) const;

  ModelConfig cfg_;
  ParamStore ps_;
  std::vector<Tensor*> emb_;
  std::vector<Tensor*> gate_;  // per task: K x x_dim
  std::vector<MlpHandle> experts_;
  std::vector<MlpHandle> towers_;      // base / single-task
  std::vector<MlpHandle> orig_, ext_, merge_;  // HKE
};

}  // namespace kaml
