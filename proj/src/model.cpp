// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "kaml/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kaml {

namespace {
constexpr char kSnapshotMagic[] = "KAMLSNAP1\n";
}

Variant variant_from_string(const std::string& s) {
  if (s == "singletask") return Variant::SingleTask;
  if (s == "sharedbottom") return Variant::SharedBottom;
  if (s == "mmoe") return Variant::MMoE;
  if (s == "mmoe_hke") return Variant::MMoEHKE;
  throw ConfigError("unknown model variant: " + s);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::SingleTask: return "singletask";
    case Variant::SharedBottom: return "sharedbottom";
    case Variant::MMoE: return "mmoe";
    default: return "mmoe_hke";
  }
}

void ModelConfig::validate() const {
  if (n_actions < 1) throw ConfigError("model: n_actions must be >= 1");
  if (num_experts < 1) throw ConfigError("model: num_experts must be >= 1");
  if (embedding_dim < 1) throw ConfigError("model: embedding_dim must be >= 1");
  if (field_vocab.empty()) throw ConfigError("model: field_vocab must not be empty");
  for (int v : field_vocab) {
    if (v < 1) throw ConfigError("model: vocab sizes must be >= 1");
  }
  if (expert_hidden.empty()) throw ConfigError("model: expert_hidden must not be empty");
  if (subtower_hidden.empty()) throw ConfigError("model: subtower_hidden must not be empty");
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  auto list = [](const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  out << "n_actions = " << n_actions << "\n";
  out << "num_experts = " << num_experts << "\n";
  out << "embedding_dim = " << embedding_dim << "\n";
  out << "field_vocab = " << list(field_vocab) << "\n";
  out << "expert_hidden = " << list(expert_hidden) << "\n";
  out << "tower_hidden = " << list(tower_hidden) << "\n";
  out << "subtower_hidden = " << list(subtower_hidden) << "\n";
  out << "merge_hidden = " << list(merge_hidden) << "\n";
  out << "variant = " << variant_name(variant) << "\n";
  return out.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  KvConfig kv = KvConfig::parse_text(text);
  ModelConfig cfg;
  cfg.n_actions = kv.get_int("n_actions", cfg.n_actions);
  cfg.num_experts = kv.get_int("num_experts", cfg.num_experts);
  cfg.embedding_dim = kv.get_int("embedding_dim", cfg.embedding_dim);
  cfg.field_vocab = kv.get_int_list("field_vocab", cfg.field_vocab);
  cfg.expert_hidden = kv.get_int_list("expert_hidden", cfg.expert_hidden);
  cfg.tower_hidden = kv.get_int_list("tower_hidden", cfg.tower_hidden);
  cfg.subtower_hidden = kv.get_int_list("subtower_hidden", cfg.subtower_hidden);
  cfg.merge_hidden = kv.get_int_list("merge_hidden", cfg.merge_hidden);
  cfg.variant = variant_from_string(kv.get_str("variant", variant_name(cfg.variant)));
  kv.reject_unknown();
  cfg.validate();
  return cfg;
}

CvrModel::CvrModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  build(init_seed);
}

void CvrModel::build(uint64_t init_seed) {
  std::mt19937_64 rng(init_seed);
  std::normal_distribution<double> emb_init(0.0, 0.01);
  for (size_t f = 0; f < cfg_.field_vocab.size(); ++f) {
    Tensor& t = ps_.add("emb." + std::to_string(f), cfg_.field_vocab[f], cfg_.embedding_dim);
    for (double& v : t.v) v = emb_init(rng);
    emb_.push_back(&t);
  }
  int xd = cfg_.x_dim();

  if (cfg_.variant == Variant::SingleTask) {
    // One independent MLP head per task, straight off the embeddings.
    std::vector<int> widths = {xd};
    widths.insert(widths.end(), cfg_.expert_hidden.begin(), cfg_.expert_hidden.end());
    widths.insert(widths.end(), cfg_.tower_hidden.begin(), cfg_.tower_hidden.end());
    widths.push_back(1);
    for (int j = 0; j < cfg_.n_actions; ++j) {
      towers_.push_back(mlp_make(ps_, "tower." + std::to_string(j), MlpSpec(widths), rng));
    }
    return;
  }

  int K = cfg_.experts_effective();
  std::vector<int> expert_widths = {xd};
  expert_widths.insert(expert_widths.end(), cfg_.expert_hidden.begin(), cfg_.expert_hidden.end());
  for (int k = 0; k < K; ++k) {
    experts_.push_back(mlp_make(ps_, "expert." + std::to_string(k), MlpSpec(expert_widths), rng));
  }
  for (int j = 0; j < cfg_.n_actions; ++j) {
    Tensor& g = ps_.add("gate." + std::to_string(j), K, xd);
    double a = std::sqrt(6.0 / (xd + K));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& v : g.v) v = dist(rng);
    gate_.push_back(&g);
  }

  int bo = cfg_.bottom_out();
  if (cfg_.variant == Variant::MMoEHKE) {
    std::vector<int> sub_widths = {bo};
    sub_widths.insert(sub_widths.end(), cfg_.subtower_hidden.begin(), cfg_.subtower_hidden.end());
    std::vector<int> merge_widths = {cfg_.subtower_hidden.back()};
    merge_widths.insert(merge_widths.end(), cfg_.merge_hidden.begin(), cfg_.merge_hidden.end());
    merge_widths.push_back(1);
    for (int j = 0; j < cfg_.n_actions; ++j) {
      std::string p = "tower." + std::to_string(j);
      orig_.push_back(mlp_make(ps_, p + ".orig", MlpSpec(sub_widths), rng));
      ext_.push_back(mlp_make(ps_, p + ".ext", MlpSpec(sub_widths), rng));
      merge_.push_back(mlp_make(ps_, p + ".merge", MlpSpec(merge_widths), rng));
    }
  } else {
    std::vector<int> tower_widths = {bo};
    tower_widths.insert(tower_widths.end(), cfg_.tower_hidden.begin(), cfg_.tower_hidden.end());
    tower_widths.push_back(1);
    for (int j = 0; j < cfg_.n_actions; ++j) {
      towers_.push_back(mlp_make(ps_, "tower." + std::to_string(j), MlpSpec(tower_widths), rng));
    }
  }
}

Vector CvrModel::embed(const std::vector<int>& fields) const {
  if (fields.size() != emb_.size()) throw DimError("model: field count mismatch");
  Vector x(cfg_.x_dim());
  int d = cfg_.embedding_dim;
  for (size_t f = 0; f < fields.size(); ++f) {
    int id = fields[f];
    if (id < 0 || id >= emb_[f]->rows) id = 0;  // reserved OOV row
    const double* row = emb_[f]->v.data() + static_cast<size_t>(id) * d;
    std::memcpy(x.data() + f * d, row, sizeof(double) * d);
  }
  return x;
}

Prediction CvrModel::forward(const std::vector<int>& fields, const std::vector<uint8_t>& route,
                             ForwardCache* cache) const {
  int N = cfg_.n_actions;
  if (cfg_.variant == Variant::MMoEHKE) {
    if (static_cast<int>(route.size()) != N) throw DimError("model: route size mismatch");
    for (uint8_t m : route) {
      if (m > 1) throw DimError("model: routing indicator must be 0 or 1");
    }
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.fields = fields;
  c.route = route;
  c.x = embed(fields);

  Prediction pred;
  pred.logits.resize(N);

  if (cfg_.variant == Variant::SingleTask) {
    c.tower_caches.resize(N);
    for (int j = 0; j < N; ++j) {
      pred.logits[j] = mlp_forward(towers_[j], c.x, &c.tower_caches[j])[0];
    }
  } else {
    int K = cfg_.experts_effective();
    c.expert_caches.resize(K);
    c.expert_out.resize(K);
    for (int k = 0; k < K; ++k) {
      c.expert_out[k] = mlp_forward(experts_[k], c.x, &c.expert_caches[k]);
    }
    c.gates.resize(N);
    c.h.assign(N, Vector(cfg_.bottom_out(), 0.0));
    for (int j = 0; j < N; ++j) {
      Vector gl(K);
      const Tensor& W = *gate_[j];
      for (int k = 0; k < K; ++k) {
        const double* w = W.v.data() + static_cast<size_t>(k) * W.cols;
        double acc = 0.0;
        for (int ci = 0; ci < W.cols; ++ci) acc += w[ci] * c.x[ci];
        gl[k] = acc;
      }
      c.gates[j] = softmax(gl);
      Vector& h = c.h[j];
      for (int k = 0; k < K; ++k) {
        double g = c.gates[j][k];
        const Vector& fo = c.expert_out[k];
        for (size_t d = 0; d < h.size(); ++d) h[d] += g * fo[d];
      }
    }
    if (cfg_.variant == Variant::MMoEHKE) {
      c.sub_caches.resize(N);
      c.merge_caches.resize(N);
      for (int j = 0; j < N; ++j) {
        const MlpHandle& sub = route[j] ? orig_[j] : ext_[j];
        Vector sub_out = mlp_forward(sub, c.h[j], &c.sub_caches[j]);
        pred.logits[j] = mlp_forward(merge_[j], sub_out, &c.merge_caches[j])[0];
      }
    } else {
      c.tower_caches.resize(N);
      for (int j = 0; j < N; ++j) {
        pred.logits[j] = mlp_forward(towers_[j], c.h[j], &c.tower_caches[j])[0];
      }
    }
  }

  pred.probs.resize(N);
  for (int j = 0; j < N; ++j) pred.probs[j] = sigmoid(pred.logits[j]);
  c.pred = pred;
  return pred;
}

void CvrModel::backward(const ForwardCache& c, const Vector& d_logits) {
  int N = cfg_.n_actions;
  if (static_cast<int>(d_logits.size()) != N) throw DimError("model: d_logits size mismatch");
  if (c.x.empty()) throw StateError("model: backward without forward cache");
  int xd = cfg_.x_dim();
  Vector dx(xd, 0.0);

  if (cfg_.variant == Variant::SingleTask) {
    for (int j = 0; j < N; ++j) {
      if (d_logits[j] == 0.0) continue;
      Vector d = mlp_backward(towers_[j], c.tower_caches[j], {d_logits[j]});
      for (int i = 0; i < xd; ++i) dx[i] += d[i];
    }
  } else {
    int K = cfg_.experts_effective();
    int bo = cfg_.bottom_out();
    std::vector<Vector> d_expert(K, Vector(bo, 0.0));
    std::vector<uint8_t> expert_touched(K, 0);
    for (int j = 0; j < N; ++j) {
      if (d_logits[j] == 0.0) continue;
      Vector dh;
      if (cfg_.variant == Variant::MMoEHKE) {
        Vector d_sub = mlp_backward(merge_[j], c.merge_caches[j], {d_logits[j]});
        const MlpHandle& sub = c.route[j] ? orig_[j] : ext_[j];
        dh = mlp_backward(sub, c.sub_caches[j], d_sub);
      } else {
        dh = mlp_backward(towers_[j], c.tower_caches[j], {d_logits[j]});
      }
      // Through the gate-weighted mixture.
      const Vector& g = c.gates[j];
      Vector d_gate(K);
      double dot_gm = 0.0;
      for (int k = 0; k < K; ++k) {
        double dg = 0.0;
        const Vector& fo = c.expert_out[k];
        for (int d = 0; d < bo; ++d) {
          d_expert[k][d] += g[k] * dh[d];
          dg += fo[d] * dh[d];
        }
        expert_touched[k] = 1;
        d_gate[k] = dg;
        dot_gm += g[k] * dg;
      }
      // Softmax backward, then the gate weight matrix.
      Tensor& W = *gate_[j];
      for (int k = 0; k < K; ++k) {
        double dz = g[k] * (d_gate[k] - dot_gm);
        if (dz == 0.0) continue;
        double* gw = W.g.data() + static_cast<size_t>(k) * W.cols;
        const double* w = W.v.data() + static_cast<size_t>(k) * W.cols;
        for (int i = 0; i < xd; ++i) {
          gw[i] += dz * c.x[i];
          dx[i] += dz * w[i];
        }
      }
    }
    for (int k = 0; k < K; ++k) {
      if (!expert_touched[k]) continue;
      Vector d = mlp_backward(experts_[k], c.expert_caches[k], d_expert[k]);
      for (int i = 0; i < xd; ++i) dx[i] += d[i];
    }
  }

  // Embedding rows.
  int d = cfg_.embedding_dim;
  for (size_t f = 0; f < c.fields.size(); ++f) {
    int id = c.fields[f];
    if (id < 0 || id >= emb_[f]->rows) id = 0;
    double* gr = emb_[f]->g.data() + static_cast<size_t>(id) * d;
    for (int i = 0; i < d; ++i) gr[i] += dx[f * d + i];
  }
}

double CvrModel::serve_score(const std::vector<int>& fields, int action) const {
  if (action < 0 || action >= cfg_.n_actions) {
    throw ConfigError("serve: unknown action " + std::to_string(action + 1));
  }
  std::vector<uint8_t> route(cfg_.n_actions, 1);
  return forward(fields, route).probs[action];
}

void CvrModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("snapshot: cannot write " + path);
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic) - 1);
  std::string cfg = cfg_.to_text();
  uint32_t len = static_cast<uint32_t>(cfg.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(cfg.data(), len);
  uint64_t n = ps_.tensors().size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const auto& t : ps_.tensors()) {
    uint32_t nl = static_cast<uint32_t>(t.name.size());
    out.write(reinterpret_cast<const char*>(&nl), sizeof(nl));
    out.write(t.name.data(), nl);
    int32_t rc[2] = {t.rows, t.cols};
    out.write(reinterpret_cast<const char*>(rc), sizeof(rc));
    out.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("snapshot: write failed for " + path);
}

CvrModel CvrModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("snapshot: cannot open " + path);
  char magic[sizeof(kSnapshotMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
    throw FormatError("snapshot: bad magic in " + path);
  }
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string cfg_text(len, '\0');
  in.read(cfg_text.data(), len);
  ModelConfig cfg = ModelConfig::from_text(cfg_text);
  CvrModel model(cfg, 0);
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (n != model.ps_.tensors().size()) {
    throw FormatError("snapshot: tensor count mismatch in " + path);
  }
  for (auto& t : model.ps_.tensors()) {
    uint32_t nl = 0;
    in.read(reinterpret_cast<char*>(&nl), sizeof(nl));
    std::string name(nl, '\0');
    in.read(name.data(), nl);
    int32_t rc[2];
    in.read(reinterpret_cast<char*>(rc), sizeof(rc));
    if (name != t.name || rc[0] != t.rows || rc[1] != t.cols) {
      throw FormatError("snapshot: shape manifest mismatch at " + name);
    }
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (!in) throw FormatError("snapshot: truncated file " + path);
  }
  return model;
}

}  // namespace kaml
