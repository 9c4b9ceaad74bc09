// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "kaml/engine.hpp"

#include <algorithm>
#include <cmath>

namespace kaml {

bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Vector affine_forward(const Matrix& W, const Vector& b, const Vector& x) {
  if (W.cols != static_cast<int>(x.size()) || W.rows != static_cast<int>(b.size())) {
    throw DimError("affine_forward: shape mismatch (" + std::to_string(W.rows) + "x" +
                   std::to_string(W.cols) + ") * " + std::to_string(x.size()) + " + " +
                   std::to_string(b.size()));
  }
  Vector y(W.rows);
  for (int r = 0; r < W.rows; ++r) {
    const double* w = W.row(r);
    double acc = b[r];
    for (int c = 0; c < W.cols; ++c) acc += w[c] * x[c];
    y[r] = acc;
  }
  if (!all_finite(y)) throw NumericError("affine_forward: non-finite output");
  return y;
}

Vector softmax(const Vector& v) {
  if (v.empty()) throw DimError("softmax: empty input");
  double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) throw NumericError("softmax: non-finite input");
  Vector out(v.size());
  double sum = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& o : out) o /= sum;
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

double clamped_log(double p) { return std::log(std::max(p, kProbEps)); }

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("MlpSpec: need at least one layer");
  for (int w : widths) {
    if (w <= 0) throw ConfigError("MlpSpec: widths must be positive");
  }
}

Tensor& ParamStore::add(const std::string& name, int rows, int cols) {
  if (index_.count(name)) throw StateError("ParamStore: duplicate tensor " + name);
  if (rows <= 0 || cols <= 0) throw DimError("ParamStore: bad shape for " + name);
  Tensor t;
  t.name = name;
  t.rows = rows;
  t.cols = cols;
  t.v.assign(static_cast<size_t>(rows) * cols, 0.0);
  t.g.assign(static_cast<size_t>(rows) * cols, 0.0);
  index_[name] = tensors_.size();
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw StateError("ParamStore: unknown tensor " + name);
  return tensors_[it->second];
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw StateError("ParamStore: unknown tensor " + name);
  return tensors_[it->second];
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) std::fill(t.g.begin(), t.g.end(), 0.0);
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

MlpHandle mlp_make(ParamStore& ps, const std::string& prefix, const MlpSpec& spec,
                   std::mt19937_64& rng) {
  spec.validate();
  MlpHandle h;
  h.spec = spec;
  for (int l = 0; l < spec.layers(); ++l) {
    int in = spec.widths[l];
    int out = spec.widths[l + 1];
    Tensor& W = ps.add(prefix + ".W" + std::to_string(l), out, in);
    Tensor& b = ps.add(prefix + ".b" + std::to_string(l), out, 1);
    double a = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& w : W.v) w = dist(rng);
    h.W.push_back(&W);
    h.b.push_back(&b);
  }
  return h;
}

MlpHandle mlp_bind(ParamStore& ps, const std::string& prefix, const MlpSpec& spec) {
  spec.validate();
  MlpHandle h;
  h.spec = spec;
  for (int l = 0; l < spec.layers(); ++l) {
    h.W.push_back(&ps.at(prefix + ".W" + std::to_string(l)));
    h.b.push_back(&ps.at(prefix + ".b" + std::to_string(l)));
  }
  return h;
}

Vector mlp_forward(const MlpHandle& mlp, const Vector& x, MlpCache* cache) {
  if (static_cast<int>(x.size()) != mlp.spec.in_width()) {
    throw DimError("mlp_forward: input width " + std::to_string(x.size()) + ", expected " +
                   std::to_string(mlp.spec.in_width()));
  }
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(x);
  }
  Vector cur = x;
  int L = mlp.spec.layers();
  for (int l = 0; l < L; ++l) {
    const Tensor& W = *mlp.W[l];
    const Tensor& b = *mlp.b[l];
    Vector next(W.rows);
    for (int r = 0; r < W.rows; ++r) {
      const double* w = W.v.data() + static_cast<size_t>(r) * W.cols;
      double acc = b.v[r];
      for (int c = 0; c < W.cols; ++c) acc += w[c] * cur[c];
      next[r] = acc;
    }
    if (l + 1 < L) {
      for (double& u : next) u = u > 0.0 ? u : 0.0;  // ReLU
    }
    if (cache) cache->acts.push_back(next);
    cur = std::move(next);
  }
  if (!all_finite(cur)) throw NumericError("mlp_forward: non-finite output");
  return cur;
}

Vector mlp_backward(const MlpHandle& mlp, const MlpCache& cache, const Vector& d_out) {
  int L = mlp.spec.layers();
  if (static_cast<int>(cache.acts.size()) != L + 1) {
    throw StateError("mlp_backward: forward cache missing or stale");
  }
  Vector d = d_out;
  for (int l = L - 1; l >= 0; --l) {
    Tensor& W = *mlp.W[l];
    Tensor& b = *mlp.b[l];
    const Vector& in = cache.acts[l];
    const Vector& out = cache.acts[l + 1];
    if (static_cast<int>(d.size()) != W.rows) throw DimError("mlp_backward: shape mismatch");
    // d_pre: ReLU gate on hidden layers (output layer is identity).
    if (l + 1 < L) {
      for (int r = 0; r < W.rows; ++r) {
        if (out[r] <= 0.0) d[r] = 0.0;
      }
    }
    for (int r = 0; r < W.rows; ++r) {
      double dr = d[r];
      if (dr == 0.0) continue;
      double* gw = W.g.data() + static_cast<size_t>(r) * W.cols;
      for (int c = 0; c < W.cols; ++c) gw[c] += dr * in[c];
      b.g[r] += dr;
    }
    Vector d_in(W.cols, 0.0);
    for (int r = 0; r < W.rows; ++r) {
      double dr = d[r];
      if (dr == 0.0) continue;
      const double* w = W.v.data() + static_cast<size_t>(r) * W.cols;
      for (int c = 0; c < W.cols; ++c) d_in[c] += dr * w[c];
    }
    d = std::move(d_in);
  }
  return d;
}

double grad_check(ParamStore& ps, const std::function<double()>& loss, double eps) {
  double max_rel = 0.0;
  for (auto& t : ps.tensors()) {
    for (size_t i = 0; i < t.size(); ++i) {
      double orig = t.v[i];
      t.v[i] = orig + eps;
      double lp = loss();
      t.v[i] = orig - eps;
      double lm = loss();
      t.v[i] = orig;
      if (!std::isfinite(lp) || !std::isfinite(lm)) {
        throw NumericError("grad_check: non-finite loss at " + t.name);
      }
      double numeric = (lp - lm) / (2.0 * eps);
      double analytic = t.g[i];
      double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      double rel = std::fabs(analytic - numeric) / denom;
      // Tiny derivatives drown in the O(eps^2) truncation noise of the
      // central difference itself; treat |a-n| below that floor as agreement.
      if (std::fabs(analytic - numeric) < 1e-7) rel = 0.0;
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace kaml
