// Copyright (c) 2026 kaml-lab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense-network core: matrix/vector ops, MLP forward/backward with
// cached activations, and a finite-difference gradient checker. Everything is
// 64-bit and shape-checked; analytic gradients are verified against central
// differences in the test suite.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace kaml {

using Vector = std::vector<double>;

struct DimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
};

// y = Wx + b.  Shapes are validated, the result is checked finite.
Vector affine_forward(const Matrix& W, const Vector& b, const Vector& x);

// Numerically stable softmax (max subtraction). Empty input is a domain error.
Vector softmax(const Vector& v);

double sigmoid(double z);

// log(max(p, 1e-12)); keeps losses finite on saturated sigmoids.
double clamped_log(double p);

constexpr double kProbEps = 1e-12;

bool all_finite(const Vector& v);

// Layer widths including the input width: widths[0] = in, widths.back() = out.
// Hidden activations are ReLU (derivative at 0 defined as 0), output identity.
struct MlpSpec {
  std::vector<int> widths;

  MlpSpec() = default;
  explicit MlpSpec(std::vector<int> w) : widths(std::move(w)) { validate(); }
  int layers() const { return static_cast<int>(widths.size()) - 1; }
  int in_width() const { return widths.front(); }
  int out_width() const { return widths.back(); }
  void validate() const;
};

// A named parameter tensor with a same-shaped gradient accumulator.
struct Tensor {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> v;  // values
  std::vector<double> g;  // gradient accumulator

  size_t size() const { return v.size(); }
};

// Named parameter tensors in insertion order. References returned by add()
// stay valid (deque storage).
class ParamStore {
 public:
  Tensor& add(const std::string& name, int rows, int cols);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::deque<Tensor>& tensors() { return tensors_; }
  const std::deque<Tensor>& tensors() const { return tensors_; }

  void zero_grad();
  size_t scalar_count() const;

 private:
  std::deque<Tensor> tensors_;
  std::unordered_map<std::string, size_t> index_;
};

// Resolved handle to one MLP's parameters inside a ParamStore.
struct MlpHandle {
  MlpSpec spec;
  std::vector<Tensor*> W;
  std::vector<Tensor*> b;
};

struct MlpCache {
  // acts[0] is the input, acts[l] the post-activation output of layer l.
  std::vector<Vector> acts;
};

// Adds and initializes the parameters "<prefix>.W<l>" / "<prefix>.b<l>".
// Weights ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)), biases zero.
MlpHandle mlp_make(ParamStore& ps, const std::string& prefix, const MlpSpec& spec,
                   std::mt19937_64& rng);

// Re-resolves an existing MLP (e.g. after snapshot load).
MlpHandle mlp_bind(ParamStore& ps, const std::string& prefix, const MlpSpec& spec);

Vector mlp_forward(const MlpHandle& mlp, const Vector& x, MlpCache* cache = nullptr);

// Accumulates parameter gradients, returns dLoss/dInput. Requires the cache
// of the matching forward call.
Vector mlp_backward(const MlpHandle& mlp, const MlpCache& cache, const Vector& d_out);

// Compares the analytic gradients currently stored in `ps` against central
// finite differences of `loss`. Returns the max over all parameters of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(ParamStore& ps, const std::function<double()>& loss, double eps = 1e-5);

}  // namespace kaml
