// Copyright 2026 The Bundlerec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bundlerec/common.hpp"

// Small differentiable core: dense PReLU layers, a few fixed elementwise
// ops, softmax, binary cross-entropy, Adam and a finite-difference checker.
// Batched tensors keep one sample per column.
namespace bundlerec::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Throws ShapeError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Matrix v);
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParamRefs = std::vector<Parameter*>;

void zero_grads(const ParamRefs& params);
void set_frozen(const ParamRefs& params, bool frozen);

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void glorot_init(Matrix& m, int fan_in, int fan_out, Rng& rng);

enum class Activation { kLinear, kPRelu };

inline constexpr double kPReluInitSlope = 0.25;

struct DenseCache {
  Matrix input;
  Matrix pre;
};

// y = act(W x + b), act = PReLU with one learnable slope per output unit.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(const std::string& name, int in, int out, Activation act,
             Rng& rng);

  int in_dim() const { return static_cast<int>(weight.value.cols()); }
  int out_dim() const { return static_cast<int>(weight.value.rows()); }
  Activation activation() const { return act_; }

  Matrix apply(const Matrix& x) const;
  Matrix forward(const Matrix& x, DenseCache& cache) const;
  // Accumulates parameter gradients; returns dL/dx (empty if not requested).
  Matrix backward(const Matrix& dy, const DenseCache& cache,
                  bool want_input_grad = true);
  void collect(ParamRefs& out);

  Parameter weight;
  Parameter bias;
  Parameter slope;

 private:
  Activation act_ = Activation::kLinear;
};

// Stack of DenseLayers; `last_linear` leaves the final layer without PReLU.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, int in, const std::vector<int>& units,
      bool last_linear, Rng& rng);

  int in_dim() const { return layers_.front().in_dim(); }
  int out_dim() const { return layers_.back().out_dim(); }
  bool empty() const { return layers_.empty(); }

  Matrix apply(const Matrix& x) const;
  Matrix forward(const Matrix& x, std::vector<DenseCache>& caches) const;
  Matrix backward(const Matrix& dy, const std::vector<DenseCache>& caches,
                  bool want_input_grad = true);
  void collect(ParamRefs& out);

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
};

enum class ElementwiseOp { kMul, kSub, kConcat };

Vector elementwise(ElementwiseOp op, const Vector& u, const Vector& v);
// Returns (dL/du, dL/dv) given dL/dout.
std::pair<Vector, Vector> elementwise_backward(ElementwiseOp op,
                                               const Vector& u,
                                               const Vector& v,
                                               const Vector& dout);

// Max-shifted softmax. Throws on empty input.
Vector softmax(const Vector& scores);
Vector softmax_backward(const Vector& probs, const Vector& dprobs);
// Column-wise softmax over a batch of logits.
Matrix softmax_columns(const Matrix& logits);

inline constexpr double kProbEpsilon = 1e-7;

double cross_entropy(double pred, int label);
// d loss / d pred; zero outside the clamping interval.
double cross_entropy_grad(double pred, int label);
double mean_cross_entropy(const std::vector<double>& preds,
                          const std::vector<int>& labels);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // One update over every non-frozen parameter. Throws on non-finite grads.
  void step(const ParamRefs& params);

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.lr = lr; }

  struct Moments {
    Matrix m;
    Matrix v;
  };
  const std::map<std::string, Moments>& moments() const { return moments_; }

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

// Records the sign pattern of every PReLU input while enabled, so the
// gradient checker can tell when a perturbation crossed a kink.
class ActivationTrace {
 public:
  static void enable(bool on);
  static bool enabled();
  static void reset();
  static std::uint64_t fingerprint();
  static void record(const Matrix& pre);
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Gradients below this magnitude are compared on an absolute scale.
  double denominator_floor = 1e-4;
  // Fail when more entries than this fraction sat on a PReLU kink.
  double max_skip_fraction = 0.05;
};

// Compares `backward` (which must fill Parameter::grad for `params` given the
// current values, grads having been zeroed) against central differences of
// `loss` for every entry of every parameter.
GradCheckReport grad_check(const ParamRefs& params,
                           const std::function<double()>& loss,
                           const std::function<void()>& backward,
                           const GradCheckOptions& options = {});

}  // namespace bundlerec::nn
