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

#include "bundlerec/neural.hpp"

#include <algorithm>
#include <cmath>

namespace bundlerec::nn {

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw ShapeError("non-finite value in " + std::string(what));
  }
}

Parameter::Parameter(std::string n, Matrix v)
    : name(std::move(n)), value(std::move(v)) {
  zero_grad();
}

void zero_grads(const ParamRefs& params) {
  for (auto* p : params) p->zero_grad();
}

void set_frozen(const ParamRefs& params, bool frozen) {
  for (auto* p : params) p->frozen = frozen;
}

void glorot_init(Matrix& m, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
}

DenseLayer::DenseLayer(const std::string& name, int in, int out,
                       Activation act, Rng& rng)
    : act_(act) {
  if (in <= 0 || out <= 0) throw ShapeError("dense layer dims must be > 0");
  Matrix w(out, in);
  glorot_init(w, in, out, rng);
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", Matrix::Zero(out, 1));
  slope = Parameter(name + ".slope",
                    Matrix::Constant(out, 1,
                                     act == Activation::kPRelu
                                         ? kPReluInitSlope
                                         : 0.0));
}

namespace {

void prelu_inplace(Matrix& z, const Matrix& slope) {
  // max(z, 0) + a * min(z, 0), branch-free so it vectorizes.
  z = z.cwiseMax(0.0) + slope.col(0).asDiagonal() * z.cwiseMin(0.0);
}

}  // namespace

Matrix DenseLayer::apply(const Matrix& x) const {
  if (x.rows() != in_dim()) {
    throw ShapeError(weight.name + ": expected input dim " +
                     std::to_string(in_dim()) + ", got " +
                     std::to_string(x.rows()));
  }
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  if (act_ == Activation::kPRelu) {
    if (ActivationTrace::enabled()) ActivationTrace::record(y);
    prelu_inplace(y, slope.value);
  }
  return y;
}

Matrix DenseLayer::forward(const Matrix& x, DenseCache& cache) const {
  if (x.rows() != in_dim()) {
    throw ShapeError(weight.name + ": expected input dim " +
                     std::to_string(in_dim()) + ", got " +
                     std::to_string(x.rows()));
  }
  cache.input = x;
  cache.pre = weight.value * x;
  cache.pre.colwise() += bias.value.col(0);
  Matrix y = cache.pre;
  if (act_ == Activation::kPRelu) {
    if (ActivationTrace::enabled()) ActivationTrace::record(y);
    prelu_inplace(y, slope.value);
  }
  return y;
}

Matrix DenseLayer::backward(const Matrix& dy, const DenseCache& cache,
                            bool want_input_grad) {
  if (dy.rows() != out_dim() || dy.cols() != cache.pre.cols()) {
    throw ShapeError(weight.name + ": gradient shape mismatch");
  }
  Matrix dz = dy;
  if (act_ == Activation::kPRelu) {
    const Matrix neg = cache.pre.cwiseMin(0.0);
    slope.grad.col(0) += dy.cwiseProduct(neg).rowwise().sum();
    const auto on = (cache.pre.array() > 0.0).cast<double>();
    dz.array() *= on + (1.0 - on).colwise() * slope.value.col(0).array();
  }
  weight.grad.noalias() += dz * cache.input.transpose();
  bias.grad.col(0) += dz.rowwise().sum();
  if (!want_input_grad) return {};
  return weight.value.transpose() * dz;
}

void DenseLayer::collect(ParamRefs& out) {
  out.push_back(&weight);
  out.push_back(&bias);
  if (act_ == Activation::kPRelu) out.push_back(&slope);
}

Mlp::Mlp(const std::string& name, int in, const std::vector<int>& units,
         bool last_linear, Rng& rng) {
  int prev = in;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const bool linear = last_linear && i + 1 == units.size();
    layers_.emplace_back(name + "." + std::to_string(i), prev, units[i],
                         linear ? Activation::kLinear : Activation::kPRelu,
                         rng);
    prev = units[i];
  }
}

Matrix Mlp::apply(const Matrix& x) const {
  Matrix h = x;
  for (const auto& layer : layers_) h = layer.apply(h);
  return h;
}

Matrix Mlp::forward(const Matrix& x, std::vector<DenseCache>& caches) const {
  caches.resize(layers_.size());
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h, caches[i]);
  }
  return h;
}

Matrix Mlp::backward(const Matrix& dy, const std::vector<DenseCache>& caches,
                     bool want_input_grad) {
  Matrix g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool need = want_input_grad || i > 0;
    g = layers_[i].backward(g, caches[i], need);
  }
  return g;
}

void Mlp::collect(ParamRefs& out) {
  for (auto& layer : layers_) layer.collect(out);
}

Vector elementwise(ElementwiseOp op, const Vector& u, const Vector& v) {
  switch (op) {
    case ElementwiseOp::kMul:
    case ElementwiseOp::kSub:
      if (u.size() != v.size()) {
        throw ShapeError("elementwise op needs equal lengths, got " +
                         std::to_string(u.size()) + " and " +
                         std::to_string(v.size()));
      }
      return op == ElementwiseOp::kMul ? Vector(u.cwiseProduct(v))
                                       : Vector(u - v);
    case ElementwiseOp::kConcat: {
      Vector out(u.size() + v.size());
      out << u, v;
      return out;
    }
  }
  return {};
}

std::pair<Vector, Vector> elementwise_backward(ElementwiseOp op,
                                               const Vector& u,
                                               const Vector& v,
                                               const Vector& dout) {
  switch (op) {
    case ElementwiseOp::kMul:
      return {dout.cwiseProduct(v), dout.cwiseProduct(u)};
    case ElementwiseOp::kSub:
      return {dout, -dout};
    case ElementwiseOp::kConcat:
      return {dout.head(u.size()), dout.tail(v.size())};
  }
  return {};
}

Vector softmax(const Vector& scores) {
  if (scores.size() == 0) throw ShapeError("softmax of an empty vector");
  require_finite(scores, "softmax input");
  Vector e = (scores.array() - scores.maxCoeff()).exp();
  return e / e.sum();
}

Vector softmax_backward(const Vector& probs, const Vector& dprobs) {
  const double dot = probs.dot(dprobs);
  return probs.cwiseProduct((dprobs.array() - dot).matrix());
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    out.col(j) = softmax(logits.col(j));
  }
  return out;
}

double cross_entropy(double pred, int label) {
  const double p = std::clamp(pred, kProbEpsilon, 1.0 - kProbEpsilon);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

double cross_entropy_grad(double pred, int label) {
  if (pred < kProbEpsilon || pred > 1.0 - kProbEpsilon) return 0.0;
  return label ? -1.0 / pred : 1.0 / (1.0 - pred);
}

double mean_cross_entropy(const std::vector<double>& preds,
                          const std::vector<int>& labels) {
  if (preds.size() != labels.size()) {
    throw ShapeError("prediction/label count mismatch");
  }
  if (preds.empty()) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    total += cross_entropy(preds[i], labels[i]);
  }
  return total / static_cast<double>(preds.size());
}

void Adam::step(const ParamRefs& params) {
  for (const auto* p : params) {
    if (!p->frozen && !p->grad.allFinite()) {
      throw ShapeError("non-finite gradient for " + p->name);
    }
  }
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (auto* p : params) {
    if (p->frozen) continue;
    auto [it, inserted] = moments_.try_emplace(p->name);
    Moments& mom = it->second;
    if (inserted) {
      mom.m = Matrix::Zero(p->value.rows(), p->value.cols());
      mom.v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    if (mom.m.rows() != p->value.rows() || mom.m.cols() != p->value.cols()) {
      throw ShapeError("Adam moment shape mismatch for " + p->name);
    }
    mom.m = config_.beta1 * mom.m + (1.0 - config_.beta1) * p->grad;
    mom.v = config_.beta2 * mom.v +
            (1.0 - config_.beta2) * p->grad.cwiseAbs2();
    p->value.array() -= config_.lr * (mom.m.array() / c1) /
                        ((mom.v.array() / c2).sqrt() + config_.eps);
  }
}

namespace {

thread_local bool trace_on = false;
thread_local std::uint64_t trace_hash = 0xcbf29ce484222325ULL;

}  // namespace

void ActivationTrace::enable(bool on) { trace_on = on; }
bool ActivationTrace::enabled() { return trace_on; }
void ActivationTrace::reset() { trace_hash = 0xcbf29ce484222325ULL; }
std::uint64_t ActivationTrace::fingerprint() { return trace_hash; }

void ActivationTrace::record(const Matrix& pre) {
  std::uint64_t h = trace_hash;
  for (Eigen::Index k = 0; k < pre.size(); ++k) {
    h ^= pre.data()[k] > 0 ? 0x9eu : 0x3du;
    h *= 0x100000001b3ULL;
  }
  trace_hash = h;
}

GradCheckReport grad_check(const ParamRefs& params,
                           const std::function<double()>& loss,
                           const std::function<void()>& backward,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  zero_grads(params);
  backward();
  std::vector<Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  const bool was_on = ActivationTrace::enabled();
  ActivationTrace::enable(true);
  auto traced_loss = [&](std::uint64_t& print) {
    ActivationTrace::reset();
    double v = loss();
    print = ActivationTrace::fingerprint();
    return v;
  };
  std::uint64_t base_print = 0;
  traced_loss(base_print);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      double& x = p.value.data()[k];
      const double original = x;
      double numeric = 0;
      bool smooth = false;
      for (double h = options.step; h >= options.step * 1e-2; h *= 0.1) {
        std::uint64_t plus_print = 0, minus_print = 0;
        x = original + h;
        const double up = traced_loss(plus_print);
        x = original - h;
        const double down = traced_loss(minus_print);
        x = original;
        if (plus_print == base_print && minus_print == base_print) {
          numeric = (up - down) / (2.0 * h);
          smooth = true;
          break;
        }
      }
      if (!smooth) {
        ++report.skipped_kinks;
        continue;
      }
      const double a = analytic[pi].data()[k];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = p.name + "[" + std::to_string(k) + "]";
      }
    }
  }
  ActivationTrace::enable(was_on);
  const std::size_t total = report.checked + report.skipped_kinks;
  report.passed =
      report.checked > 0 && report.max_rel_error < options.tolerance &&
      static_cast<double>(report.skipped_kinks) <=
          options.max_skip_fraction * static_cast<double>(total);
  return report;
}

}  // namespace bundlerec::nn
