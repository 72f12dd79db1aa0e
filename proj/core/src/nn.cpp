// Copyright 2026 The dwm-mpc Authors
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

#include "dwm/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "dwm/errors.hpp"
#include "dwm/rng.hpp"

namespace dwm::nn {
namespace {

void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::kTanh:
      z = z.array().tanh();
      break;
    case Activation::kRelu:
      z = z.array().max(0.0);
      break;
    case Activation::kIdentity:
      break;
  }
}

// Derivative expressed through the pre-activation z and post-activation y.
Matrix activation_derivative(Activation act, const Matrix& z, const Matrix& y) {
  switch (act) {
    case Activation::kTanh:
      return (1.0 - y.array().square()).matrix();
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kIdentity:
      break;
  }
  return Matrix::Ones(z.rows(), z.cols());
}

Activation layer_activation(const MlpSpec& spec, std::size_t layer) {
  return layer + 1 == spec.num_layers() ? spec.output_activation : spec.activation;
}

// Post-activations a_0 = x, a_1, ..., a_L and pre-activations z_1..z_L.
struct Trace {
  std::vector<Matrix> post;
  std::vector<Matrix> pre;
};

Trace forward_trace(const MlpSpec& spec, const ParamVector& params, const Matrix& x) {
  Trace trace;
  trace.post.reserve(spec.num_layers() + 1);
  trace.pre.reserve(spec.num_layers());
  trace.post.push_back(x);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    Matrix z = params.weight(l) * trace.post.back();
    z.colwise() += params.bias(l);
    Matrix y = z;
    apply_activation(layer_activation(spec, l), y);
    trace.pre.push_back(std::move(z));
    trace.post.push_back(std::move(y));
  }
  return trace;
}

void check_input(const MlpSpec& spec, Eigen::Index rows) {
  if (rows != spec.input_dim) {
    throw ShapeError("mlp input has " + std::to_string(rows) + " rows, spec expects " +
                     std::to_string(spec.input_dim));
  }
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw ShapeError("mlp input/output dims must be >= 1");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw ShapeError("mlp hidden dims must be >= 1");
  }
}

std::vector<LayerShape> MlpSpec::layout() const {
  validate();
  std::vector<LayerShape> shapes;
  int fan_in = input_dim;
  for (int h : hidden_dims) {
    shapes.push_back({h, fan_in});
    fan_in = h;
  }
  shapes.push_back({output_dim, fan_in});
  return shapes;
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (const auto& shape : layout()) n += shape.size();
  return n;
}

ParamVector::ParamVector(std::vector<LayerShape> layout) : layout_(std::move(layout)) {
  build_offsets();
  std::size_t n = 0;
  for (const auto& shape : layout_) n += shape.size();
  values_.assign(n, 0.0);
}

ParamVector::ParamVector(std::vector<LayerShape> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  build_offsets();
  std::size_t n = 0;
  for (const auto& shape : layout_) n += shape.size();
  if (n != values_.size()) {
    throw ShapeError("param vector has " + std::to_string(values_.size()) +
                     " values but layout needs " + std::to_string(n));
  }
}

void ParamVector::build_offsets() {
  offsets_.clear();
  std::size_t offset = 0;
  for (const auto& shape : layout_) {
    offsets_.push_back(offset);
    offset += shape.size();
  }
}

Eigen::Map<Matrix> ParamVector::weight(std::size_t layer) {
  const auto& s = layout_[layer];
  return {values_.data() + offsets_[layer], s.rows, s.cols};
}

Eigen::Map<const Matrix> ParamVector::weight(std::size_t layer) const {
  const auto& s = layout_[layer];
  return {values_.data() + offsets_[layer], s.rows, s.cols};
}

Eigen::Map<Vector> ParamVector::bias(std::size_t layer) {
  const auto& s = layout_[layer];
  return {values_.data() + offsets_[layer] + static_cast<std::size_t>(s.rows * s.cols), s.rows};
}

Eigen::Map<const Vector> ParamVector::bias(std::size_t layer) const {
  const auto& s = layout_[layer];
  return {values_.data() + offsets_[layer] + static_cast<std::size_t>(s.rows * s.cols), s.rows};
}

bool ParamVector::operator==(const ParamVector& other) const {
  if (layout_ != other.layout_ || values_.size() != other.values_.size()) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    // bitwise, so that -0.0 != 0.0 and NaN payloads are compared exactly
    if (std::bit_cast<std::uint64_t>(values_[i]) != std::bit_cast<std::uint64_t>(other.values_[i]))
      return false;
  }
  return true;
}

void ParamVector::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  if (!same_layout(other)) throw ShapeError("param vector layout mismatch in +=");
  as_vector() += other.as_vector();
  return *this;
}

ParamVector& ParamVector::operator*=(double scale) {
  as_vector() *= scale;
  return *this;
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  ParamVector params(spec.layout());
  Rng rng(seed);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const auto& shape = params.layout()[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(shape.cols));
    auto w = params.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    auto b = params.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
  }
  return params;
}

void check_params(const MlpSpec& spec, const ParamVector& params) {
  if (params.layout() != spec.layout()) {
    throw ShapeError("param layout does not match mlp spec");
  }
}

Vector mlp_forward(const MlpSpec& spec, const ParamVector& params, const Vector& x) {
  return mlp_forward_batch(spec, params, x);
}

Matrix mlp_forward_batch(const MlpSpec& spec, const ParamVector& params, const Matrix& x) {
  check_params(spec, params);
  check_input(spec, x.rows());
  Matrix a = x;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    Matrix z = params.weight(l) * a;
    z.colwise() += params.bias(l);
    apply_activation(layer_activation(spec, l), z);
    a = std::move(z);
  }
  return a;
}

Matrix mlp_input_jacobian(const MlpSpec& spec, const ParamVector& params, const Vector& x) {
  check_params(spec, params);
  check_input(spec, x.size());
  const Trace trace = forward_trace(spec, params, x);
  Matrix jac = Matrix::Identity(spec.input_dim, spec.input_dim);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const Vector d =
        activation_derivative(layer_activation(spec, l), trace.pre[l], trace.post[l + 1]).col(0);
    jac = d.asDiagonal() * (params.weight(l) * jac);
  }
  return jac;
}

Backward mlp_backward_batch(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                            const Matrix& upstream) {
  check_params(spec, params);
  check_input(spec, x.rows());
  if (upstream.rows() != spec.output_dim || upstream.cols() != x.cols()) {
    throw ShapeError("upstream cotangent shape does not match mlp output");
  }
  const Trace trace = forward_trace(spec, params, x);
  Backward out{ParamVector::zeros_like(params), Matrix()};
  Matrix delta = upstream;
  for (std::size_t layer = spec.num_layers(); layer-- > 0;) {
    delta.array() *= activation_derivative(layer_activation(spec, layer), trace.pre[layer],
                                           trace.post[layer + 1])
                         .array();
    out.param_grad.weight(layer).noalias() = delta * trace.post[layer].transpose();
    out.param_grad.bias(layer) = delta.rowwise().sum();
    delta = params.weight(layer).transpose() * delta;
  }
  out.input_grad = std::move(delta);
  return out;
}

ParamVector mlp_param_gradient(const MlpSpec& spec, const ParamVector& params, const Vector& x,
                               const Vector& upstream) {
  return mlp_backward_batch(spec, params, x, upstream).param_grad;
}

Matrix mlp_param_jacobian(const MlpSpec& spec, const ParamVector& params, const Vector& x) {
  check_params(spec, params);
  check_input(spec, x.size());
  const Trace trace = forward_trace(spec, params, x);
  const auto out_dim = static_cast<Eigen::Index>(spec.output_dim);
  Matrix jac(out_dim, static_cast<Eigen::Index>(params.size()));
  ParamVector row = ParamVector::zeros_like(params);
  // One backward sweep per output; the forward trace is shared.
  for (Eigen::Index i = 0; i < out_dim; ++i) {
    Vector delta = Vector::Unit(out_dim, i);
    for (std::size_t layer = spec.num_layers(); layer-- > 0;) {
      delta.array() *= activation_derivative(layer_activation(spec, layer), trace.pre[layer],
                                             trace.post[layer + 1])
                           .col(0)
                           .array();
      row.weight(layer).noalias() = delta * trace.post[layer].col(0).transpose();
      row.bias(layer) = delta;
      if (layer > 0) delta = params.weight(layer).transpose() * delta;
    }
    jac.row(i) = row.as_vector().transpose();
  }
  return jac;
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr) {
  if (!params.same_layout(grad)) throw ShapeError("sgd_step: layout mismatch");
  ParamVector out = params;
  out.as_vector() += lr * grad.as_vector();
  return out;
}

double global_norm(const ParamVector& grad) { return grad.as_vector().norm(); }

Adam::Adam(const ParamVector& like, AdamConfig config)
    : config_(config), m_(like.size(), 0.0), v_(like.size(), 0.0) {}

void Adam::descend(ParamVector& params, const ParamVector& grad, double lr) {
  if (!params.same_layout(grad) || m_.size() != params.size()) {
    throw ShapeError("adam: layout mismatch");
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
  }
}

}  // namespace dwm::nn
