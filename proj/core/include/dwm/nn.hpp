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

#ifndef DWM_NN_HPP_
#define DWM_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dwm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace nn {

enum class Activation { kTanh, kRelu, kIdentity };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

// One dense layer: a rows x cols weight matrix (column-major) followed by a
// bias of length rows.
struct LayerShape {
  int rows = 0;
  int cols = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(rows);
  }
  bool operator==(const LayerShape&) const = default;
};

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation activation = Activation::kTanh;
  Activation output_activation = Activation::kIdentity;

  // Throws ShapeError if any dimension is < 1.
  void validate() const;
  std::vector<LayerShape> layout() const;
  std::size_t param_count() const;
  std::size_t num_layers() const { return hidden_dims.size() + 1; }

  bool operator==(const MlpSpec&) const = default;
};

// Flat float64 parameter storage with a per-layer layout.
class ParamVector {
 public:
  ParamVector() = default;
  // Zero-filled.
  explicit ParamVector(std::vector<LayerShape> layout);
  ParamVector(std::vector<LayerShape> layout, std::vector<double> values);

  static ParamVector zeros_like(const ParamVector& other) { return ParamVector(other.layout_); }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const std::vector<LayerShape>& layout() const { return layout_; }
  std::size_t num_layers() const { return layout_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  Eigen::Map<Vector> as_vector() {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }
  Eigen::Map<const Vector> as_vector() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  Eigen::Map<Matrix> weight(std::size_t layer);
  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;

  // Offset of a layer's weight block inside values().
  std::size_t offset(std::size_t layer) const { return offsets_[layer]; }

  bool same_layout(const ParamVector& other) const { return layout_ == other.layout_; }
  // Layout equality plus bitwise value equality.
  bool operator==(const ParamVector& other) const;

  void fill(double value);
  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator*=(double scale);

 private:
  void build_offsets();

  std::vector<LayerShape> layout_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

// Weights and biases uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

// Throws ShapeError unless params were laid out for spec.
void check_params(const MlpSpec& spec, const ParamVector& params);

Vector mlp_forward(const MlpSpec& spec, const ParamVector& params, const Vector& x);

// Column-wise forward pass: x is input_dim x batch.
Matrix mlp_forward_batch(const MlpSpec& spec, const ParamVector& params, const Matrix& x);

// d output / d x, output_dim x input_dim, by the analytic chain rule.
Matrix mlp_input_jacobian(const MlpSpec& spec, const ParamVector& params, const Vector& x);

// Gradient of upstream' * forward(x) with respect to params.
ParamVector mlp_param_gradient(const MlpSpec& spec, const ParamVector& params, const Vector& x,
                               const Vector& upstream);

// Vector-Jacobian product against both the parameters and the input.
struct Backward {
  ParamVector param_grad;  // summed over the batch
  Matrix input_grad;       // input_dim x batch
};
Backward mlp_backward_batch(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                            const Matrix& upstream);

// Full parameter Jacobian, output_dim x param_count. Row i is
// mlp_param_gradient with upstream e_i.
Matrix mlp_param_jacobian(const MlpSpec& spec, const ParamVector& params, const Vector& x);

// params + lr * grad. Callers pass a negative lr for descent.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr);

double global_norm(const ParamVector& grad);

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam in descent form for the offline losses.
class Adam {
 public:
  Adam() = default;
  explicit Adam(const ParamVector& like, AdamConfig config = {});

  void descend(ParamVector& params, const ParamVector& grad, double lr);
  long steps() const { return steps_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  long steps_ = 0;
};

}  // namespace nn
}  // namespace dwm

#endif  // DWM_NN_HPP_
