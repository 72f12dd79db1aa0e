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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dwm/checkpoint.hpp"
#include "dwm/errors.hpp"
#include "dwm/nn.hpp"
#include "dwm/rng.hpp"
#include "support/test_support.hpp"

namespace dwm {
namespace {

using testing::fd_gradient;
using testing::fd_jacobian;
using testing::max_rel_err;
using testing::with_values;

nn::MlpSpec linear_spec(int in, int out) {
  nn::MlpSpec spec;
  spec.input_dim = in;
  spec.output_dim = out;
  spec.activation = nn::Activation::kIdentity;
  return spec;
}

nn::MlpSpec random_spec(Rng& rng) {
  nn::MlpSpec spec;
  spec.input_dim = 1 + static_cast<int>(rng.index(5));
  spec.output_dim = 1 + static_cast<int>(rng.index(4));
  const int layers = static_cast<int>(rng.index(3));
  for (int i = 0; i < layers; ++i) spec.hidden_dims.push_back(1 + static_cast<int>(rng.index(6)));
  spec.activation = rng.uniform() < 0.8 ? nn::Activation::kTanh : nn::Activation::kIdentity;
  spec.output_activation = rng.uniform() < 0.5 ? nn::Activation::kIdentity : nn::Activation::kTanh;
  return spec;
}

// Scalar-by-scalar forward pass, written independently of the Eigen path.
Vector straight_line_forward(const nn::MlpSpec& spec, const nn::ParamVector& p, const Vector& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  const auto layout = spec.layout();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const int rows = layout[l].rows;
    const int cols = layout[l].cols;
    std::vector<double> next(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      double acc = p[offset + static_cast<std::size_t>(rows * cols + r)];
      for (int c = 0; c < cols; ++c) {
        acc += p[offset + static_cast<std::size_t>(c * rows + r)] * h[static_cast<std::size_t>(c)];
      }
      const auto act = l + 1 == layout.size() ? spec.output_activation : spec.activation;
      if (act == nn::Activation::kTanh) acc = std::tanh(acc);
      if (act == nn::Activation::kRelu) acc = acc > 0 ? acc : 0.0;
      next[static_cast<std::size_t>(r)] = acc;
    }
    offset += layout[l].size();
    h = std::move(next);
  }
  return Eigen::Map<Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
}

TEST(MlpSpec, RejectsNonPositiveDims) {
  nn::MlpSpec spec;
  spec.input_dim = 0;
  EXPECT_THROW(spec.validate(), ShapeError);
  spec.input_dim = 2;
  spec.hidden_dims = {3, 0};
  EXPECT_THROW(spec.validate(), ShapeError);
}

TEST(MlpSpec, ParamCountIsSumOfLayerSizes) {
  nn::MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {4, 5};
  spec.output_dim = 2;
  EXPECT_EQ(spec.param_count(), (3 * 4 + 4) + (4 * 5 + 5) + (5 * 2 + 2));
  const auto p = nn::init_params(spec, 1);
  EXPECT_EQ(p.size(), spec.param_count());
}

TEST(MlpForward, ZeroWeightsGiveZero) {
  const auto spec = linear_spec(3, 2);
  const nn::ParamVector p(spec.layout());
  EXPECT_EQ(nn::mlp_forward(spec, p, Vector::Constant(3, 7.0)), Vector::Zero(2));
}

TEST(MlpForward, IdentityLayer) {
  const auto spec = linear_spec(2, 2);
  nn::ParamVector p(spec.layout());
  p.weight(0) = Matrix::Identity(2, 2);
  const Vector y = nn::mlp_forward(spec, p, Eigen::Vector2d(1.0, 2.0));
  EXPECT_EQ(y, Vector(Eigen::Vector2d(1.0, 2.0)));
}

TEST(MlpForward, MatchesStraightLineReimplementation) {
  nn::MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {5, 4};
  spec.output_dim = 2;
  const auto p = nn::init_params(spec, 42);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Vector x = rng.normal_vector(3);
    const Vector a = nn::mlp_forward(spec, p, x);
    const Vector b = straight_line_forward(spec, p, x);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(MlpForward, DeterministicAndBatchConsistent) {
  Rng rng(5);
  const auto spec = random_spec(rng);
  const auto p = nn::init_params(spec, 9);
  const Matrix x = Matrix::Random(spec.input_dim, 7);
  const Matrix batch = nn::mlp_forward_batch(spec, p, x);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Vector y1 = nn::mlp_forward(spec, p, x.col(c));
    const Vector y2 = nn::mlp_forward(spec, p, x.col(c));
    EXPECT_EQ(y1, y2);
    EXPECT_LE((batch.col(c) - y1).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(MlpForward, ShapeErrors) {
  const auto spec = linear_spec(3, 1);
  const auto p = nn::init_params(spec, 0);
  EXPECT_THROW(nn::mlp_forward(spec, p, Vector::Zero(2)), ShapeError);
  const auto other = nn::init_params(linear_spec(2, 1), 0);
  EXPECT_THROW(nn::mlp_forward(spec, other, Vector::Zero(3)), ShapeError);
}

TEST(MlpInputJacobian, LinearLayerIsW) {
  const auto spec = linear_spec(3, 2);
  const auto p = nn::init_params(spec, 7);
  const Matrix J = nn::mlp_input_jacobian(spec, p, Vector::Random(3));
  EXPECT_EQ(J, Matrix(p.weight(0)));
}

TEST(MlpInputJacobian, ZeroWeightTanhIsZero) {
  nn::MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {4};
  spec.output_dim = 2;
  nn::ParamVector p(spec.layout());
  p.bias(0).setConstant(0.3);
  EXPECT_EQ(nn::mlp_input_jacobian(spec, p, Vector::Random(3)), Matrix::Zero(2, 3));
}

TEST(MlpInputJacobian, SeededNetMatchesFiniteDifferences) {
  nn::MlpSpec spec;
  spec.input_dim = 4;
  spec.hidden_dims = {6, 5};
  spec.output_dim = 3;
  const auto p = nn::init_params(spec, 11);
  const Vector x = Vector::Random(4);
  const Matrix fd = fd_jacobian([&](const Vector& v) { return nn::mlp_forward(spec, p, v); }, x);
  EXPECT_LE(max_rel_err(nn::mlp_input_jacobian(spec, p, x), fd), 1e-6);
}

TEST(MlpParamGradient, ZeroUpstreamGivesZero) {
  Rng rng(1);
  const auto spec = random_spec(rng);
  const auto p = nn::init_params(spec, 2);
  const auto g = nn::mlp_param_gradient(spec, p, Vector::Random(spec.input_dim),
                                        Vector::Zero(spec.output_dim));
  EXPECT_EQ(g.as_vector(), Vector::Zero(static_cast<Eigen::Index>(p.size())));
}

TEST(MlpParamGradient, LinearLayerOuterProduct) {
  const auto spec = linear_spec(3, 2);
  const auto p = nn::init_params(spec, 3);
  const Vector x = Vector::Random(3);
  const Vector u = Vector::Random(2);
  const auto g = nn::mlp_param_gradient(spec, p, x, u);
  EXPECT_LE((Matrix(g.weight(0)) - u * x.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((Vector(g.bias(0)) - u).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MlpParamGradient, SeededNetMatchesFiniteDifferences) {
  nn::MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {5, 4};
  spec.output_dim = 2;
  const auto p = nn::init_params(spec, 12);
  const Vector x = Vector::Random(3);
  const Vector u = Vector::Random(2);
  const Vector fd = fd_gradient(
      [&](const Vector& v) { return u.dot(nn::mlp_forward(spec, with_values(p, v), x)); }, p.as_vector());
  EXPECT_LE(max_rel_err(nn::mlp_param_gradient(spec, p, x, u).as_vector(), fd), 1e-6);
}

// At least 100 random specs, parameters and inputs.
TEST(MlpGradients, RandomSuiteMatchesFiniteDifferences) {
  Rng rng(2024);
  double worst_input = 0.0;
  double worst_param = 0.0;
  for (int t = 0; t < 120; ++t) {
    const auto spec = random_spec(rng);
    const auto p = nn::init_params(spec, rng.next_u64());
    const Vector x = rng.normal_vector(spec.input_dim);
    const Vector u = rng.normal_vector(spec.output_dim);
    const Matrix fd_in = fd_jacobian([&](const Vector& v) { return nn::mlp_forward(spec, p, v); }, x);
    worst_input = std::max(worst_input, max_rel_err(nn::mlp_input_jacobian(spec, p, x), fd_in));
    const Vector fd_p = fd_gradient(
        [&](const Vector& v) { return u.dot(nn::mlp_forward(spec, with_values(p, v), x)); },
        p.as_vector());
    worst_param = std::max(worst_param, max_rel_err(nn::mlp_param_gradient(spec, p, x, u).as_vector(), fd_p));
  }
  EXPECT_LE(worst_input, 1e-5);
  EXPECT_LE(worst_param, 1e-5);
}

TEST(MlpGradients, LinearInUpstream) {
  Rng rng(77);
  for (int t = 0; t < 20; ++t) {
    const auto spec = random_spec(rng);
    const auto p = nn::init_params(spec, rng.next_u64());
    const Vector x = rng.normal_vector(spec.input_dim);
    const Vector u = rng.normal_vector(spec.output_dim);
    const Vector v = rng.normal_vector(spec.output_dim);
    const double a = rng.uniform(-2, 2);
    const double b = rng.uniform(-2, 2);
    const Vector lhs = nn::mlp_param_gradient(spec, p, x, a * u + b * v).as_vector();
    const Vector rhs = a * nn::mlp_param_gradient(spec, p, x, u).as_vector() +
                       b * nn::mlp_param_gradient(spec, p, x, v).as_vector();
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-13 * (1.0 + rhs.cwiseAbs().maxCoeff()));
  }
}

TEST(MlpGradients, ParamJacobianRowsAreParamGradients) {
  Rng rng(8);
  const auto spec = random_spec(rng);
  const auto p = nn::init_params(spec, 4);
  const Vector x = rng.normal_vector(spec.input_dim);
  const Matrix J = nn::mlp_param_jacobian(spec, p, x);
  for (int i = 0; i < spec.output_dim; ++i) {
    const Vector e = Vector::Unit(spec.output_dim, i);
    EXPECT_EQ(Vector(J.row(i).transpose()), nn::mlp_param_gradient(spec, p, x, e).as_vector());
  }
}

TEST(MlpGradients, BatchBackwardSumsAndInputGrads) {
  Rng rng(10);
  const auto spec = random_spec(rng);
  const auto p = nn::init_params(spec, 6);
  const Matrix X = Matrix::Random(spec.input_dim, 5);
  const Matrix U = Matrix::Random(spec.output_dim, 5);
  const auto back = nn::mlp_backward_batch(spec, p, X, U);
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(p.size()));
  for (Eigen::Index c = 0; c < 5; ++c) {
    sum += nn::mlp_param_gradient(spec, p, X.col(c), U.col(c)).as_vector();
    const Vector gin = nn::mlp_input_jacobian(spec, p, X.col(c)).transpose() * U.col(c);
    EXPECT_LE((back.input_grad.col(c) - gin).cwiseAbs().maxCoeff(), 1e-13);
  }
  EXPECT_LE((back.param_grad.as_vector() - sum).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(SgdStep, ZeroLearningRateIsIdentity) {
  const nn::ParamVector p({nn::LayerShape{1, 1}}, {1.0, 1.0});
  const nn::ParamVector g({nn::LayerShape{1, 1}}, {2.0, -2.0});
  EXPECT_EQ(nn::sgd_step(p, g, 0.0), p);
}

TEST(SgdStep, Arithmetic) {
  const nn::ParamVector p({nn::LayerShape{1, 1}}, {1.0, 1.0});
  const nn::ParamVector g({nn::LayerShape{1, 1}}, {2.0, -2.0});
  const auto q = nn::sgd_step(p, g, 0.5);
  EXPECT_EQ(q[0], 2.0);
  EXPECT_EQ(q[1], 0.0);
}

TEST(SgdStep, LayoutMismatchThrows) {
  const nn::ParamVector p({nn::LayerShape{1, 1}});
  const nn::ParamVector g({nn::LayerShape{2, 1}});
  EXPECT_THROW(nn::sgd_step(p, g, 0.1), ShapeError);
}

// Descent on 0.5 (w - w*)' Q (w - w*) with Q = diag(1, 4) reaches w*.
TEST(SgdStep, ConvexQuadraticReachesMinimizer) {
  const Vector target(Eigen::Vector2d(0.7, -1.3));
  const Vector q(Eigen::Vector2d(1.0, 4.0));
  nn::ParamVector w({nn::LayerShape{1, 1}}, {5.0, 5.0});
  int steps = 0;
  for (; steps < 1000; ++steps) {
    const Vector g = q.cwiseProduct(w.as_vector() - target);
    if ((w.as_vector() - target).cwiseAbs().maxCoeff() <= 1e-8) break;
    w = nn::sgd_step(w, with_values(w, g), -0.2);
  }
  EXPECT_LE(steps, 1000);
  EXPECT_LE((w.as_vector() - target).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Adam, MinimizesQuadratic) {
  const Vector target(Eigen::Vector2d(0.3, -0.2));
  nn::ParamVector w({nn::LayerShape{1, 1}}, {1.0, 1.0});
  nn::Adam adam(w);
  for (int t = 0; t < 3000; ++t) {
    const Vector g = 2.0 * (w.as_vector() - target);
    adam.descend(w, with_values(w, g), 1e-2 * std::pow(0.998, t));
  }
  EXPECT_EQ(adam.steps(), 3000);
  EXPECT_LE((w.as_vector() - target).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    const auto spec = random_spec(rng);
    auto p = nn::init_params(spec, rng.next_u64());
    p[0] = std::nextafter(1.0, 2.0);
    p[p.size() - 1] = -0.0;
    std::stringstream ss;
    write_checkpoint(ss, spec, p, {{"note", "x"}});
    const auto ck = read_checkpoint(ss);
    EXPECT_EQ(ck.spec, spec);
    EXPECT_TRUE(ck.params == p);
    EXPECT_TRUE(std::signbit(ck.params[p.size() - 1]));
    EXPECT_EQ(ck.extra.at("note"), "x");
  }
}

TEST(Checkpoint, HeaderAndErrors) {
  const auto spec = linear_spec(1, 1);
  std::stringstream ss;
  write_checkpoint(ss, spec, nn::init_params(spec, 0));
  std::string first;
  std::getline(ss, first);
  EXPECT_EQ(first, "DWM1");
  std::stringstream bad("NOPE\n{}\n");
  EXPECT_THROW(read_checkpoint(bad), IoError);
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.ckpt"), MissingArtifactError);
}

TEST(Checkpoint, LittleEndianPayload) {
  std::stringstream ss;
  const double v[1] = {1.0};
  write_f64_le(ss, v);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 8u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 0xF0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x00);
}

TEST(Activation, StringRoundTrip) {
  for (auto a : {nn::Activation::kTanh, nn::Activation::kRelu, nn::Activation::kIdentity}) {
    EXPECT_EQ(nn::activation_from_string(nn::to_string(a)), a);
  }
  EXPECT_THROW(nn::activation_from_string("gelu"), ConfigError);
}

}  // namespace
}  // namespace dwm
