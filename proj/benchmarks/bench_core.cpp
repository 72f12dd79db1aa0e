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

#include <benchmark/benchmark.h>

#include "dwm/mpc.hpp"
#include "dwm/nn.hpp"
#include "support/test_support.hpp"

namespace {

using namespace dwm;

nn::MlpSpec square_mlp(int width) {
  nn::MlpSpec spec;
  spec.input_dim = 20;
  spec.hidden_dims = {width, width};
  spec.output_dim = 4;
  spec.activation = nn::Activation::kTanh;
  return spec;
}

void BM_MlpForward(benchmark::State& state) {
  const auto spec = square_mlp(static_cast<int>(state.range(0)));
  const auto params = nn::init_params(spec, 1);
  Rng rng(2);
  const Vector x = rng.normal_vector(spec.input_dim);
  for (auto _ : state) benchmark::DoNotOptimize(nn::mlp_forward(spec, params, x));
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(128);

void BM_MlpInputJacobian(benchmark::State& state) {
  const auto spec = square_mlp(static_cast<int>(state.range(0)));
  const auto params = nn::init_params(spec, 1);
  Rng rng(2);
  const Vector x = rng.normal_vector(spec.input_dim);
  for (auto _ : state) benchmark::DoNotOptimize(nn::mlp_input_jacobian(spec, params, x));
}
BENCHMARK(BM_MlpInputJacobian)->Arg(64)->Arg(128);

void BM_MlpBackwardBatch(benchmark::State& state) {
  const auto spec = square_mlp(128);
  const auto params = nn::init_params(spec, 1);
  const Matrix x = Matrix::Random(spec.input_dim, state.range(0));
  const Matrix up = Matrix::Random(spec.output_dim, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(nn::mlp_backward_batch(spec, params, x, up));
}
BENCHMARK(BM_MlpBackwardBatch)->Arg(256);

// Pendulum-sized sampler at the default width, K levels.
void BM_ReverseSample(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const diffusion::Denoiser den(3, 1, K, {128, 128}, nn::Activation::kTanh, 3);
  const auto sched = diffusion::Schedule::linear(K);
  Rng rng(4);
  const Vector s = rng.normal_vector(3), a = rng.normal_vector(1);
  const auto noise = NoisePack::draw(K, 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(diffusion::reverse_sample(den, sched, s, a, noise));
}
BENCHMARK(BM_ReverseSample)->Arg(8);

void BM_ReverseSampleJacobians(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const diffusion::Denoiser den(3, 1, K, {128, 128}, nn::Activation::kTanh, 3);
  const auto sched = diffusion::Schedule::linear(K);
  Rng rng(4);
  const Vector s = rng.normal_vector(3), a = rng.normal_vector(1);
  const auto noise = NoisePack::draw(K, 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(diffusion::reverse_sample_jacobians(den, sched, s, a, noise));
}
BENCHMARK(BM_ReverseSampleJacobians)->Arg(1)->Arg(4)->Arg(8);

// One planner call at the default H, M, E with default-width networks.
void BM_MpcAct(benchmark::State& state) {
  const auto tb = testing::make_tiny_bundle(3, 1, 8, 5, {64, 64}, {128, 128});
  MpcConfig cfg;
  cfg.E = static_cast<int>(state.range(0));
  Rng rng(6);
  const Vector s = rng.normal_vector(3);
  for (auto _ : state) {
    nn::ParamVector psi = tb.bundle.psi;
    benchmark::DoNotOptimize(mpc_act(tb.bundle, psi, s, cfg, rng));
  }
}
BENCHMARK(BM_MpcAct)->Arg(0)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
