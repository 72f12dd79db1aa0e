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

#ifndef DWM_REWARD_MODEL_HPP_
#define DWM_REWARD_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dwm/dataset.hpp"
#include "dwm/nn.hpp"
#include "dwm/stats.hpp"

namespace dwm {

// Scalar regressor r(s, a). The network sees [normalize_state(s) | a] and
// predicts the z-scored reward; every public accessor works in raw units.
class RewardNet {
 public:
  RewardNet() = default;
  RewardNet(int state_dim, int action_dim, std::vector<int> hidden, nn::Activation act,
            std::uint64_t seed, NormStats norm);
  // Throws ShapeError unless spec maps state_dim + action_dim to 1.
  RewardNet(nn::MlpSpec spec, nn::ParamVector params, NormStats norm, int state_dim,
            int action_dim);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const nn::MlpSpec& spec() const { return spec_; }
  const nn::ParamVector& params() const { return params_; }
  nn::ParamVector& params() { return params_; }
  const NormStats& norm() const { return norm_; }

  Vector input(const Vector& s, const Vector& a) const;
  Matrix input_batch(std::span<const Transition> batch) const;

  void save(const std::filesystem::path& path) const;
  static RewardNet load(const std::filesystem::path& path);

 private:
  nn::MlpSpec spec_;
  nn::ParamVector params_;
  NormStats norm_;
  int state_dim_ = 0;
  int action_dim_ = 0;
};

// Raw-unit prediction.
double reward_eval(const RewardNet& net, const Vector& s, const Vector& a);

struct RewardGrads {
  double r = 0.0;
  Vector r_s;
  Vector r_a;
};
// Exact raw-unit gradients with respect to s and a.
RewardGrads reward_input_grads(const RewardNet& net, const Vector& s, const Vector& a);

// Batch MSE in z-scored reward units and its exact parameter gradient.
nn::LossAndGrad reward_loss(const RewardNet& net, std::span<const Transition> batch);

// One optimizer step on the batch MSE; returns the pre-step loss. A null
// optimizer means plain gradient descent.
double reward_fit_step(RewardNet& net, std::span<const Transition> batch, double lr,
                       nn::Adam* adam = nullptr);

// Raw-unit RMSE over the transitions with a delta-method standard error.
stats::RmseResult reward_rmse(const RewardNet& net, std::span<const Transition> heldout);

}  // namespace dwm

#endif  // DWM_REWARD_MODEL_HPP_
