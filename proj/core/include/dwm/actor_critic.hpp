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

#ifndef DWM_ACTOR_CRITIC_HPP_
#define DWM_ACTOR_CRITIC_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dwm/dataset.hpp"
#include "dwm/env.hpp"
#include "dwm/nn.hpp"

namespace dwm {

// Deterministic policy a = center + half_range * tanh(net(normalize_state(s))).
// The tanh output layer keeps every action inside the box by construction.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(int state_dim, Vector action_low, Vector action_high, std::vector<int> hidden,
            nn::Activation act, std::uint64_t seed, NormStats norm);
  PolicyNet(nn::MlpSpec spec, nn::ParamVector params, Vector action_low, Vector action_high,
            NormStats norm);

  int state_dim() const { return spec_.input_dim; }
  int action_dim() const { return spec_.output_dim; }
  const nn::MlpSpec& spec() const { return spec_; }
  const nn::ParamVector& params() const { return params_; }
  nn::ParamVector& params() { return params_; }
  const NormStats& norm() const { return norm_; }
  const Vector& action_low() const { return low_; }
  const Vector& action_high() const { return high_; }

  Vector act(const Vector& s) const { return act(params_, s); }
  // Evaluates with an explicit parameter vector psi laid out like params().
  Vector act(const nn::ParamVector& psi, const Vector& s) const;
  // Raw states as columns.
  Matrix act_batch(const nn::ParamVector& psi, const Matrix& states) const;

  struct Jacobians {
    Vector a;
    Matrix Pi_s;    // m x d, raw units
    Matrix Pi_psi;  // m x |psi|
  };
  Jacobians jacobians(const nn::ParamVector& psi, const Vector& s) const;

  // Gradient in psi of sum_b upstream_b . a_b for raw states as columns.
  nn::ParamVector vjp(const nn::ParamVector& psi, const Matrix& states, const Matrix& upstream) const;

  void save(const std::filesystem::path& path) const;
  static PolicyNet load(const std::filesystem::path& path);

 private:
  Matrix normalized_inputs(const Matrix& states) const;

  nn::MlpSpec spec_;
  nn::ParamVector params_;
  Vector low_;
  Vector high_;
  Vector center_;
  Vector half_;
  NormStats norm_;
};

// Q(s, a) on [normalize_state(s) | a]. The network regresses the return of
// z-scored rewards, Qn; the raw value is reward_std * Qn + reward_mean / (1 - gamma),
// which satisfies the raw Bellman equation whenever Qn satisfies the normalized one.
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(int state_dim, int action_dim, std::vector<int> hidden, nn::Activation act,
            std::uint64_t seed, NormStats norm, double gamma);
  CriticNet(nn::MlpSpec spec, nn::ParamVector params, nn::ParamVector target_params,
            NormStats norm, double gamma, int state_dim, int action_dim);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  double gamma() const { return gamma_; }
  const nn::MlpSpec& spec() const { return spec_; }
  const nn::ParamVector& params() const { return params_; }
  nn::ParamVector& params() { return params_; }
  const nn::ParamVector& target_params() const { return target_; }
  nn::ParamVector& target_params() { return target_; }
  const NormStats& norm() const { return norm_; }

  Vector input(const Vector& s, const Vector& a) const;
  Matrix input_batch(const Matrix& states, const Matrix& actions) const;

  double q_normalized(const nn::ParamVector& phi, const Vector& s, const Vector& a) const;
  double q(const Vector& s, const Vector& a) const;
  double to_raw(double q_normalized) const;

  struct Grads {
    double q = 0.0;
    Vector q_s;
    Vector q_a;
  };
  // Raw-unit value and input gradients under params().
  Grads grads(const Vector& s, const Vector& a) const;

  void save(const std::filesystem::path& path) const;
  static CriticNet load(const std::filesystem::path& path);

 private:
  nn::MlpSpec spec_;
  nn::ParamVector params_;
  nn::ParamVector target_;
  NormStats norm_;
  double gamma_ = 0.99;
  int state_dim_ = 0;
  int action_dim_ = 0;
};

struct BracConfig {
  double gamma = 0.99;
  double alpha_bc = 1.0;
  double tau = 0.005;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  int steps = 50000;
  int batch = 256;
  std::vector<int> hidden = {64, 64};
  // Multiplies the -Q term of the actor loss; 0 gives pure behavior cloning.
  double critic_weight = 1.0;

  void validate() const;
};

// Mean of (Qn_phi(s, a) - y)^2 with y = r_n + gamma (1 - done) Qn_target(s', pi(s')).
// y is a constant: no gradient reaches the target parameters or the policy.
nn::LossAndGrad critic_loss(const CriticNet& critic, const PolicyNet& policy,
                            std::span<const Transition> batch, double gamma);

// Mean of -critic_weight Qn_phi(s, pi(s)) + alpha_bc |pi(s) - a|^2, gradient in psi.
nn::LossAndGrad actor_loss(const PolicyNet& policy, const CriticNet& critic,
                           std::span<const Transition> batch, double alpha_bc,
                           double critic_weight);

// Descent steps; both return the pre-step loss. A null optimizer means plain
// gradient descent.
double critic_step(CriticNet& critic, const PolicyNet& policy, std::span<const Transition> batch,
                   const BracConfig& cfg, nn::Adam* adam = nullptr);
double actor_step(PolicyNet& policy, const CriticNet& critic, std::span<const Transition> batch,
                  const BracConfig& cfg, nn::Adam* adam = nullptr);

// target <- (1 - tau) target + tau params. Requires 0 < tau <= 1.
void target_update(CriticNet& critic, double tau);

struct PretrainLogRow {
  int step = 0;
  double td_loss = 0.0;
  double pi_loss = 0.0;
};

struct PretrainResult {
  PolicyNet policy;
  CriticNet critic;
  std::vector<PretrainLogRow> log;
};

// cfg.steps rounds of critic step, actor step, target update on minibatches
// sampled from `transitions`; deterministic given seed. Logs every
// log_every steps (0 disables). on_log, when set, sees each logged row.
PretrainResult pretrain(std::span<const Transition> transitions, const EnvSpec& env,
                        const NormStats& norm, const BracConfig& cfg, std::uint64_t seed,
                        int log_every = 0,
                        const std::function<void(const PretrainLogRow&)>& on_log = {});

}  // namespace dwm

#endif  // DWM_ACTOR_CRITIC_HPP_
