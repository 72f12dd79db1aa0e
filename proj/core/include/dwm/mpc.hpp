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

#ifndef DWM_MPC_HPP_
#define DWM_MPC_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

#include "dwm/actor_critic.hpp"
#include "dwm/diffusion.hpp"
#include "dwm/env.hpp"
#include "dwm/nn.hpp"
#include "dwm/reward_model.hpp"
#include "dwm/rng.hpp"

namespace dwm {

using diffusion::NoisePack;

// Model interfaces consumed by the planner. Learned networks and analytic
// oracles both implement them, so every gradient path can be checked against
// a known closed form.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual NoisePack draw_noise(Rng& rng) const = 0;
  virtual Vector step(const Vector& s, const Vector& a, const NoisePack& noise) const = 0;

  struct Jacobians {
    Vector next;
    Matrix F_s;  // d x d
    Matrix F_a;  // d x m
  };
  virtual Jacobians jacobians(const Vector& s, const Vector& a, const NoisePack& noise) const = 0;
};

// A scalar function of (s, a) with input gradients: r_xi and Q_phi.
class ScalarModel {
 public:
  virtual ~ScalarModel() = default;
  virtual double value(const Vector& s, const Vector& a) const = 0;

  struct Grads {
    double value = 0.0;
    Vector d_s;
    Vector d_a;
  };
  virtual Grads grads(const Vector& s, const Vector& a) const = 0;
};
using RewardModel = ScalarModel;
using CriticModel = ScalarModel;

class PolicyModel {
 public:
  virtual ~PolicyModel() = default;
  virtual Vector act(const nn::ParamVector& psi, const Vector& s) const = 0;

  struct Jacobians {
    Vector a;
    Matrix Pi_s;    // m x d
    Matrix Pi_psi;  // m x |psi|
  };
  virtual Jacobians jacobians(const nn::ParamVector& psi, const Vector& s) const = 0;
};

// Adapters over the learned networks.
class DiffusionDynamicsModel final : public DynamicsModel {
 public:
  explicit DiffusionDynamicsModel(diffusion::DiffusionDynamics model) : model_(std::move(model)) {}
  int state_dim() const override { return model_.state_dim(); }
  int action_dim() const override { return model_.action_dim(); }
  NoisePack draw_noise(Rng& rng) const override { return model_.draw_noise(rng); }
  Vector step(const Vector& s, const Vector& a, const NoisePack& noise) const override {
    return model_.sample(s, a, noise);
  }
  Jacobians jacobians(const Vector& s, const Vector& a, const NoisePack& noise) const override;
  const diffusion::DiffusionDynamics& model() const { return model_; }

 private:
  diffusion::DiffusionDynamics model_;
};

class RewardNetModel final : public ScalarModel {
 public:
  explicit RewardNetModel(RewardNet net) : net_(std::move(net)) {}
  double value(const Vector& s, const Vector& a) const override { return reward_eval(net_, s, a); }
  Grads grads(const Vector& s, const Vector& a) const override;

 private:
  RewardNet net_;
};

class CriticNetModel final : public ScalarModel {
 public:
  explicit CriticNetModel(CriticNet net) : net_(std::move(net)) {}
  double value(const Vector& s, const Vector& a) const override { return net_.q(s, a); }
  Grads grads(const Vector& s, const Vector& a) const override;

 private:
  CriticNet net_;
};

class PolicyNetModel final : public PolicyModel {
 public:
  explicit PolicyNetModel(PolicyNet net) : net_(std::move(net)) {}
  Vector act(const nn::ParamVector& psi, const Vector& s) const override { return net_.act(psi, s); }
  Jacobians jacobians(const nn::ParamVector& psi, const Vector& s) const override;
  const PolicyNet& net() const { return net_; }

 private:
  PolicyNet net_;
};

// f_theta, r_xi, Q_phi, pi_psi plus the pretrained psi.
struct ModelBundle {
  std::shared_ptr<const DynamicsModel> dynamics;
  std::shared_ptr<const RewardModel> reward;
  std::shared_ptr<const CriticModel> critic;
  std::shared_ptr<const PolicyModel> policy;
  nn::ParamVector psi;

  // Throws ConfigError if a component is missing.
  void validate() const;
};

// Loads dyn.ckpt, reward.ckpt, critic.ckpt and policy.ckpt from dir.
ModelBundle load_bundle(const std::filesystem::path& dir);

enum class NoiseMode { kFixedAcrossInnerSteps, kResampled };
std::string_view to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(std::string_view name);

struct MpcConfig {
  int H = 4;
  int M = 8;
  int E = 3;
  double alpha = 1e-4;
  double gamma = 0.99;
  int K = 8;
  bool reset_psi_each_step = false;
  NoiseMode noise_mode = NoiseMode::kFixedAcrossInnerSteps;
  // Global-norm clip on the ascent direction; 0 disables.
  double grad_clip = 10.0;

  void validate() const;
};

// One imagined trajectory under a fixed noise sequence. Index j runs 0..H;
// actions[H] = pi(states[H]) feeds the terminal critic. The Jacobian slots are
// filled when the rollout is recorded with jacobians.
struct RolloutTape {
  std::vector<Vector> states;
  std::vector<Vector> actions;
  std::vector<double> rewards;
  double terminal_q = 0.0;
  double ret = 0.0;

  std::vector<Matrix> Pi_s;    // H + 1
  std::vector<Matrix> Pi_psi;  // H + 1
  std::vector<Matrix> F_s;     // H
  std::vector<Matrix> F_a;     // H
  std::vector<Vector> r_s;     // H
  std::vector<Vector> r_a;     // H
  Vector Q_s;
  Vector Q_a;

  std::vector<Matrix> G;  // H + 1, d x |psi|
  std::vector<Matrix> D;  // H + 1, m x |psi|

  std::vector<NoisePack> noise;

  bool has_jacobians() const { return !Pi_psi.empty(); }
  int horizon() const { return static_cast<int>(rewards.size()); }
};

// L(psi; eps) = sum_{j<H} gamma^j r(s_j, a_j) + gamma^H Q(s_H, pi(s_H)) with
// s_{j+1} = f(s_j, a_j, eps_j). Requires noise.size() == H (H may be 0).
RolloutTape imagine_rollout(const ModelBundle& bundle, const nn::ParamVector& psi,
                            const Vector& s0, const std::vector<NoisePack>& noise, double gamma,
                            bool with_jacobians);

// G_0 = 0, D_j = Pi_s(j) G_j + Pi_psi(j), G_{j+1} = F_s(j) G_j + F_a(j) D_j.
// Throws ConfigError if the tape was recorded without Jacobians.
void rollout_sensitivities(RolloutTape& tape);

struct MpcObjective {
  double J_hat = 0.0;
  std::vector<double> returns;
  nn::ParamVector grad_psi;
};

// Monte Carlo mean over tapes of
//   sum_j gamma^j (r_s G_j + r_a D_j) + gamma^H (Q_s G_H + Q_a D_H).
MpcObjective objective_gradient(const std::vector<RolloutTape>& tapes, const nn::ParamVector& psi,
                                double gamma);

// M noise sequences of length H.
std::vector<std::vector<NoisePack>> draw_noise_sequences(const DynamicsModel& dynamics, int H,
                                                         int M, Rng& rng);

// J_hat over fixed noise sequences without gradients.
double estimate_objective(const ModelBundle& bundle, const nn::ParamVector& psi, const Vector& s0,
                          const std::vector<std::vector<NoisePack>>& noise, double gamma);

// Full gradient of J_hat over fixed noise sequences.
MpcObjective evaluate_objective(const ModelBundle& bundle, const nn::ParamVector& psi,
                                const Vector& s0,
                                const std::vector<std::vector<NoisePack>>& noise, double gamma);

struct MpcDiagnostics {
  // NaN when E = 0.
  double J_before = 0.0;
  double J_after = 0.0;
  double grad_norm = 0.0;
  // Objective at the start of each inner step.
  std::vector<double> j_history;
};

struct MpcStep {
  Vector action;
  MpcDiagnostics diag;
};

// E steps of psi <- psi + alpha grad J_hat from s, then a = pi_psi(s). psi is
// updated in place. With E = 0 no randomness is consumed.
MpcStep mpc_act(const ModelBundle& bundle, nn::ParamVector& psi, const Vector& s,
                const MpcConfig& cfg, Rng& rng);

struct StepDiagnostics {
  int t = 0;
  double J_before = 0.0;
  double J_after = 0.0;
  double grad_norm = 0.0;
  Vector action;
  double reward = 0.0;
};

struct EpisodeResult {
  EpisodeTrace trace;
  std::vector<StepDiagnostics> steps;
};

// Closed-loop episode with mpc_act at every real step. The planner's noise
// stream is derived from seed independently of the environment's.
EpisodeResult run_episode(const ModelBundle& bundle, const EnvSpec& env, const MpcConfig& cfg,
                          std::uint64_t seed);

// The pretrained policy with no adaptation.
EpisodeTrace run_frozen_episode(const ModelBundle& bundle, const EnvSpec& env, std::uint64_t seed);

// Columns t, J_before, J_after, grad_norm, action, reward; action entries are
// joined with ';'.
void write_diagnostics_csv(const std::filesystem::path& path, const EpisodeResult& result);

}  // namespace dwm

#endif  // DWM_MPC_HPP_
