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

#ifndef DWM_DIFFUSION_HPP_
#define DWM_DIFFUSION_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwm/dataset.hpp"
#include "dwm/nn.hpp"
#include "dwm/rng.hpp"
#include "dwm/stats.hpp"

namespace dwm::diffusion {

// How the predicted noise enters the reverse step
//   h_k(u, s, a, z) = (u - c_k eps_hat(u, k, (s, a))) / sqrt(alpha_k) + sigma_k z.
// kPlain uses c_k = 1 - alpha_k. kDdpm uses c_k = (1 - alpha_k) / sqrt(1 - alpha_bar_k),
// the posterior-mean coefficient for a predictor trained on the noise-prediction
// loss.
enum class ReverseMean { kPlain, kDdpm };

// Diffusion levels are 1-based: alpha(k) for k = 1..K.
struct Schedule {
  int K = 0;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  std::vector<double> sigmas;
  ReverseMean mean_form = ReverseMean::kDdpm;

  double alpha(int k) const { return alphas[static_cast<std::size_t>(k - 1)]; }
  double alpha_bar(int k) const { return alpha_bars[static_cast<std::size_t>(k - 1)]; }
  double sigma(int k) const { return sigmas[static_cast<std::size_t>(k - 1)]; }
  double eps_coef(int k) const;

  // beta linear from beta_lo to beta_hi, alpha = 1 - beta, sigma_k = sqrt(beta_k)
  // except sigma_1 = 0 unless final_step_noise.
  static Schedule linear(int K, double beta_lo = 1e-4, double beta_hi = 0.2,
                         ReverseMean mean_form = ReverseMean::kDdpm,
                         bool final_step_noise = false);
  static Schedule from_alphas(std::vector<double> alphas, std::vector<double> sigmas,
                              ReverseMean mean_form);
};

nlohmann::json schedule_to_json(const Schedule& schedule);
Schedule schedule_from_json(const nlohmann::json& j);

// The Gaussian draws consumed by one sampler call; z[k] holds z_k for
// k = 0..K. z_K seeds the chain and z_{k-1} enters step h_k.
struct NoisePack {
  std::vector<Vector> z;

  int depth() const { return static_cast<int>(z.size()) - 1; }
  static NoisePack draw(int K, int state_dim, Rng& rng);
  static NoisePack zeros(int K, int state_dim);
};

// s^(k) = sqrt(alpha_bar_k) x0 + sqrt(1 - alpha_bar_k) eps
Vector forward_marginal_sample(const Schedule& schedule, const Vector& x0, int k,
                               const Vector& eps);
// One forward kernel q(s^(k) | s^(k-1)).
Vector forward_step(const Schedule& schedule, const Vector& x_prev, int k, const Vector& eps);

// 8 sinusoidal features of k / K.
inline constexpr int kEmbedDim = 8;
Vector timestep_embedding(int k, int K);

// MLP noise predictor on [u | embed(k) | s | a].
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(int state_dim, int action_dim, int K, std::vector<int> hidden, nn::Activation act,
           std::uint64_t seed);
  Denoiser(nn::MlpSpec spec, nn::ParamVector params, int state_dim, int action_dim, int K);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  int depth() const { return K_; }
  const nn::MlpSpec& spec() const { return spec_; }
  const nn::ParamVector& params() const { return params_; }
  nn::ParamVector& params() { return params_; }

  Vector input(const Vector& u, int k, const Vector& s, const Vector& a) const;
  Vector predict(const Vector& u, int k, const Vector& s, const Vector& a) const;

  struct Jacobians {
    Vector eps;
    Matrix du;  // d x d
    Matrix ds;  // d x d
    Matrix da;  // d x m
  };
  Jacobians jacobians(const Vector& u, int k, const Vector& s, const Vector& a) const;

 private:
  nn::MlpSpec spec_;
  nn::ParamVector params_;
  int state_dim_ = 0;
  int action_dim_ = 0;
  int K_ = 0;
};

// Inputs of one noise-prediction minibatch: levels k_b ~ Unif{1..K},
// eps_b ~ N(0, I), noisy_b = forward_marginal_sample(x0_b, k_b, eps_b).
struct DenoiseDraw {
  std::vector<int> levels;
  Matrix eps;
  Matrix noisy;
};
DenoiseDraw draw_denoise_inputs(const Schedule& schedule, const Matrix& x0, Rng& rng);

// Batch mean of |eps - eps_hat|^2.
double denoise_loss(const Matrix& eps, const Matrix& eps_hat);

using nn::LossAndGrad;
// x0, cond_s are d x B, cond_a is m x B.
LossAndGrad denoise_loss_batch(const Denoiser& denoiser, const Schedule& schedule,
                               const Matrix& x0, const Matrix& cond_s, const Matrix& cond_a,
                               Rng& rng);

// Reverse chain s^(K) = z_K, s^(k-1) = h_k(s^(k), s, a, z_{k-1}) for k = K..1.
Vector reverse_sample(const Denoiser& denoiser, const Schedule& schedule, const Vector& s,
                      const Vector& a, const NoisePack& noise);

// A = d s^(0) / d a and B = d s^(0) / d s via the depth recursion
//   A_{k-1} = dh_k/du A_k + dh_k/da,  B_{k-1} = dh_k/du B_k + dh_k/ds,  A_K = B_K = 0.
struct DepthJacobians {
  Matrix A;
  Matrix B;
};
struct SampleWithJacobians {
  Vector sample;
  DepthJacobians jac;
};
SampleWithJacobians reverse_sample_jacobians(const Denoiser& denoiser, const Schedule& schedule,
                                             const Vector& s, const Vector& a,
                                             const NoisePack& noise);

// What the chain's clean sample x0 represents in raw units.
enum class DynamicsTarget {
  kNextState,  // s_next = state_mean + state_std * x0
  kDelta,      // s_next = s + delta_mean + delta_std * x0
};

// Learned transition sampler f_theta(s, a, eps) in raw state units. The chain
// is conditioned on (normalize_state(s), a).
class DiffusionDynamics {
 public:
  DiffusionDynamics() = default;
  DiffusionDynamics(Denoiser denoiser, Schedule schedule, NormStats norm,
                    DynamicsTarget target = DynamicsTarget::kDelta);

  int state_dim() const { return denoiser_.state_dim(); }
  int action_dim() const { return denoiser_.action_dim(); }
  const Denoiser& denoiser() const { return denoiser_; }
  Denoiser& denoiser() { return denoiser_; }
  const Schedule& schedule() const { return schedule_; }
  const NormStats& norm() const { return norm_; }
  DynamicsTarget target() const { return target_; }

  NoisePack draw_noise(Rng& rng) const { return NoisePack::draw(schedule_.K, state_dim(), rng); }
  Vector sample(const Vector& s, const Vector& a, const NoisePack& noise) const;

  struct Jacobians {
    Vector next;
    Matrix F_s;
    Matrix F_a;
  };
  Jacobians jacobians(const Vector& s, const Vector& a, const NoisePack& noise) const;

  // Clean-sample targets and conditioning for training; done transitions skipped.
  struct TrainingData {
    Matrix x0;
    Matrix cond_s;
    Matrix cond_a;
  };
  TrainingData training_data(const std::vector<Transition>& transitions) const;

  void save(const std::filesystem::path& path) const;
  static DiffusionDynamics load(const std::filesystem::path& path);

 private:
  Denoiser denoiser_;
  Schedule schedule_;
  NormStats norm_;
  DynamicsTarget target_ = DynamicsTarget::kDelta;
};

// For each non-terminal held-out transition, averages m_eval sampled next
// states and scores the mean prediction against the true next state (raw
// units, squared error averaged over state dims).
stats::RmseResult one_step_rmse(const DiffusionDynamics& dynamics,
                                const std::vector<Transition>& heldout, int m_eval, Rng& rng);

}  // namespace dwm::diffusion

#endif  // DWM_DIFFUSION_HPP_
