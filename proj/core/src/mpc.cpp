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

#include "dwm/mpc.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "dwm/errors.hpp"

namespace dwm {

DynamicsModel::Jacobians DiffusionDynamicsModel::jacobians(const Vector& s, const Vector& a,
                                                           const NoisePack& noise) const {
  auto jac = model_.jacobians(s, a, noise);
  return {std::move(jac.next), std::move(jac.F_s), std::move(jac.F_a)};
}

ScalarModel::Grads RewardNetModel::grads(const Vector& s, const Vector& a) const {
  auto g = reward_input_grads(net_, s, a);
  return {g.r, std::move(g.r_s), std::move(g.r_a)};
}

ScalarModel::Grads CriticNetModel::grads(const Vector& s, const Vector& a) const {
  auto g = net_.grads(s, a);
  return {g.q, std::move(g.q_s), std::move(g.q_a)};
}

PolicyModel::Jacobians PolicyNetModel::jacobians(const nn::ParamVector& psi, const Vector& s) const {
  auto j = net_.jacobians(psi, s);
  return {std::move(j.a), std::move(j.Pi_s), std::move(j.Pi_psi)};
}

void ModelBundle::validate() const {
  if (!dynamics || !reward || !critic || !policy) throw ConfigError("model bundle is incomplete");
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  PolicyNet policy = PolicyNet::load(dir / "policy.ckpt");
  ModelBundle bundle;
  bundle.psi = policy.params();
  bundle.dynamics = std::make_shared<DiffusionDynamicsModel>(
      diffusion::DiffusionDynamics::load(dir / "dyn.ckpt"));
  bundle.reward = std::make_shared<RewardNetModel>(RewardNet::load(dir / "reward.ckpt"));
  bundle.critic = std::make_shared<CriticNetModel>(CriticNet::load(dir / "critic.ckpt"));
  bundle.policy = std::make_shared<PolicyNetModel>(std::move(policy));
  return bundle;
}

std::string_view to_string(NoiseMode mode) {
  return mode == NoiseMode::kFixedAcrossInnerSteps ? "fixed_across_inner_steps" : "resampled";
}

NoiseMode noise_mode_from_string(std::string_view name) {
  if (name == "fixed_across_inner_steps" || name == "fixed") return NoiseMode::kFixedAcrossInnerSteps;
  if (name == "resampled") return NoiseMode::kResampled;
  throw ConfigError("unknown noise mode '" + std::string(name) + "'");
}

void MpcConfig::validate() const {
  if (H < 1) throw ConfigError("mpc H must be >= 1");
  if (M < 1) throw ConfigError("mpc M must be >= 1");
  if (E < 0) throw ConfigError("mpc E must be >= 0");
  if (!(alpha >= 0.0)) throw ConfigError("mpc alpha must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("mpc gamma must lie in (0, 1]");
  if (K < 1) throw ConfigError("mpc K must be >= 1");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
}

RolloutTape imagine_rollout(const ModelBundle& bundle, const nn::ParamVector& psi,
                            const Vector& s0, const std::vector<NoisePack>& noise, double gamma,
                            bool with_jacobians) {
  bundle.validate();
  if (s0.size() != bundle.dynamics->state_dim()) throw ShapeError("rollout start state dim mismatch");
  const int H = static_cast<int>(noise.size());
  RolloutTape tape;
  tape.noise = noise;
  tape.states.push_back(s0);
  double discount = 1.0;
  for (int j = 0; j <= H; ++j) {
    const Vector& s = tape.states.back();
    if (with_jacobians) {
      auto pj = bundle.policy->jacobians(psi, s);
      tape.actions.push_back(std::move(pj.a));
      tape.Pi_s.push_back(std::move(pj.Pi_s));
      tape.Pi_psi.push_back(std::move(pj.Pi_psi));
    } else {
      tape.actions.push_back(bundle.policy->act(psi, s));
    }
    const Vector& a = tape.actions.back();
    if (j == H) {
      if (with_jacobians) {
        auto qg = bundle.critic->grads(s, a);
        tape.terminal_q = qg.value;
        tape.Q_s = std::move(qg.d_s);
        tape.Q_a = std::move(qg.d_a);
      } else {
        tape.terminal_q = bundle.critic->value(s, a);
      }
      tape.ret += discount * tape.terminal_q;
      break;
    }
    const auto& eps = noise[static_cast<std::size_t>(j)];
    double r = 0.0;
    Vector next;
    if (with_jacobians) {
      auto rg = bundle.reward->grads(s, a);
      r = rg.value;
      tape.r_s.push_back(std::move(rg.d_s));
      tape.r_a.push_back(std::move(rg.d_a));
      auto fj = bundle.dynamics->jacobians(s, a, eps);
      next = std::move(fj.next);
      tape.F_s.push_back(std::move(fj.F_s));
      tape.F_a.push_back(std::move(fj.F_a));
    } else {
      r = bundle.reward->value(s, a);
      next = bundle.dynamics->step(s, a, eps);
    }
    tape.rewards.push_back(r);
    tape.ret += discount * r;
    discount *= gamma;
    tape.states.push_back(std::move(next));
  }
  return tape;
}

void rollout_sensitivities(RolloutTape& tape) {
  if (!tape.has_jacobians()) throw ConfigError("rollout tape was recorded without jacobians");
  const int H = tape.horizon();
  const Eigen::Index d = tape.states.front().size();
  const Eigen::Index P = tape.Pi_psi.front().cols();
  tape.G.assign(static_cast<std::size_t>(H + 1), Matrix());
  tape.D.assign(static_cast<std::size_t>(H + 1), Matrix());
  tape.G[0] = Matrix::Zero(d, P);
  for (int j = 0; j <= H; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    tape.D[uj] = tape.Pi_s[uj] * tape.G[uj] + tape.Pi_psi[uj];
    if (j < H) tape.G[uj + 1] = tape.F_s[uj] * tape.G[uj] + tape.F_a[uj] * tape.D[uj];
  }
}

MpcObjective objective_gradient(const std::vector<RolloutTape>& tapes, const nn::ParamVector& psi,
                                double gamma) {
  if (tapes.empty()) throw ConfigError("objective_gradient needs at least one tape");
  Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(psi.size()));
  MpcObjective out;
  for (const auto& tape : tapes) {
    if (tape.G.empty()) throw ConfigError("rollout tape has no sensitivities");
    const int H = tape.horizon();
    double discount = 1.0;
    for (int j = 0; j < H; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      total += discount * (tape.r_s[uj].transpose() * tape.G[uj] + tape.r_a[uj].transpose() * tape.D[uj]);
      discount *= gamma;
    }
    const auto uh = static_cast<std::size_t>(H);
    total += discount * (tape.Q_s.transpose() * tape.G[uh] + tape.Q_a.transpose() * tape.D[uh]);
    out.returns.push_back(tape.ret);
  }
  const double inv_m = 1.0 / static_cast<double>(tapes.size());
  double sum = 0.0;
  for (double r : out.returns) sum += r;
  out.J_hat = sum / static_cast<double>(tapes.size());
  out.grad_psi = nn::ParamVector::zeros_like(psi);
  out.grad_psi.as_vector() = inv_m * total.transpose();
  return out;
}

std::vector<std::vector<NoisePack>> draw_noise_sequences(const DynamicsModel& dynamics, int H,
                                                         int M, Rng& rng) {
  std::vector<std::vector<NoisePack>> out(static_cast<std::size_t>(M));
  for (auto& seq : out) {
    for (int j = 0; j < H; ++j) seq.push_back(dynamics.draw_noise(rng));
  }
  return out;
}

double estimate_objective(const ModelBundle& bundle, const nn::ParamVector& psi, const Vector& s0,
                          const std::vector<std::vector<NoisePack>>& noise, double gamma) {
  if (noise.empty()) throw ConfigError("estimate_objective needs at least one particle");
  double sum = 0.0;
  for (const auto& seq : noise) sum += imagine_rollout(bundle, psi, s0, seq, gamma, false).ret;
  return sum / static_cast<double>(noise.size());
}

MpcObjective evaluate_objective(const ModelBundle& bundle, const nn::ParamVector& psi,
                                const Vector& s0,
                                const std::vector<std::vector<NoisePack>>& noise, double gamma) {
  std::vector<RolloutTape> tapes;
  tapes.reserve(noise.size());
  for (const auto& seq : noise) {
    tapes.push_back(imagine_rollout(bundle, psi, s0, seq, gamma, true));
    rollout_sensitivities(tapes.back());
  }
  return objective_gradient(tapes, psi, gamma);
}

MpcStep mpc_act(const ModelBundle& bundle, nn::ParamVector& psi, const Vector& s,
                const MpcConfig& cfg, Rng& rng) {
  cfg.validate();
  MpcStep out;
  if (cfg.E == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.diag = {nan, nan, nan, {}};
    out.action = bundle.policy->act(psi, s);
    return out;
  }
  auto noise = draw_noise_sequences(*bundle.dynamics, cfg.H, cfg.M, rng);
  for (int e = 0; e < cfg.E; ++e) {
    if (e > 0 && cfg.noise_mode == NoiseMode::kResampled) {
      noise = draw_noise_sequences(*bundle.dynamics, cfg.H, cfg.M, rng);
    }
    MpcObjective obj = evaluate_objective(bundle, psi, s, noise, cfg.gamma);
    out.diag.j_history.push_back(obj.J_hat);
    const double norm = nn::global_norm(obj.grad_psi);
    out.diag.grad_norm = norm;
    if (!std::isfinite(norm)) throw DivergenceError("mpc gradient is not finite");
    double step = cfg.alpha;
    if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) step *= cfg.grad_clip / norm;
    psi.as_vector() += step * obj.grad_psi.as_vector();
  }
  out.diag.J_before = out.diag.j_history.front();
  out.diag.J_after = estimate_objective(bundle, psi, s, noise, cfg.gamma);
  out.action = bundle.policy->act(psi, s);
  return out;
}

EpisodeResult run_episode(const ModelBundle& bundle, const EnvSpec& env, const MpcConfig& cfg,
                          std::uint64_t seed) {
  bundle.validate();
  cfg.validate();
  Rng rng(derive_seed(seed, 2));
  nn::ParamVector psi = bundle.psi;
  EpisodeResult result;
  int t = 0;
  const PolicyFn policy = [&](const Vector& s) {
    if (cfg.reset_psi_each_step) psi = bundle.psi;
    MpcStep step = mpc_act(bundle, psi, s, cfg, rng);
    result.steps.push_back({t++, step.diag.J_before, step.diag.J_after, step.diag.grad_norm,
                            step.action, 0.0});
    return step.action;
  };
  result.trace = run_policy_episode(env, policy, seed);
  for (std::size_t i = 0; i < result.steps.size(); ++i) {
    result.steps[i].action = result.trace.actions[i];
    result.steps[i].reward = result.trace.rewards[i];
  }
  return result;
}

EpisodeTrace run_frozen_episode(const ModelBundle& bundle, const EnvSpec& env, std::uint64_t seed) {
  if (!bundle.policy) throw ConfigError("model bundle has no policy");
  const PolicyFn policy = [&](const Vector& s) { return bundle.policy->act(bundle.psi, s); };
  return run_policy_episode(env, policy, seed);
}

void write_diagnostics_csv(const std::filesystem::path& path, const EpisodeResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "t,J_before,J_after,grad_norm,action,reward\n";
  for (const auto& row : result.steps) {
    out << row.t << ',' << row.J_before << ',' << row.J_after << ',' << row.grad_norm << ',';
    for (Eigen::Index i = 0; i < row.action.size(); ++i) out << (i ? ";" : "") << row.action[i];
    out << ',' << row.reward << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace dwm
