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

#include "dwm/actor_critic.hpp"

#include <cmath>
#include <string>

#include "dwm/checkpoint.hpp"
#include "dwm/errors.hpp"
#include "dwm/rng.hpp"

namespace dwm {
namespace {

Matrix column_stack(std::span<const Transition> batch, Vector Transition::*field) {
  const Eigen::Index rows = (batch.front().*field).size();
  Matrix out(rows, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = batch[i].*field;
  return out;
}

nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

PolicyNet::PolicyNet(int state_dim, Vector action_low, Vector action_high, std::vector<int> hidden,
                     nn::Activation act, std::uint64_t seed, NormStats norm) {
  nn::MlpSpec spec;
  spec.input_dim = state_dim;
  spec.hidden_dims = std::move(hidden);
  spec.output_dim = static_cast<int>(action_low.size());
  spec.activation = act;
  spec.output_activation = nn::Activation::kTanh;
  nn::ParamVector params = nn::init_params(spec, seed);
  *this = PolicyNet(std::move(spec), std::move(params), std::move(action_low),
                    std::move(action_high), std::move(norm));
}

PolicyNet::PolicyNet(nn::MlpSpec spec, nn::ParamVector params, Vector action_low,
                     Vector action_high, NormStats norm)
    : spec_(std::move(spec)), params_(std::move(params)), low_(std::move(action_low)),
      high_(std::move(action_high)), norm_(std::move(norm)) {
  if (spec_.output_activation != nn::Activation::kTanh) {
    throw ShapeError("policy output activation must be tanh");
  }
  if (low_.size() != spec_.output_dim || high_.size() != spec_.output_dim ||
      norm_.state_mean.size() != spec_.input_dim) {
    throw ShapeError("policy bounds or norm stats do not match the spec");
  }
  if ((high_.array() <= low_.array()).any()) throw ConfigError("policy action box is empty");
  nn::check_params(spec_, params_);
  center_ = 0.5 * (low_ + high_);
  half_ = 0.5 * (high_ - low_);
}

Matrix PolicyNet::normalized_inputs(const Matrix& states) const {
  if (states.rows() != state_dim()) throw ShapeError("policy state dim mismatch");
  return (states.colwise() - norm_.state_mean).array().colwise() / norm_.state_std.array();
}

Vector PolicyNet::act(const nn::ParamVector& psi, const Vector& s) const {
  if (s.size() != state_dim()) throw ShapeError("policy state dim mismatch");
  return center_ + half_.cwiseProduct(nn::mlp_forward(spec_, psi, norm_.normalize_state(s)));
}

Matrix PolicyNet::act_batch(const nn::ParamVector& psi, const Matrix& states) const {
  const Matrix y = nn::mlp_forward_batch(spec_, psi, normalized_inputs(states));
  return (half_.asDiagonal() * y).colwise() + center_;
}

PolicyNet::Jacobians PolicyNet::jacobians(const nn::ParamVector& psi, const Vector& s) const {
  const Vector x = norm_.normalize_state(s);
  Jacobians out;
  out.a = center_ + half_.cwiseProduct(nn::mlp_forward(spec_, psi, x));
  out.Pi_s = half_.asDiagonal() * nn::mlp_input_jacobian(spec_, psi, x) *
             norm_.state_std.cwiseInverse().asDiagonal();
  out.Pi_psi = half_.asDiagonal() * nn::mlp_param_jacobian(spec_, psi, x);
  return out;
}

nn::ParamVector PolicyNet::vjp(const nn::ParamVector& psi, const Matrix& states,
                               const Matrix& upstream) const {
  return nn::mlp_backward_batch(spec_, psi, normalized_inputs(states), half_.asDiagonal() * upstream)
      .param_grad;
}

void PolicyNet::save(const std::filesystem::path& path) const {
  const nlohmann::json extra = {{"kind", "policy"},
                                {"action_low", vector_to_json(low_)},
                                {"action_high", vector_to_json(high_)},
                                {"norm", norm_to_json(norm_)}};
  save_checkpoint(path, spec_, params_, extra);
}

PolicyNet PolicyNet::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.extra.value("kind", "") != "policy") throw IoError(path.string() + " is not a policy checkpoint");
  return {ckpt.spec, std::move(ckpt.params), vector_from_json(ckpt.extra.at("action_low")),
          vector_from_json(ckpt.extra.at("action_high")), norm_from_json(ckpt.extra.at("norm"))};
}

CriticNet::CriticNet(int state_dim, int action_dim, std::vector<int> hidden, nn::Activation act,
                     std::uint64_t seed, NormStats norm, double gamma) {
  nn::MlpSpec spec;
  spec.input_dim = state_dim + action_dim;
  spec.hidden_dims = std::move(hidden);
  spec.output_dim = 1;
  spec.activation = act;
  nn::ParamVector params = nn::init_params(spec, seed);
  nn::ParamVector target = params;
  *this = CriticNet(std::move(spec), std::move(params), std::move(target), std::move(norm), gamma,
                    state_dim, action_dim);
}

CriticNet::CriticNet(nn::MlpSpec spec, nn::ParamVector params, nn::ParamVector target_params,
                     NormStats norm, double gamma, int state_dim, int action_dim)
    : spec_(std::move(spec)), params_(std::move(params)), target_(std::move(target_params)),
      norm_(std::move(norm)), gamma_(gamma), state_dim_(state_dim), action_dim_(action_dim) {
  if (spec_.input_dim != state_dim + action_dim || spec_.output_dim != 1) {
    throw ShapeError("critic must map state_dim + action_dim to 1");
  }
  if (norm_.state_mean.size() != state_dim) throw ShapeError("critic norm stats dim mismatch");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("critic gamma must lie in (0, 1)");
  nn::check_params(spec_, params_);
  nn::check_params(spec_, target_);
}

Vector CriticNet::input(const Vector& s, const Vector& a) const {
  if (s.size() != state_dim_ || a.size() != action_dim_) throw ShapeError("critic input dims mismatch");
  Vector x(spec_.input_dim);
  x << norm_.normalize_state(s), a;
  return x;
}

Matrix CriticNet::input_batch(const Matrix& states, const Matrix& actions) const {
  if (states.rows() != state_dim_ || actions.rows() != action_dim_ || states.cols() != actions.cols()) {
    throw ShapeError("critic batch dims mismatch");
  }
  Matrix x(spec_.input_dim, states.cols());
  x.topRows(state_dim_) =
      (states.colwise() - norm_.state_mean).array().colwise() / norm_.state_std.array();
  x.bottomRows(action_dim_) = actions;
  return x;
}

double CriticNet::q_normalized(const nn::ParamVector& phi, const Vector& s, const Vector& a) const {
  return nn::mlp_forward(spec_, phi, input(s, a))[0];
}

double CriticNet::to_raw(double qn) const {
  return norm_.reward_std * qn + norm_.reward_mean / (1.0 - gamma_);
}

double CriticNet::q(const Vector& s, const Vector& a) const { return to_raw(q_normalized(params_, s, a)); }

CriticNet::Grads CriticNet::grads(const Vector& s, const Vector& a) const {
  const Vector x = input(s, a);
  const Matrix jac = nn::mlp_input_jacobian(spec_, params_, x);
  Grads out;
  out.q = to_raw(nn::mlp_forward(spec_, params_, x)[0]);
  out.q_s = norm_.reward_std * jac.row(0).head(state_dim_).transpose().cwiseQuotient(norm_.state_std);
  out.q_a = norm_.reward_std * jac.row(0).tail(action_dim_).transpose();
  return out;
}

void CriticNet::save(const std::filesystem::path& path) const {
  const std::vector<double> target(target_.values().begin(), target_.values().end());
  const nlohmann::json extra = {{"kind", "critic"},
                                {"state_dim", state_dim_},
                                {"action_dim", action_dim_},
                                {"gamma", gamma_},
                                {"norm", norm_to_json(norm_)},
                                {"target_params", target}};
  save_checkpoint(path, spec_, params_, extra);
}

CriticNet CriticNet::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  const auto& extra = ckpt.extra;
  if (extra.value("kind", "") != "critic") throw IoError(path.string() + " is not a critic checkpoint");
  nn::ParamVector target(ckpt.params.layout(), extra.at("target_params").get<std::vector<double>>());
  return {ckpt.spec, std::move(ckpt.params), std::move(target), norm_from_json(extra.at("norm")),
          extra.at("gamma").get<double>(), extra.at("state_dim").get<int>(),
          extra.at("action_dim").get<int>()};
}

void BracConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("brac gamma must lie in (0, 1)");
  if (alpha_bc < 0.0) throw ConfigError("alpha_bc must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (actor_lr < 0.0 || critic_lr < 0.0) throw ConfigError("learning rates must be >= 0");
  if (steps < 0 || batch < 1) throw ConfigError("steps must be >= 0 and batch >= 1");
}

nn::LossAndGrad critic_loss(const CriticNet& critic, const PolicyNet& policy,
                            std::span<const Transition> batch, double gamma) {
  if (batch.empty()) throw ShapeError("empty critic batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const Matrix s = column_stack(batch, &Transition::s);
  const Matrix a = column_stack(batch, &Transition::a);
  const Matrix s_next = column_stack(batch, &Transition::s_next);
  const Matrix a_next = policy.act_batch(policy.params(), s_next);
  const Matrix q_next =
      nn::mlp_forward_batch(critic.spec(), critic.target_params(), critic.input_batch(s_next, a_next));
  Matrix target(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& tr = batch[static_cast<std::size_t>(i)];
    const double mask = tr.done ? 0.0 : 1.0;
    target(0, i) = critic.norm().normalize_reward(tr.r) + gamma * mask * q_next(0, i);
  }
  const Matrix x = critic.input_batch(s, a);
  const Matrix resid = nn::mlp_forward_batch(critic.spec(), critic.params(), x) - target;
  nn::LossAndGrad out;
  out.loss = resid.squaredNorm() / static_cast<double>(n);
  out.grad = nn::mlp_backward_batch(critic.spec(), critic.params(), x,
                                    (2.0 / static_cast<double>(n)) * resid)
                 .param_grad;
  return out;
}

nn::LossAndGrad actor_loss(const PolicyNet& policy, const CriticNet& critic,
                           std::span<const Transition> batch, double alpha_bc,
                           double critic_weight) {
  if (batch.empty()) throw ShapeError("empty actor batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix s = column_stack(batch, &Transition::s);
  const Matrix a_data = column_stack(batch, &Transition::a);
  const Matrix a_pi = policy.act_batch(policy.params(), s);
  const Matrix x = critic.input_batch(s, a_pi);
  const Matrix q = nn::mlp_forward_batch(critic.spec(), critic.params(), x);
  const Matrix diff = a_pi - a_data;

  nn::LossAndGrad out;
  out.loss = inv_n * (-critic_weight * q.sum() + alpha_bc * diff.squaredNorm());
  Matrix upstream = (2.0 * alpha_bc * inv_n) * diff;
  if (critic_weight != 0.0) {
    const Matrix dq_dx =
        nn::mlp_backward_batch(critic.spec(), critic.params(), x, Matrix::Constant(1, n, -critic_weight * inv_n))
            .input_grad;
    upstream += dq_dx.bottomRows(critic.action_dim());
  }
  out.grad = policy.vjp(policy.params(), s, upstream);
  return out;
}

double critic_step(CriticNet& critic, const PolicyNet& policy, std::span<const Transition> batch,
                   const BracConfig& cfg, nn::Adam* adam) {
  nn::LossAndGrad lg = critic_loss(critic, policy, batch, cfg.gamma);
  if (adam != nullptr) {
    adam->descend(critic.params(), lg.grad, cfg.critic_lr);
  } else {
    critic.params() = nn::sgd_step(critic.params(), lg.grad, -cfg.critic_lr);
  }
  return lg.loss;
}

double actor_step(PolicyNet& policy, const CriticNet& critic, std::span<const Transition> batch,
                  const BracConfig& cfg, nn::Adam* adam) {
  nn::LossAndGrad lg = actor_loss(policy, critic, batch, cfg.alpha_bc, cfg.critic_weight);
  if (adam != nullptr) {
    adam->descend(policy.params(), lg.grad, cfg.actor_lr);
  } else {
    policy.params() = nn::sgd_step(policy.params(), lg.grad, -cfg.actor_lr);
  }
  return lg.loss;
}

void target_update(CriticNet& critic, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  auto target = critic.target_params().as_vector();
  target = (1.0 - tau) * target + tau * critic.params().as_vector();
}

PretrainResult pretrain(std::span<const Transition> transitions, const EnvSpec& env,
                        const NormStats& norm, const BracConfig& cfg, std::uint64_t seed,
                        int log_every, const std::function<void(const PretrainLogRow&)>& on_log) {
  cfg.validate();
  if (transitions.empty()) throw ConfigError("pretrain: empty dataset");
  PretrainResult out{
      PolicyNet(env.state_dim, env.action_low, env.action_high, cfg.hidden, nn::Activation::kTanh,
                derive_seed(seed, 10), norm),
      CriticNet(env.state_dim, env.action_dim, cfg.hidden, nn::Activation::kTanh,
                derive_seed(seed, 11), norm, cfg.gamma),
      {}};
  nn::Adam actor_opt(out.policy.params());
  nn::Adam critic_opt(out.critic.params());
  Rng rng(derive_seed(seed, 12));
  std::vector<Transition> batch(static_cast<std::size_t>(cfg.batch));
  for (int step = 1; step <= cfg.steps; ++step) {
    const auto idx = sample_indices(transitions.size(), batch.size(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = transitions[idx[i]];
    const double td = critic_step(out.critic, out.policy, batch, cfg, &critic_opt);
    const double pi = actor_step(out.policy, out.critic, batch, cfg, &actor_opt);
    target_update(out.critic, cfg.tau);
    if (!std::isfinite(td) || !std::isfinite(pi)) {
      throw DivergenceError("pretrain diverged at step " + std::to_string(step));
    }
    if (log_every > 0 && step % log_every == 0) {
      out.log.push_back({step, td, pi});
      if (on_log) on_log(out.log.back());
    }
  }
  return out;
}

}  // namespace dwm
