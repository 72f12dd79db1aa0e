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

#include "dwm/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dwm/errors.hpp"

namespace dwm {
namespace {

constexpr double kPi = std::numbers::pi;

// pointmass
const Vector& point_goal() {
  static const Vector goal = (Vector(2) << 1.0, 0.5).finished();
  return goal;
}
constexpr double kPointLimit = 2.0;

// reacher
constexpr double kLink1 = 1.0;
constexpr double kLink2 = 0.8;
const Vector& reacher_target() {
  static const Vector target = (Vector(2) << 0.6, 1.1).finished();
  return target;
}

// pendulum
constexpr double kGravity = 10.0;
constexpr double kDamping = 0.1;
constexpr double kTorqueGain = 3.0;
constexpr double kMaxSpeed = 8.0;

Vector reacher_tip(const Vector& q) {
  Vector tip(2);
  tip[0] = kLink1 * std::cos(q[0]) + kLink2 * std::cos(q[0] + q[1]);
  tip[1] = kLink1 * std::sin(q[0]) + kLink2 * std::sin(q[0] + q[1]);
  return tip;
}

Matrix reacher_tip_jacobian(const Vector& q) {
  Matrix jac(2, 2);
  const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
  const double s12 = std::sin(q[0] + q[1]), c12 = std::cos(q[0] + q[1]);
  jac << -kLink1 * s1 - kLink2 * s12, -kLink2 * s12, kLink1 * c1 + kLink2 * c12, kLink2 * c12;
  return jac;
}

Vector clip(const Vector& v, double lo, double hi) { return v.cwiseMax(lo).cwiseMin(hi); }

double wrap_angle(double th) { return std::atan2(std::sin(th), std::cos(th)); }

Vector expert_action(const EnvSpec& spec, const Vector& s, double gain_scale) {
  switch (spec.kind) {
    case EnvKind::kPointMass:
      return 5.0 * gain_scale * (point_goal() - s);
    case EnvKind::kReacher: {
      const Vector err = reacher_target() - reacher_tip(s);
      return 4.0 * gain_scale * reacher_tip_jacobian(s).transpose() * err;
    }
    case EnvKind::kPendulum: {
      const double th = std::atan2(s[1], s[0]);
      const double w = s[2];
      Vector u(1);
      if (s[0] > 0.8) {
        // gravity-compensated PD near upright
        u[0] = -(kGravity * std::sin(th) + 8.0 * th + 2.5 * w) / kTorqueGain;
      } else {
        // energy pumping towards the upright rest energy
        const double energy = 0.5 * w * w + kGravity * std::cos(th);
        const double deficit = kGravity - energy;
        const double direction = std::abs(w) < 1e-3 ? 1.0 : (w > 0 ? 1.0 : -1.0);
        u[0] = 2.0 * direction * std::clamp(deficit, -1.0, 1.0);
      }
      return gain_scale * u;
    }
  }
  return Vector::Zero(spec.action_dim);
}

}  // namespace

EnvSpec make_env(std::string_view name, double process_noise) {
  EnvSpec spec;
  spec.name = std::string(name);
  spec.process_noise = process_noise;
  if (name == "pointmass") {
    spec.kind = EnvKind::kPointMass;
    spec.state_dim = spec.action_dim = spec.noise_dim = 2;
    spec.action_low = Vector::Constant(2, -1.0);
    spec.action_high = Vector::Constant(2, 1.0);
    spec.dt = 0.1;
    spec.reward_lo = -(3.0 * 3.0 + 2.5 * 2.5) - 0.01 * 2.0;
    spec.reward_hi = 0.0;
  } else if (name == "reacher") {
    spec.kind = EnvKind::kReacher;
    spec.state_dim = spec.action_dim = spec.noise_dim = 2;
    spec.action_low = Vector::Constant(2, -1.0);
    spec.action_high = Vector::Constant(2, 1.0);
    spec.dt = 0.1;
    const double reach = kLink1 + kLink2 + reacher_target().norm();
    spec.reward_lo = -reach * reach - 0.01 * 2.0;
    spec.reward_hi = 0.0;
  } else if (name == "pendulum") {
    spec.kind = EnvKind::kPendulum;
    spec.state_dim = 3;
    spec.action_dim = 1;
    spec.noise_dim = 2;
    spec.action_low = Vector::Constant(1, -2.0);
    spec.action_high = Vector::Constant(1, 2.0);
    spec.dt = 0.05;
    spec.reward_lo = -4.0 - 0.1 * kMaxSpeed * kMaxSpeed - 0.001 * 4.0;
    spec.reward_hi = 0.0;
  } else {
    throw ConfigError("unknown env '" + std::string(name) + "'");
  }
  return spec;
}

std::vector<std::string> env_names() { return {"pointmass", "reacher", "pendulum"}; }

EnvState env_reset(const EnvSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  EnvState state;
  switch (spec.kind) {
    case EnvKind::kPointMass:
    case EnvKind::kReacher:
      state.s = rng.uniform_vector(Vector::Constant(2, -0.1), Vector::Constant(2, 0.1));
      break;
    case EnvKind::kPendulum: {
      const double th = kPi + rng.uniform(-0.1, 0.1);
      const double w = rng.uniform(-0.1, 0.1);
      state.s = (Vector(3) << std::cos(th), std::sin(th), w).finished();
      break;
    }
  }
  return state;
}

Vector clip_action(const EnvSpec& spec, const Vector& a) {
  if (a.size() != spec.action_dim) throw ShapeError("action has wrong dimension for " + spec.name);
  return a.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
}

double env_reward(const EnvSpec& spec, const Vector& s, const Vector& a) {
  switch (spec.kind) {
    case EnvKind::kPointMass:
      return -(s - point_goal()).squaredNorm() - 0.01 * a.squaredNorm();
    case EnvKind::kReacher:
      return -(reacher_tip(s) - reacher_target()).squaredNorm() - 0.01 * a.squaredNorm();
    case EnvKind::kPendulum:
      return -2.0 * (1.0 - s[0]) - 0.1 * s[2] * s[2] - 0.001 * a.squaredNorm();
  }
  return 0.0;
}

StepResult env_step(const EnvSpec& spec, const EnvState& state, const Vector& a,
                    const Vector& noise) {
  if (state.done) throw EnvError("env_step called on a finished episode");
  if (state.s.size() != spec.state_dim) throw ShapeError("state has wrong dimension");
  if (noise.size() != spec.noise_dim) throw ShapeError("noise has wrong dimension");
  const Vector u = clip_action(spec, a);
  StepResult out;
  out.reward = env_reward(spec, state.s, u);
  const double sigma = spec.process_noise;
  switch (spec.kind) {
    case EnvKind::kPointMass:
      out.state.s = clip(state.s + spec.dt * u + sigma * noise, -kPointLimit, kPointLimit);
      break;
    case EnvKind::kReacher:
      out.state.s = clip(state.s + spec.dt * u + sigma * noise, -kPi, kPi);
      break;
    case EnvKind::kPendulum: {
      const double th = std::atan2(state.s[1], state.s[0]);
      const double w = state.s[2];
      const double accel = kGravity * std::sin(th) - kDamping * w + kTorqueGain * u[0];
      const double w_next = std::clamp(w + spec.dt * accel + sigma * noise[0], -kMaxSpeed, kMaxSpeed);
      const double th_next = wrap_angle(th + spec.dt * w_next + sigma * noise[1]);
      out.state.s = (Vector(3) << std::cos(th_next), std::sin(th_next), w_next).finished();
      break;
    }
  }
  out.state.t = state.t + 1;
  out.state.done = out.state.t >= spec.max_episode_len;
  return out;
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) {}

const EnvState& Environment::reset(std::uint64_t seed) {
  state_ = env_reset(spec_, seed);
  noise_rng_ = Rng(derive_seed(seed, 1));
  return state_;
}

StepResult Environment::step(const Vector& a) {
  const Vector noise = noise_rng_.normal_vector(spec_.noise_dim);
  StepResult out = env_step(spec_, state_, a, noise);
  state_ = out.state;
  return out;
}

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::kRandom:
      return "random";
    case Tier::kMedium:
      return "medium";
    case Tier::kExpert:
      return "expert";
  }
  return "random";
}

Tier tier_from_string(std::string_view name) {
  if (name == "random") return Tier::kRandom;
  if (name == "medium") return Tier::kMedium;
  if (name == "expert") return Tier::kExpert;
  throw ConfigError("unknown tier '" + std::string(name) + "'");
}

Vector behavior_policy(const EnvSpec& spec, Tier tier, const Vector& s, Rng& rng) {
  switch (tier) {
    case Tier::kRandom:
      return rng.uniform_vector(spec.action_low, spec.action_high);
    case Tier::kExpert:
      return clip_action(spec, expert_action(spec, s, 1.0));
    case Tier::kMedium: {
      const double explore = 0.3 * (spec.action_high - spec.action_low).maxCoeff() / 2.0;
      const double gain = spec.kind == EnvKind::kPendulum ? 0.5 : 0.25;
      const Vector a = expert_action(spec, s, gain) + explore * rng.normal_vector(spec.action_dim);
      return clip_action(spec, a);
    }
  }
  return Vector::Zero(spec.action_dim);
}

double normalized_score(const ScoreRef& ref, double ret) {
  if (!(ref.expert_return > ref.random_return)) {
    throw ConfigError("degenerate score reference for " + ref.env);
  }
  return 100.0 * (ret - ref.random_return) / (ref.expert_return - ref.random_return);
}

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, 1000 + static_cast<std::uint64_t>(episode));
}

EpisodeTrace run_policy_episode(const EnvSpec& spec, const PolicyFn& policy, std::uint64_t seed) {
  Environment env(spec);
  EpisodeTrace trace;
  trace.states.push_back(env.reset(seed).s);
  while (!env.state().done) {
    const Vector a = clip_action(spec, policy(env.state().s));
    const StepResult step = env.step(a);
    trace.actions.push_back(a);
    trace.rewards.push_back(step.reward);
    trace.total_return += step.reward;
    trace.states.push_back(step.state.s);
  }
  return trace;
}

ScoreRef estimate_score_ref(const EnvSpec& spec, int episodes, std::uint64_t seed) {
  ScoreRef ref;
  ref.env = spec.name;
  for (Tier tier : {Tier::kRandom, Tier::kExpert}) {
    double sum = 0.0;
    for (int e = 0; e < episodes; ++e) {
      Rng rng(derive_seed(seed, 500 + static_cast<std::uint64_t>(e)));
      const auto trace = run_policy_episode(
          spec, [&](const Vector& s) { return behavior_policy(spec, tier, s, rng); },
          episode_seed(seed, e));
      sum += trace.total_return;
    }
    (tier == Tier::kRandom ? ref.random_return : ref.expert_return) = sum / episodes;
  }
  return ref;
}

}  // namespace dwm
