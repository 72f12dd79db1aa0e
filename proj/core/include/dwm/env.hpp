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

#ifndef DWM_ENV_HPP_
#define DWM_ENV_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dwm/nn.hpp"
#include "dwm/rng.hpp"

namespace dwm {

// Analytic toy control tasks. All three start near a fixed configuration and
// run for max_episode_len steps; the last step is flagged done.
//
//   pointmass  s = (x, y), a = velocity in [-1,1]^2, dt = 0.1
//              s' = clip(s + dt a + sigma w, -2, 2)
//              r  = -|s - (1, 0.5)|^2 - 0.01 |a|^2          d_0 = U[-0.1,0.1]^2
//   reacher    s = (q1, q2) joint angles, a = joint rates in [-1,1]^2, dt = 0.1,
//              links 1.0 and 0.8, target tip (0.6, 1.1)
//              q' = clip(q + dt a + sigma w, -pi, pi)
//              r  = -|tip(q) - target|^2 - 0.01 |a|^2      d_0 = U[-0.1,0.1]^2
//   pendulum   s = (cos th, sin th, w) with th = 0 upright, a = torque in [-2,2]
//              w' = clip(w + dt (10 sin th - 0.1 w + 3 a) + sigma n1, -8, 8)
//              th' = th + dt w' + sigma n2, dt = 0.05
//              r  = -2 (1 - cos th) - 0.1 w^2 - 0.001 a^2
//              d_0: th = pi + U[-0.1,0.1], w = U[-0.1,0.1]
enum class EnvKind { kPointMass, kReacher, kPendulum };

struct EnvSpec {
  std::string name;
  EnvKind kind = EnvKind::kPointMass;
  int state_dim = 0;
  int action_dim = 0;
  int noise_dim = 0;
  Vector action_low;
  Vector action_high;
  int max_episode_len = 200;
  double dt = 0.1;
  double process_noise = 0.01;
  // Every reward satisfies reward_lo <= r <= reward_hi.
  double reward_lo = 0.0;
  double reward_hi = 0.0;
};

// Throws ConfigError for an unknown name.
EnvSpec make_env(std::string_view name, double process_noise = 0.01);
std::vector<std::string> env_names();

struct EnvState {
  Vector s;
  int t = 0;
  bool done = false;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
};

EnvState env_reset(const EnvSpec& spec, std::uint64_t seed);

// Pure transition. `noise` is a standard-normal draw of length noise_dim that
// is scaled by spec.process_noise. The action is clipped to the box first.
// Throws EnvError if state.done.
StepResult env_step(const EnvSpec& spec, const EnvState& state, const Vector& a,
                    const Vector& noise);

double env_reward(const EnvSpec& spec, const Vector& s, const Vector& a);
Vector clip_action(const EnvSpec& spec, const Vector& a);

// Stateful wrapper that owns a seeded process-noise stream. The noise drawn at
// step t does not depend on the actions taken, so two runs with the same seed
// see identical disturbances.
class Environment {
 public:
  explicit Environment(EnvSpec spec);

  const EnvState& reset(std::uint64_t seed);
  StepResult step(const Vector& a);

  const EnvState& state() const { return state_; }
  const EnvSpec& spec() const { return spec_; }

 private:
  EnvSpec spec_;
  EnvState state_;
  Rng noise_rng_;
};

enum class Tier { kRandom, kMedium, kExpert };

std::string_view to_string(Tier tier);
Tier tier_from_string(std::string_view name);

// Scripted behavior controllers. random is uniform over the action box;
// expert is a saturated closed-form controller; medium is a weaker-gain
// version of expert (gain x0.25, x0.5 for pendulum) plus Gaussian exploration
// noise with std 0.3 x half the action range.
Vector behavior_policy(const EnvSpec& spec, Tier tier, const Vector& s, Rng& rng);

struct ScoreRef {
  std::string env;
  double random_return = 0.0;
  double expert_return = 0.0;
};

// 100 * (ret - random) / (expert - random). Throws ConfigError when
// expert_return <= random_return.
double normalized_score(const ScoreRef& ref, double ret);

using PolicyFn = std::function<Vector(const Vector&)>;

struct EpisodeTrace {
  std::vector<Vector> states;   // s_0 .. s_T
  std::vector<Vector> actions;  // clipped actions actually applied
  std::vector<double> rewards;
  double total_return = 0.0;
};

EpisodeTrace run_policy_episode(const EnvSpec& spec, const PolicyFn& policy, std::uint64_t seed);

// Mean undiscounted return of the random and expert tiers.
ScoreRef estimate_score_ref(const EnvSpec& spec, int episodes, std::uint64_t seed);

std::uint64_t episode_seed(std::uint64_t seed, int episode);

}  // namespace dwm

#endif  // DWM_ENV_HPP_
