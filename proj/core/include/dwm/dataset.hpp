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

#ifndef DWM_DATASET_HPP_
#define DWM_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwm/env.hpp"
#include "dwm/nn.hpp"
#include "dwm/rng.hpp"

namespace dwm {

struct Transition {
  Vector s;
  Vector a;
  double r = 0.0;
  Vector s_next;
  bool done = false;
};

inline constexpr double kStdFloor = 1e-8;

// z-scoring statistics. States and rewards use all transitions; the
// state-delta statistics (s_next - s) skip done transitions, matching the
// dynamics training set.
struct NormStats {
  Vector state_mean;
  Vector state_std;
  double reward_mean = 0.0;
  double reward_std = 1.0;
  Vector delta_mean;
  Vector delta_std;

  Vector normalize_state(const Vector& s) const {
    return (s - state_mean).cwiseQuotient(state_std);
  }
  Vector denormalize_state(const Vector& z) const {
    return z.cwiseProduct(state_std) + state_mean;
  }
  double normalize_reward(double r) const { return (r - reward_mean) / reward_std; }
  double denormalize_reward(double z) const { return z * reward_std + reward_mean; }

  static NormStats identity(int state_dim);
};

nlohmann::json norm_to_json(const NormStats& norm);
NormStats norm_from_json(const nlohmann::json& j);

struct DatasetMeta {
  std::string env;
  Tier tier = Tier::kMedium;
  std::size_t count = 0;
  int episodes = 0;
  std::uint64_t seed = 0;
  int state_dim = 0;
  int action_dim = 0;
  NormStats norm;
  ScoreRef score_ref;
  // Running mean of rewards accumulated while collecting.
  double streaming_reward_mean = 0.0;
  double mean_episode_return = 0.0;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Transition> transitions;

  std::size_t size() const { return transitions.size(); }
};

// Rolls out `episodes` episodes of the scripted behavior policy. The score
// reference is a separate Monte Carlo estimate over score_ref_episodes.
Dataset collect_dataset(const EnvSpec& spec, Tier tier, int episodes, std::uint64_t seed,
                        int score_ref_episodes = 100);

// Requires at least two transitions.
NormStats fit_norm_stats(const std::vector<Transition>& transitions);

// i.i.d. uniform indices with replacement.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t batch_size, Rng& rng);
std::vector<Transition> sample_batch(const Dataset& dataset, std::size_t batch_size, Rng& rng);

// Splits whole episodes off the end of the dataset for evaluation.
struct DatasetSplit {
  std::vector<Transition> train;
  std::vector<Transition> heldout;
};
DatasetSplit split_episodes(const Dataset& dataset, double heldout_fraction);

// .dwmd file: one UTF-8 JSON line with the meta, then per transition
// (s, a, r, s_next, done) as little-endian float64 with done stored as 0/1.
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

nlohmann::json meta_to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const nlohmann::json& j);

}  // namespace dwm

#endif  // DWM_DATASET_HPP_
