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

#ifndef DWM_HARNESS_HPP_
#define DWM_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dwm/actor_critic.hpp"
#include "dwm/diffusion.hpp"
#include "dwm/env.hpp"
#include "dwm/mpc.hpp"

namespace dwm {

enum class LrSchedule { kConstant, kCosine };
std::string_view to_string(LrSchedule schedule);
LrSchedule lr_schedule_from_string(std::string_view name);
// Learning rate for 1-based step of steps; cosine decays from base to 0.
double scheduled_lr(LrSchedule schedule, double base, int step, int steps);

struct DynamicsTrainConfig {
  int K = 8;
  double beta_lo = 1e-4;
  double beta_hi = 0.2;
  diffusion::ReverseMean mean_form = diffusion::ReverseMean::kDdpm;
  bool final_step_noise = false;
  diffusion::DynamicsTarget target = diffusion::DynamicsTarget::kDelta;
  std::vector<int> hidden = {128, 128};
  int steps = 20000;
  int batch = 256;
  double lr = 1e-3;
  LrSchedule lr_schedule = LrSchedule::kCosine;
  int m_eval = 8;
  // Held-out transitions scored at each RMSE checkpoint; 0 keeps all.
  int rmse_max_heldout = 1000;
};

struct RewardTrainConfig {
  std::vector<int> hidden = {64, 64};
  int steps = 20000;
  int batch = 256;
  double lr = 1e-3;
  LrSchedule lr_schedule = LrSchedule::kCosine;
};

// One training/evaluation run. Relative dataset and checkpoint paths resolve
// against output_dir.
struct RunConfig {
  std::string env = "pointmass";
  Tier tier = Tier::kMedium;
  double process_noise = 0.01;
  int episodes = 50;
  std::uint64_t data_seed = 0;
  std::uint64_t train_seed = 0;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::filesystem::path output_dir = "out";
  std::filesystem::path dataset = "data.dwmd";
  std::filesystem::path checkpoint_dir = "ckpt";
  double heldout_fraction = 0.1;
  int log_every = 100;
  int rmse_checkpoints = 5;
  // Write a diagnostics CSV per evaluation episode.
  bool write_episode_diagnostics = true;

  DynamicsTrainConfig dynamics;
  RewardTrainConfig reward;
  BracConfig policy;
  MpcConfig mpc;

  std::filesystem::path dataset_path() const;
  std::filesystem::path checkpoint_path() const;
  // Throws ConfigError on invalid values.
  void validate() const;
};

nlohmann::json run_config_to_json(const RunConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
// Applies DWM_OUT, when set, to output_dir.
void apply_env_overrides(RunConfig& cfg);

// Generates the dataset, writes it to cfg.dataset_path() and returns its meta.
DatasetMeta cmd_gen_data(const RunConfig& cfg);

enum class Stage { kDynamics, kReward, kPolicy };
std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

// Trains one stage from the dataset and writes
//   <checkpoint_dir>/{dyn,reward,critic,policy}.ckpt
//   <output_dir>/<stage>_loss.csv            every log_every steps
//   <output_dir>/<stage>_rmse.csv            dynamics and reward, at
//                                            rmse_checkpoints evenly spaced steps
// Non-finite losses throw DivergenceError.
void cmd_train(const RunConfig& cfg, Stage stage);

enum class Method { kFrozen, kMpc };
std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

struct EvalRow {
  std::string env;
  std::string tier;
  std::string method;
  double mean_score = 0.0;
  double std_score = 0.0;
  std::size_t n = 0;
  double mean_return = 0.0;
};

struct EvalResult {
  EvalRow row;
  std::vector<std::uint64_t> seeds;
  std::vector<double> returns;
  std::vector<double> scores;
};

// Seed for the evaluation episode of a listed seed, disjoint from the
// data-collection episode seeds.
std::uint64_t eval_episode_seed(std::uint64_t seed);

// Runs one episode per seed and writes <output_dir>/eval_<method>.csv (one
// EvalRow) and eval_<method>_episodes.csv. Throws MissingArtifactError when a
// checkpoint is absent.
EvalResult cmd_eval(const RunConfig& cfg, Method method);

// Merges every <stage>_rmse.csv under dir into report/<env>_<stage>_curve.csv
// with se = sd / sqrt(n) recomputed. Returns the files written.
std::vector<std::filesystem::path> cmd_report(const std::filesystem::path& dir);

}  // namespace dwm

#endif  // DWM_HARNESS_HPP_
