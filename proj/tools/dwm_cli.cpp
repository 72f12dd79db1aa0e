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

// dwm: dataset generation, staged training, evaluation and RMSE reports.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 missing artifact, 4 numerical divergence.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dwm/errors.hpp"
#include "dwm/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kMissing = 3, kDivergence = 4 };

struct Overrides {
  std::string config;
  std::optional<std::string> env;
  std::optional<std::string> tier;
  std::optional<int> episodes;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> out;
  std::optional<std::string> dataset;
  std::optional<std::string> checkpoint_dir;
  std::optional<double> process_noise;
  std::optional<int> log_every;
  std::optional<int> steps;
  std::optional<int> H, M, E, K;
  std::optional<double> alpha;
  std::optional<std::string> noise_mode;
  bool reset_psi = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run config");
  cmd->add_option("--env", o.env, "pointmass | reacher | pendulum");
  cmd->add_option("--tier", o.tier, "random | medium | expert");
  cmd->add_option("--out", o.out, "output directory (DWM_OUT takes precedence)");
  cmd->add_option("--dataset", o.dataset, "dataset path");
  cmd->add_option("--checkpoint-dir", o.checkpoint_dir, "checkpoint directory");
  cmd->add_option("--process-noise", o.process_noise, "environment process noise std");
}

dwm::RunConfig resolve(const Overrides& o, std::optional<dwm::Stage> stage = std::nullopt) {
  dwm::RunConfig cfg = o.config.empty() ? dwm::RunConfig{} : dwm::load_run_config(o.config);
  if (o.env) cfg.env = *o.env;
  if (o.tier) cfg.tier = dwm::tier_from_string(*o.tier);
  if (o.episodes) cfg.episodes = *o.episodes;
  if (o.data_seed) cfg.data_seed = *o.data_seed;
  if (o.train_seed) cfg.train_seed = *o.train_seed;
  if (o.seeds) cfg.seeds = *o.seeds;
  if (o.out) cfg.output_dir = *o.out;
  if (o.dataset) cfg.dataset = *o.dataset;
  if (o.checkpoint_dir) cfg.checkpoint_dir = *o.checkpoint_dir;
  if (o.process_noise) cfg.process_noise = *o.process_noise;
  if (o.log_every) cfg.log_every = *o.log_every;
  if (o.steps && stage) {
    switch (*stage) {
      case dwm::Stage::kDynamics:
        cfg.dynamics.steps = *o.steps;
        break;
      case dwm::Stage::kReward:
        cfg.reward.steps = *o.steps;
        break;
      case dwm::Stage::kPolicy:
        cfg.policy.steps = *o.steps;
        break;
    }
  }
  if (o.H) cfg.mpc.H = *o.H;
  if (o.M) cfg.mpc.M = *o.M;
  if (o.E) cfg.mpc.E = *o.E;
  if (o.K) cfg.mpc.K = cfg.dynamics.K = *o.K;
  if (o.alpha) cfg.mpc.alpha = *o.alpha;
  if (o.noise_mode) cfg.mpc.noise_mode = dwm::noise_mode_from_string(*o.noise_mode);
  if (o.reset_psi) cfg.mpc.reset_psi_each_step = true;
  dwm::apply_env_overrides(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion world model MPC toolkit"};
  app.require_subcommand(1);
  Overrides o;

  auto* gen = app.add_subcommand("gen-data", "collect an offline dataset");
  add_common(gen, o);
  gen->add_option("--episodes", o.episodes, "episodes to collect");
  gen->add_option("--seed", o.data_seed, "collection seed");

  std::string stage_name;
  auto* train = app.add_subcommand("train", "train one model stage");
  add_common(train, o);
  train->add_option("--stage", stage_name, "dynamics | reward | policy")->required();
  train->add_option("--steps", o.steps, "optimizer steps for the stage");
  train->add_option("--seed", o.train_seed, "training seed");
  train->add_option("--log-every", o.log_every, "loss logging cadence");
  train->add_option("--K", o.K, "diffusion depth");

  std::string method_name;
  auto* eval = app.add_subcommand("eval", "evaluate frozen or adapted policy");
  add_common(eval, o);
  eval->add_option("--method", method_name, "frozen | mpcwdwm")->required();
  eval->add_option("--seeds", o.seeds, "evaluation seeds");
  eval->add_option("--H", o.H, "imagined horizon");
  eval->add_option("--M", o.M, "particles");
  eval->add_option("--E", o.E, "inner ascent steps");
  eval->add_option("--K", o.K, "diffusion depth");
  eval->add_option("--alpha", o.alpha, "ascent step size");
  eval->add_option("--noise-mode", o.noise_mode, "fixed_across_inner_steps | resampled");
  eval->add_flag("--reset-psi", o.reset_psi, "restore pretrained psi before every real step");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "merge RMSE curves");
  report->add_option("dir", report_dir, "output directory to scan")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help requests exit 0; every other usage error is a config error.
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (gen->parsed()) {
      const auto cfg = resolve(o);
      const auto meta = dwm::cmd_gen_data(cfg);
      std::cout << "wrote " << cfg.dataset_path().string() << ": " << meta.count
                << " transitions, mean episode return " << meta.mean_episode_return
                << ", reference random " << meta.score_ref.random_return << " expert "
                << meta.score_ref.expert_return << '\n';
    } else if (train->parsed()) {
      const auto stage = dwm::stage_from_string(stage_name);
      const auto cfg = resolve(o, stage);
      dwm::cmd_train(cfg, stage);
      std::cout << "trained " << dwm::to_string(stage) << " into " << cfg.checkpoint_path().string()
                << '\n';
    } else if (eval->parsed()) {
      const auto method = dwm::method_from_string(method_name);
      const auto cfg = resolve(o);
      const auto result = dwm::cmd_eval(cfg, method);
      const auto& r = result.row;
      std::cout << r.env << '-' << r.tier << ' ' << r.method << ": score " << r.mean_score
                << " +- " << r.std_score << " over " << r.n << " seeds (mean return "
                << r.mean_return << ")\n";
    } else if (report->parsed()) {
      for (const auto& path : dwm::cmd_report(report_dir)) std::cout << path.string() << '\n';
    }
  } catch (const dwm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const dwm::MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return kMissing;
  } catch (const dwm::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
