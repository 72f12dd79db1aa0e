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

#include "dwm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "dwm/dataset.hpp"
#include "dwm/errors.hpp"
#include "dwm/reward_model.hpp"
#include "dwm/stats.hpp"

namespace dwm {
namespace {

namespace fs = std::filesystem;

// Reads known keys from a JSON object and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(context_ + " must be a JSON object");
  }
  ~ObjectReader() = default;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(context_ + "." + key + ": " + e.what());
    }
  }
  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError("unknown config key " + context_ + "." + item.key());
    }
  }

 private:
  const nlohmann::json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

std::ofstream open_csv(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

void check_finite(double value, std::string_view what, int step) {
  if (!std::isfinite(value)) {
    throw DivergenceError(std::string(what) + " diverged at step " + std::to_string(step));
  }
}

// Steps at which the RMSE curve is sampled: round(steps * i / n), i = 1..n.
std::vector<int> checkpoint_steps(int steps, int n) {
  std::vector<int> out;
  if (steps <= 0) return out;
  for (int i = 1; i <= n; ++i) {
    const int s = static_cast<int>(std::llround(static_cast<double>(steps) * i / n));
    if (out.empty() || s > out.back()) out.push_back(s);
  }
  return out;
}

std::vector<Transition> thin_heldout(const std::vector<Transition>& heldout, int max_count) {
  std::vector<Transition> kept;
  for (const auto& tr : heldout) {
    if (!tr.done) kept.push_back(tr);
  }
  if (max_count <= 0 || kept.size() <= static_cast<std::size_t>(max_count)) return kept;
  std::vector<Transition> out;
  const double stride = static_cast<double>(kept.size()) / max_count;
  for (int i = 0; i < max_count; ++i) out.push_back(kept[static_cast<std::size_t>(i * stride)]);
  return out;
}

void write_rmse_row(std::ostream& out, const RunConfig& cfg, Stage stage, int index, int step,
                    const stats::RmseResult& r) {
  out << cfg.env << ',' << to_string(cfg.tier) << ',' << to_string(stage) << ',' << index << ','
      << step << ',' << r.rmse << ',' << r.sd << ',' << r.se << ',' << r.n << '\n';
}

constexpr std::string_view kRmseHeader = "env,tier,stage,checkpoint,step,rmse,sd,se,n\n";

struct TrainSplit {
  EnvSpec env;
  DatasetSplit split;
  NormStats norm;
};

TrainSplit load_split(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_path());
  TrainSplit out{make_env(ds.meta.env, cfg.process_noise), split_episodes(ds, cfg.heldout_fraction), {}};
  out.norm = fit_norm_stats(out.split.train);
  return out;
}

void train_dynamics(const RunConfig& cfg) {
  const auto& dc = cfg.dynamics;
  const TrainSplit data = load_split(cfg);
  const auto schedule = diffusion::Schedule::linear(dc.K, dc.beta_lo, dc.beta_hi, dc.mean_form,
                                                    dc.final_step_noise);
  diffusion::Denoiser denoiser(data.env.state_dim, data.env.action_dim, dc.K, dc.hidden,
                               nn::Activation::kTanh, derive_seed(cfg.train_seed, 20));
  diffusion::DiffusionDynamics model(std::move(denoiser), schedule, data.norm, dc.target);
  const auto train = model.training_data(data.split.train);
  if (train.x0.cols() == 0) throw ConfigError("dynamics training set is empty");
  const auto heldout = thin_heldout(data.split.heldout, dc.rmse_max_heldout);

  fs::create_directories(cfg.checkpoint_path());
  auto loss_csv = open_csv(cfg.output_dir / "dynamics_loss.csv");
  loss_csv << "step,loss\n";
  auto rmse_csv = open_csv(cfg.output_dir / "dynamics_rmse.csv");
  rmse_csv << kRmseHeader;

  nn::Adam opt(model.denoiser().params());
  Rng rng(derive_seed(cfg.train_seed, 21));
  const auto ckpts = checkpoint_steps(dc.steps, cfg.rmse_checkpoints);
  std::size_t next_ckpt = 0;
  const auto n = static_cast<std::size_t>(train.x0.cols());
  const Eigen::Index b = dc.batch;
  Matrix x0(train.x0.rows(), b), cs(train.cond_s.rows(), b), ca(train.cond_a.rows(), b);
  double window = 0.0;
  int window_count = 0;
  for (int step = 1; step <= dc.steps; ++step) {
    const auto idx = sample_indices(n, static_cast<std::size_t>(b), rng);
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto c = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]);
      x0.col(i) = train.x0.col(c);
      cs.col(i) = train.cond_s.col(c);
      ca.col(i) = train.cond_a.col(c);
    }
    const auto lg = diffusion::denoise_loss_batch(model.denoiser(), schedule, x0, cs, ca, rng);
    check_finite(lg.loss, "dynamics loss", step);
    opt.descend(model.denoiser().params(), lg.grad, scheduled_lr(dc.lr_schedule, dc.lr, step, dc.steps));
    window += lg.loss;
    ++window_count;
    if (cfg.log_every > 0 && step % cfg.log_every == 0) {
      loss_csv << step << ',' << window / window_count << '\n';
      window = 0.0;
      window_count = 0;
    }
    if (next_ckpt < ckpts.size() && step == ckpts[next_ckpt]) {
      // Common random numbers across checkpoints.
      Rng eval_rng(derive_seed(cfg.train_seed, 22));
      const auto r = diffusion::one_step_rmse(model, heldout, dc.m_eval, eval_rng);
      write_rmse_row(rmse_csv, cfg, Stage::kDynamics, static_cast<int>(next_ckpt) + 1, step, r);
      model.save(cfg.checkpoint_path() / ("dyn_step" + std::to_string(step) + ".ckpt"));
      ++next_ckpt;
    }
  }
  model.save(cfg.checkpoint_path() / "dyn.ckpt");
}

void train_reward(const RunConfig& cfg) {
  const auto& rc = cfg.reward;
  const TrainSplit data = load_split(cfg);
  RewardNet net(data.env.state_dim, data.env.action_dim, rc.hidden, nn::Activation::kTanh,
                derive_seed(cfg.train_seed, 30), data.norm);
  const auto& train = data.split.train;
  const auto& heldout = data.split.heldout;

  fs::create_directories(cfg.checkpoint_path());
  auto loss_csv = open_csv(cfg.output_dir / "reward_loss.csv");
  loss_csv << "step,loss\n";
  auto rmse_csv = open_csv(cfg.output_dir / "reward_rmse.csv");
  rmse_csv << kRmseHeader;

  nn::Adam opt(net.params());
  Rng rng(derive_seed(cfg.train_seed, 31));
  const auto ckpts = checkpoint_steps(rc.steps, cfg.rmse_checkpoints);
  std::size_t next_ckpt = 0;
  std::vector<Transition> batch(static_cast<std::size_t>(rc.batch));
  double window = 0.0;
  int window_count = 0;
  for (int step = 1; step <= rc.steps; ++step) {
    const auto idx = sample_indices(train.size(), batch.size(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = train[idx[i]];
    const double loss = reward_fit_step(net, batch, scheduled_lr(rc.lr_schedule, rc.lr, step, rc.steps), &opt);
    check_finite(loss, "reward loss", step);
    window += loss;
    ++window_count;
    if (cfg.log_every > 0 && step % cfg.log_every == 0) {
      loss_csv << step << ',' << window / window_count << '\n';
      window = 0.0;
      window_count = 0;
    }
    if (next_ckpt < ckpts.size() && step == ckpts[next_ckpt]) {
      write_rmse_row(rmse_csv, cfg, Stage::kReward, static_cast<int>(next_ckpt) + 1, step,
                     reward_rmse(net, heldout.empty() ? train : heldout));
      net.save(cfg.checkpoint_path() / ("reward_step" + std::to_string(step) + ".ckpt"));
      ++next_ckpt;
    }
  }
  net.save(cfg.checkpoint_path() / "reward.ckpt");
}

void train_policy(const RunConfig& cfg) {
  const TrainSplit data = load_split(cfg);
  fs::create_directories(cfg.checkpoint_path());
  auto loss_csv = open_csv(cfg.output_dir / "policy_loss.csv");
  loss_csv << "step,td_loss,pi_loss\n";
  const auto result = pretrain(data.split.train, data.env, data.norm, cfg.policy, cfg.train_seed,
                               cfg.log_every, [&](const PretrainLogRow& row) {
                                 loss_csv << row.step << ',' << row.td_loss << ',' << row.pi_loss << '\n';
                               });
  result.policy.save(cfg.checkpoint_path() / "policy.ckpt");
  result.critic.save(cfg.checkpoint_path() / "critic.ckpt");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

std::string_view to_string(LrSchedule schedule) {
  return schedule == LrSchedule::kCosine ? "cosine" : "constant";
}

LrSchedule lr_schedule_from_string(std::string_view name) {
  if (name == "cosine") return LrSchedule::kCosine;
  if (name == "constant") return LrSchedule::kConstant;
  throw ConfigError("unknown lr schedule '" + std::string(name) + "'");
}

double scheduled_lr(LrSchedule schedule, double base, int step, int steps) {
  if (schedule == LrSchedule::kConstant || steps <= 0) return base;
  const double progress = static_cast<double>(step - 1) / static_cast<double>(steps);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

fs::path RunConfig::dataset_path() const {
  return dataset.is_absolute() ? dataset : output_dir / dataset;
}

fs::path RunConfig::checkpoint_path() const {
  return checkpoint_dir.is_absolute() ? checkpoint_dir : output_dir / checkpoint_dir;
}

void RunConfig::validate() const {
  (void)make_env(env, process_noise);
  if (process_noise < 0.0) throw ConfigError("process_noise must be >= 0");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (rmse_checkpoints < 1) throw ConfigError("rmse_checkpoints must be >= 1");
  if (log_every < 0) throw ConfigError("log_every must be >= 0");
  if (dynamics.K < 1 || dynamics.steps < 0 || dynamics.batch < 1 || dynamics.m_eval < 1 ||
      !(dynamics.lr >= 0.0)) {
    throw ConfigError("invalid dynamics training config");
  }
  if (reward.steps < 0 || reward.batch < 1 || !(reward.lr >= 0.0)) {
    throw ConfigError("invalid reward training config");
  }
  policy.validate();
  mpc.validate();
  if (mpc.K != dynamics.K) throw ConfigError("mpc.K must equal dynamics.K");
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  const auto& d = c.dynamics;
  return {
      {"env", c.env},
      {"tier", std::string(to_string(c.tier))},
      {"process_noise", c.process_noise},
      {"episodes", c.episodes},
      {"data_seed", c.data_seed},
      {"train_seed", c.train_seed},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir.string()},
      {"dataset", c.dataset.string()},
      {"checkpoint_dir", c.checkpoint_dir.string()},
      {"heldout_fraction", c.heldout_fraction},
      {"log_every", c.log_every},
      {"rmse_checkpoints", c.rmse_checkpoints},
      {"write_episode_diagnostics", c.write_episode_diagnostics},
      {"dynamics",
       {{"K", d.K},
        {"beta_lo", d.beta_lo},
        {"beta_hi", d.beta_hi},
        {"mean_form", d.mean_form == diffusion::ReverseMean::kDdpm ? "ddpm" : "plain"},
        {"final_step_noise", d.final_step_noise},
        {"target", d.target == diffusion::DynamicsTarget::kDelta ? "delta" : "next_state"},
        {"hidden", d.hidden},
        {"steps", d.steps},
        {"batch", d.batch},
        {"lr", d.lr},
        {"lr_schedule", std::string(to_string(d.lr_schedule))},
        {"m_eval", d.m_eval},
        {"rmse_max_heldout", d.rmse_max_heldout}}},
      {"reward",
       {{"hidden", c.reward.hidden},
        {"steps", c.reward.steps},
        {"batch", c.reward.batch},
        {"lr", c.reward.lr},
        {"lr_schedule", std::string(to_string(c.reward.lr_schedule))}}},
      {"policy",
       {{"gamma", c.policy.gamma},
        {"alpha_bc", c.policy.alpha_bc},
        {"tau", c.policy.tau},
        {"actor_lr", c.policy.actor_lr},
        {"critic_lr", c.policy.critic_lr},
        {"steps", c.policy.steps},
        {"batch", c.policy.batch},
        {"hidden", c.policy.hidden},
        {"critic_weight", c.policy.critic_weight}}},
      {"mpc",
       {{"H", c.mpc.H},
        {"M", c.mpc.M},
        {"E", c.mpc.E},
        {"alpha", c.mpc.alpha},
        {"gamma", c.mpc.gamma},
        {"K", c.mpc.K},
        {"reset_psi_each_step", c.mpc.reset_psi_each_step},
        {"noise_mode", std::string(to_string(c.mpc.noise_mode))},
        {"grad_clip", c.mpc.grad_clip}}},
  };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  ObjectReader top(j, "config");
  std::string tier = std::string(to_string(c.tier));
  std::string output_dir = c.output_dir.string();
  std::string dataset = c.dataset.string();
  std::string checkpoint_dir = c.checkpoint_dir.string();
  top.get("env", c.env);
  top.get("tier", tier);
  top.get("process_noise", c.process_noise);
  top.get("episodes", c.episodes);
  top.get("data_seed", c.data_seed);
  top.get("train_seed", c.train_seed);
  top.get("seeds", c.seeds);
  top.get("output_dir", output_dir);
  top.get("dataset", dataset);
  top.get("checkpoint_dir", checkpoint_dir);
  top.get("heldout_fraction", c.heldout_fraction);
  top.get("log_every", c.log_every);
  top.get("rmse_checkpoints", c.rmse_checkpoints);
  top.get("write_episode_diagnostics", c.write_episode_diagnostics);
  c.tier = tier_from_string(tier);
  c.output_dir = output_dir;
  c.dataset = dataset;
  c.checkpoint_dir = checkpoint_dir;

  if (const auto* dj = top.child("dynamics")) {
    auto& d = c.dynamics;
    ObjectReader r(*dj, "dynamics");
    std::string mean_form = d.mean_form == diffusion::ReverseMean::kDdpm ? "ddpm" : "plain";
    std::string target = d.target == diffusion::DynamicsTarget::kDelta ? "delta" : "next_state";
    r.get("K", d.K);
    r.get("beta_lo", d.beta_lo);
    r.get("beta_hi", d.beta_hi);
    r.get("mean_form", mean_form);
    r.get("final_step_noise", d.final_step_noise);
    r.get("target", target);
    r.get("hidden", d.hidden);
    r.get("steps", d.steps);
    r.get("batch", d.batch);
    r.get("lr", d.lr);
    std::string lr_schedule(to_string(d.lr_schedule));
    r.get("lr_schedule", lr_schedule);
    d.lr_schedule = lr_schedule_from_string(lr_schedule);
    r.get("m_eval", d.m_eval);
    r.get("rmse_max_heldout", d.rmse_max_heldout);
    r.finish();
    if (mean_form == "ddpm") {
      d.mean_form = diffusion::ReverseMean::kDdpm;
    } else if (mean_form == "plain") {
      d.mean_form = diffusion::ReverseMean::kPlain;
    } else {
      throw ConfigError("dynamics.mean_form must be ddpm or plain");
    }
    if (target == "delta") {
      d.target = diffusion::DynamicsTarget::kDelta;
    } else if (target == "next_state") {
      d.target = diffusion::DynamicsTarget::kNextState;
    } else {
      throw ConfigError("dynamics.target must be delta or next_state");
    }
    c.mpc.K = d.K;
  }
  if (const auto* rj = top.child("reward")) {
    ObjectReader r(*rj, "reward");
    r.get("hidden", c.reward.hidden);
    r.get("steps", c.reward.steps);
    r.get("batch", c.reward.batch);
    r.get("lr", c.reward.lr);
    std::string lr_schedule(to_string(c.reward.lr_schedule));
    r.get("lr_schedule", lr_schedule);
    c.reward.lr_schedule = lr_schedule_from_string(lr_schedule);
    r.finish();
  }
  if (const auto* pj = top.child("policy")) {
    ObjectReader r(*pj, "policy");
    r.get("gamma", c.policy.gamma);
    r.get("alpha_bc", c.policy.alpha_bc);
    r.get("tau", c.policy.tau);
    r.get("actor_lr", c.policy.actor_lr);
    r.get("critic_lr", c.policy.critic_lr);
    r.get("steps", c.policy.steps);
    r.get("batch", c.policy.batch);
    r.get("hidden", c.policy.hidden);
    r.get("critic_weight", c.policy.critic_weight);
    r.finish();
  }
  if (const auto* mj = top.child("mpc")) {
    ObjectReader r(*mj, "mpc");
    std::string noise_mode(to_string(c.mpc.noise_mode));
    r.get("H", c.mpc.H);
    r.get("M", c.mpc.M);
    r.get("E", c.mpc.E);
    r.get("alpha", c.mpc.alpha);
    r.get("gamma", c.mpc.gamma);
    r.get("K", c.mpc.K);
    r.get("reset_psi_each_step", c.mpc.reset_psi_each_step);
    r.get("noise_mode", noise_mode);
    r.get("grad_clip", c.mpc.grad_clip);
    r.finish();
    c.mpc.noise_mode = noise_mode_from_string(noise_mode);
  }
  top.finish();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* out = std::getenv("DWM_OUT"); out != nullptr && *out != '\0') cfg.output_dir = out;
}

DatasetMeta cmd_gen_data(const RunConfig& cfg) {
  cfg.validate();
  const EnvSpec env = make_env(cfg.env, cfg.process_noise);
  const Dataset ds = collect_dataset(env, cfg.tier, cfg.episodes, cfg.data_seed);
  save_dataset(cfg.dataset_path(), ds);
  return ds.meta;
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kDynamics:
      return "dynamics";
    case Stage::kReward:
      return "reward";
    case Stage::kPolicy:
      return "policy";
  }
  return "unknown";
}

Stage stage_from_string(std::string_view name) {
  if (name == "dynamics") return Stage::kDynamics;
  if (name == "reward") return Stage::kReward;
  if (name == "policy") return Stage::kPolicy;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

void cmd_train(const RunConfig& cfg, Stage stage) {
  cfg.validate();
  switch (stage) {
    case Stage::kDynamics:
      train_dynamics(cfg);
      break;
    case Stage::kReward:
      train_reward(cfg);
      break;
    case Stage::kPolicy:
      train_policy(cfg);
      break;
  }
}

std::string_view to_string(Method method) { return method == Method::kFrozen ? "frozen" : "mpcwdwm"; }

Method method_from_string(std::string_view name) {
  if (name == "frozen") return Method::kFrozen;
  if (name == "mpcwdwm" || name == "mpc") return Method::kMpc;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::uint64_t eval_episode_seed(std::uint64_t seed) { return derive_seed(seed, 0xE7A1); }

EvalResult cmd_eval(const RunConfig& cfg, Method method) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg.dataset_path());
  const EnvSpec env = make_env(cfg.env, cfg.process_noise);
  const ModelBundle bundle = load_bundle(cfg.checkpoint_path());
  if (const auto* dyn = dynamic_cast<const DiffusionDynamicsModel*>(bundle.dynamics.get())) {
    if (dyn->model().schedule().K != cfg.mpc.K) throw ConfigError("mpc.K does not match the dynamics checkpoint");
  }

  EvalResult result;
  const std::string name(to_string(method));
  for (const auto seed : cfg.seeds) {
    const std::uint64_t episode = eval_episode_seed(seed);
    double ret = 0.0;
    if (method == Method::kFrozen) {
      ret = run_frozen_episode(bundle, env, episode).total_return;
    } else {
      const EpisodeResult ep = run_episode(bundle, env, cfg.mpc, episode);
      ret = ep.trace.total_return;
      if (cfg.write_episode_diagnostics) {
        const fs::path dir = cfg.output_dir / "diagnostics";
        fs::create_directories(dir);
        write_diagnostics_csv(dir / (name + "_seed" + std::to_string(seed) + ".csv"), ep);
      }
    }
    result.seeds.push_back(seed);
    result.returns.push_back(ret);
    result.scores.push_back(normalized_score(ds.meta.score_ref, ret));
  }
  result.row = {cfg.env,
                std::string(to_string(cfg.tier)),
                name,
                stats::mean(result.scores),
                stats::sample_stddev(result.scores),
                result.scores.size(),
                stats::mean(result.returns)};

  auto rows = open_csv(cfg.output_dir / ("eval_" + name + ".csv"));
  rows << "env,tier,method,mean_score,std_score,n,mean_return\n";
  const auto& r = result.row;
  rows << r.env << ',' << r.tier << ',' << r.method << ',' << r.mean_score << ',' << r.std_score
       << ',' << r.n << ',' << r.mean_return << '\n';
  auto episodes = open_csv(cfg.output_dir / ("eval_" + name + "_episodes.csv"));
  episodes << "env,tier,method,seed,return,score\n";
  for (std::size_t i = 0; i < result.seeds.size(); ++i) {
    episodes << r.env << ',' << r.tier << ',' << r.method << ',' << result.seeds[i] << ','
             << result.returns[i] << ',' << result.scores[i] << '\n';
  }
  return result;
}

std::vector<fs::path> cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingArtifactError("report directory not found: " + dir.string());
  struct Row {
    std::string checkpoint, step, rmse, sd, n;
  };
  std::map<std::pair<std::string, std::string>, std::vector<Row>> curves;
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 9 && name.ends_with("_rmse.csv")) {
      inputs.push_back(entry.path());
    }
  }
  std::sort(inputs.begin(), inputs.end());
  if (inputs.empty()) throw MissingArtifactError("no *_rmse.csv files under " + dir.string());
  for (const auto& path : inputs) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* key : {"env", "stage", "checkpoint", "step", "rmse", "sd", "n"}) {
      if (!col.contains(key)) throw IoError(path.string() + " lacks column " + key);
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != header.size()) throw IoError("ragged row in " + path.string());
      curves[{cells[col["env"]], cells[col["stage"]]}].push_back(
          {cells[col["checkpoint"]], cells[col["step"]], cells[col["rmse"]], cells[col["sd"]],
           cells[col["n"]]});
    }
  }
  std::vector<fs::path> written;
  for (const auto& [key, rows] : curves) {
    const fs::path path = dir / "report" / (key.first + "_" + key.second + "_curve.csv");
    auto out = open_csv(path);
    out << "checkpoint,step,rmse,sd,n,se\n";
    for (const auto& r : rows) {
      const double sd = std::stod(r.sd);
      const double n = std::stod(r.n);
      out << r.checkpoint << ',' << r.step << ',' << r.rmse << ',' << r.sd << ',' << r.n << ','
          << (n > 0 ? sd / std::sqrt(n) : 0.0) << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace dwm
