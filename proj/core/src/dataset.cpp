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

#include "dwm/dataset.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "dwm/checkpoint.hpp"
#include "dwm/errors.hpp"

namespace dwm {
namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Two-pass mean and population std over the columns of a set of vectors.
void moments(const std::vector<Vector>& xs, Vector& mean, Vector& stdev) {
  const auto n = static_cast<double>(xs.size());
  mean = Vector::Zero(xs.front().size());
  for (const auto& x : xs) mean += x;
  mean /= n;
  Vector var = Vector::Zero(mean.size());
  for (const auto& x : xs) var += (x - mean).cwiseAbs2();
  stdev = (var / n).cwiseSqrt().cwiseMax(kStdFloor);
}

}  // namespace

NormStats NormStats::identity(int state_dim) {
  NormStats n;
  n.state_mean = Vector::Zero(state_dim);
  n.state_std = Vector::Ones(state_dim);
  n.delta_mean = Vector::Zero(state_dim);
  n.delta_std = Vector::Ones(state_dim);
  return n;
}

nlohmann::json norm_to_json(const NormStats& norm) {
  return {{"state_mean", to_std(norm.state_mean)}, {"state_std", to_std(norm.state_std)},
          {"reward_mean", norm.reward_mean},       {"reward_std", norm.reward_std},
          {"delta_mean", to_std(norm.delta_mean)}, {"delta_std", to_std(norm.delta_std)}};
}

NormStats norm_from_json(const nlohmann::json& j) {
  NormStats norm;
  norm.state_mean = to_eigen(j.at("state_mean").get<std::vector<double>>());
  norm.state_std = to_eigen(j.at("state_std").get<std::vector<double>>());
  norm.reward_mean = j.at("reward_mean").get<double>();
  norm.reward_std = j.at("reward_std").get<double>();
  norm.delta_mean = to_eigen(j.at("delta_mean").get<std::vector<double>>());
  norm.delta_std = to_eigen(j.at("delta_std").get<std::vector<double>>());
  return norm;
}

NormStats fit_norm_stats(const std::vector<Transition>& transitions) {
  if (transitions.size() < 2) throw ConfigError("fit_norm_stats needs at least two transitions");
  NormStats norm;
  std::vector<Vector> states;
  std::vector<Vector> deltas;
  std::vector<Vector> rewards;
  states.reserve(transitions.size());
  for (const auto& tr : transitions) {
    states.push_back(tr.s);
    rewards.push_back(Vector::Constant(1, tr.r));
    if (!tr.done) deltas.push_back(tr.s_next - tr.s);
  }
  moments(states, norm.state_mean, norm.state_std);
  Vector rm, rs;
  moments(rewards, rm, rs);
  norm.reward_mean = rm[0];
  norm.reward_std = rs[0];
  if (deltas.empty()) {
    norm.delta_mean = Vector::Zero(norm.state_mean.size());
    norm.delta_std = Vector::Ones(norm.state_mean.size());
  } else {
    moments(deltas, norm.delta_mean, norm.delta_std);
  }
  return norm;
}

Dataset collect_dataset(const EnvSpec& spec, Tier tier, int episodes, std::uint64_t seed,
                        int score_ref_episodes) {
  if (episodes < 1) throw ConfigError("collect_dataset needs episodes >= 1");
  Dataset ds;
  Rng policy_rng(derive_seed(seed, 7));
  double running_mean = 0.0;
  double return_sum = 0.0;
  std::size_t n = 0;
  for (int e = 0; e < episodes; ++e) {
    Environment env(spec);
    env.reset(episode_seed(seed, e));
    while (!env.state().done) {
      Transition tr;
      tr.s = env.state().s;
      tr.a = behavior_policy(spec, tier, tr.s, policy_rng);
      const StepResult step = env.step(tr.a);
      tr.r = step.reward;
      tr.s_next = step.state.s;
      tr.done = step.state.done;
      ++n;
      running_mean += (tr.r - running_mean) / static_cast<double>(n);
      return_sum += tr.r;
      ds.transitions.push_back(std::move(tr));
    }
  }
  auto& meta = ds.meta;
  meta.env = spec.name;
  meta.tier = tier;
  meta.count = ds.transitions.size();
  meta.episodes = episodes;
  meta.seed = seed;
  meta.state_dim = spec.state_dim;
  meta.action_dim = spec.action_dim;
  meta.norm = fit_norm_stats(ds.transitions);
  meta.score_ref = estimate_score_ref(spec, score_ref_episodes, derive_seed(seed, 99));
  meta.streaming_reward_mean = running_mean;
  meta.mean_episode_return = return_sum / episodes;
  return ds;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (n == 0) throw ConfigError("cannot sample from an empty dataset");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.index(n));
  return idx;
}

std::vector<Transition> sample_batch(const Dataset& dataset, std::size_t batch_size, Rng& rng) {
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t i : sample_indices(dataset.size(), batch_size, rng)) {
    batch.push_back(dataset.transitions[i]);
  }
  return batch;
}

DatasetSplit split_episodes(const Dataset& dataset, double heldout_fraction) {
  if (heldout_fraction < 0.0 || heldout_fraction >= 1.0) {
    throw ConfigError("heldout_fraction must be in [0, 1)");
  }
  // Episode boundaries are the done flags.
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.transitions[i].done) ends.push_back(i + 1);
  }
  if (ends.empty() || ends.back() != dataset.size()) ends.push_back(dataset.size());
  auto held = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(ends.size())));
  if (heldout_fraction > 0.0 && held == 0) held = 1;
  if (held >= ends.size()) held = ends.size() - 1;
  const std::size_t cut = held == 0 ? dataset.size() : ends[ends.size() - held - 1];
  DatasetSplit split;
  split.train.assign(dataset.transitions.begin(), dataset.transitions.begin() + static_cast<long>(cut));
  split.heldout.assign(dataset.transitions.begin() + static_cast<long>(cut), dataset.transitions.end());
  return split;
}

nlohmann::json meta_to_json(const DatasetMeta& meta) {
  return {{"env", meta.env},
          {"tier", std::string(to_string(meta.tier))},
          {"count", meta.count},
          {"episodes", meta.episodes},
          {"seed", meta.seed},
          {"state_dim", meta.state_dim},
          {"action_dim", meta.action_dim},
          {"norm", norm_to_json(meta.norm)},
          {"score_ref",
           {{"env", meta.score_ref.env},
            {"random_return", meta.score_ref.random_return},
            {"expert_return", meta.score_ref.expert_return}}},
          {"streaming_reward_mean", meta.streaming_reward_mean},
          {"mean_episode_return", meta.mean_episode_return}};
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta meta;
  try {
    meta.env = j.at("env").get<std::string>();
    meta.tier = tier_from_string(j.at("tier").get<std::string>());
    meta.count = j.at("count").get<std::size_t>();
    meta.episodes = j.at("episodes").get<int>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.state_dim = j.at("state_dim").get<int>();
    meta.action_dim = j.at("action_dim").get<int>();
    meta.norm = norm_from_json(j.at("norm"));
    const auto& ref = j.at("score_ref");
    meta.score_ref = {ref.at("env").get<std::string>(), ref.at("random_return").get<double>(),
                      ref.at("expert_return").get<double>()};
    meta.streaming_reward_mean = j.at("streaming_reward_mean").get<double>();
    meta.mean_episode_return = j.at("mean_episode_return").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad dataset header: ") + e.what());
  }
  return meta;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  out << meta_to_json(dataset.meta).dump() << '\n';
  const int d = dataset.meta.state_dim;
  const int m = dataset.meta.action_dim;
  std::vector<double> record(static_cast<std::size_t>(2 * d + m + 2));
  for (const auto& tr : dataset.transitions) {
    if (tr.s.size() != d || tr.a.size() != m || tr.s_next.size() != d) {
      throw ShapeError("transition dims do not match dataset meta");
    }
    std::size_t k = 0;
    for (int i = 0; i < d; ++i) record[k++] = tr.s[i];
    for (int i = 0; i < m; ++i) record[k++] = tr.a[i];
    record[k++] = tr.r;
    for (int i = 0; i < d; ++i) record[k++] = tr.s_next[i];
    record[k++] = tr.done ? 1.0 : 0.0;
    write_f64_le(out, record);
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset header missing");
  Dataset ds;
  try {
    ds.meta = meta_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("dataset header is not json: ") + e.what());
  }
  const int d = ds.meta.state_dim;
  const int m = ds.meta.action_dim;
  std::vector<double> record(static_cast<std::size_t>(2 * d + m + 2));
  ds.transitions.reserve(ds.meta.count);
  for (std::size_t n = 0; n < ds.meta.count; ++n) {
    read_f64_le(in, record);
    Transition tr;
    std::size_t k = 0;
    tr.s = Eigen::Map<const Vector>(record.data() + k, d);
    k += static_cast<std::size_t>(d);
    tr.a = Eigen::Map<const Vector>(record.data() + k, m);
    k += static_cast<std::size_t>(m);
    tr.r = record[k++];
    tr.s_next = Eigen::Map<const Vector>(record.data() + k, d);
    k += static_cast<std::size_t>(d);
    tr.done = record[k] != 0.0;
    ds.transitions.push_back(std::move(tr));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(out, dataset);
}

Dataset load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("missing dataset " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace dwm
