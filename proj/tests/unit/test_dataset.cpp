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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dwm/dataset.hpp"
#include "dwm/errors.hpp"

namespace dwm {
namespace {

Transition make_transition(double s, double r, bool done = false) {
  Transition tr;
  tr.s = Vector::Constant(1, s);
  tr.a = Vector::Constant(1, 0.0);
  tr.r = r;
  tr.s_next = Vector::Constant(1, s + 1.0);
  tr.done = done;
  return tr;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(CollectDataset, OneEpisodeHas200Transitions) {
  const Dataset ds = collect_dataset(make_env("pointmass"), Tier::kMedium, 1, 0, 5);
  EXPECT_EQ(ds.size(), 200u);
  EXPECT_EQ(ds.meta.count, 200u);
  EXPECT_TRUE(ds.transitions.back().done);
  for (std::size_t i = 0; i + 1 < ds.size(); ++i) {
    EXPECT_FALSE(ds.transitions[i].done);
    EXPECT_EQ(ds.transitions[i].s_next, ds.transitions[i + 1].s);
  }
}

TEST(CollectDataset, SameSeedByteIdenticalFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "dwm_test_dataset";
  std::filesystem::create_directories(dir);
  const EnvSpec spec = make_env("reacher");
  save_dataset(dir / "a.dwmd", collect_dataset(spec, Tier::kExpert, 3, 11, 5));
  save_dataset(dir / "b.dwmd", collect_dataset(spec, Tier::kExpert, 3, 11, 5));
  save_dataset(dir / "c.dwmd", collect_dataset(spec, Tier::kExpert, 3, 12, 5));
  EXPECT_EQ(file_bytes(dir / "a.dwmd"), file_bytes(dir / "b.dwmd"));
  EXPECT_NE(file_bytes(dir / "a.dwmd"), file_bytes(dir / "c.dwmd"));
  std::filesystem::remove_all(dir);
}

TEST(CollectDataset, StoredMeanRewardEqualsStreamingMean) {
  const Dataset ds = collect_dataset(make_env("pendulum"), Tier::kRandom, 4, 3, 5);
  std::stringstream ss;
  write_dataset(ss, ds);
  const Dataset back = read_dataset(ss);
  double sum = 0.0;
  for (const auto& tr : back.transitions) sum += tr.r;
  EXPECT_NEAR(sum / static_cast<double>(back.size()), back.meta.streaming_reward_mean, 1e-12);
}

TEST(CollectDataset, RejectsZeroEpisodes) {
  EXPECT_THROW(collect_dataset(make_env("pointmass"), Tier::kMedium, 0, 0), ConfigError);
}

TEST(CollectDataset, MetaRecordsScoreReference) {
  const Dataset ds = collect_dataset(make_env("pointmass"), Tier::kMedium, 2, 0, 10);
  EXPECT_EQ(ds.meta.score_ref.env, "pointmass");
  EXPECT_GT(ds.meta.score_ref.expert_return, ds.meta.score_ref.random_return);
  EXPECT_GT(ds.meta.mean_episode_return, ds.meta.score_ref.random_return);
}

TEST(NormStats, IdenticalStatesUseFloor) {
  std::vector<Transition> t(5, make_transition(3.0, 1.0));
  const NormStats n = fit_norm_stats(t);
  EXPECT_EQ(n.state_mean[0], 3.0);
  EXPECT_EQ(n.state_std[0], kStdFloor);
  EXPECT_EQ(n.reward_std, kStdFloor);
}

TEST(NormStats, TwoPointFormula) {
  const NormStats n = fit_norm_stats({make_transition(0.0, 0.0), make_transition(2.0, 2.0)});
  EXPECT_DOUBLE_EQ(n.state_mean[0], 1.0);
  EXPECT_DOUBLE_EQ(n.state_std[0], 1.0);
  EXPECT_DOUBLE_EQ(n.reward_mean, 1.0);
  EXPECT_DOUBLE_EQ(n.reward_std, 1.0);
}

TEST(NormStats, MatchesBruteForceTwoPass) {
  const Dataset ds = collect_dataset(make_env("pendulum"), Tier::kRandom, 3, 2, 5);
  const NormStats n = fit_norm_stats(ds.transitions);
  const int d = 3;
  for (int k = 0; k < d; ++k) {
    double sum = 0.0;
    for (const auto& tr : ds.transitions) sum += tr.s[k];
    const double mean = sum / static_cast<double>(ds.size());
    double ss = 0.0;
    for (const auto& tr : ds.transitions) ss += (tr.s[k] - mean) * (tr.s[k] - mean);
    const double sd = std::max(std::sqrt(ss / static_cast<double>(ds.size())), kStdFloor);
    EXPECT_NEAR(n.state_mean[k], mean, 1e-12);
    EXPECT_NEAR(n.state_std[k], sd, 1e-12);
  }
  double dsum = 0.0;
  int count = 0;
  for (const auto& tr : ds.transitions) {
    if (tr.done) continue;
    dsum += tr.s_next[2] - tr.s[2];
    ++count;
  }
  EXPECT_NEAR(n.delta_mean[2], dsum / count, 1e-12);
}

TEST(NormStats, EmptyOrSingletonThrows) {
  EXPECT_THROW(fit_norm_stats({}), ConfigError);
  EXPECT_THROW(fit_norm_stats({make_transition(1.0, 1.0)}), ConfigError);
}

TEST(NormStats, NormalizeDenormalizeInverse) {
  const Dataset ds = collect_dataset(make_env("reacher"), Tier::kMedium, 2, 1, 5);
  const NormStats n = fit_norm_stats(ds.transitions);
  for (const auto& tr : ds.transitions) {
    EXPECT_LE((n.denormalize_state(n.normalize_state(tr.s)) - tr.s).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(n.denormalize_reward(n.normalize_reward(tr.r)), tr.r, 1e-12);
  }
}

TEST(NormStats, JsonRoundTrip) {
  const Dataset ds = collect_dataset(make_env("pointmass"), Tier::kMedium, 2, 1, 5);
  const NormStats a = ds.meta.norm;
  const NormStats b = norm_from_json(norm_to_json(a));
  EXPECT_EQ(a.state_mean, b.state_mean);
  EXPECT_EQ(a.state_std, b.state_std);
  EXPECT_EQ(a.delta_std, b.delta_std);
  EXPECT_EQ(a.reward_mean, b.reward_mean);
}

TEST(SampleBatch, SingleTransitionRepeated) {
  Dataset ds;
  ds.transitions.push_back(make_transition(4.0, 2.0));
  Rng rng(0);
  const auto batch = sample_batch(ds, 7, rng);
  ASSERT_EQ(batch.size(), 7u);
  for (const auto& tr : batch) EXPECT_EQ(tr.s[0], 4.0);
}

TEST(SampleBatch, SeededReproducibility) {
  Rng a(5), b(5);
  EXPECT_EQ(sample_indices(100, 50, a), sample_indices(100, 50, b));
}

TEST(SampleBatch, UniformFrequencies) {
  Rng rng(99);
  std::vector<int> counts(10, 0);
  const int draws = 1000000;
  for (auto i : sample_indices(10, draws, rng)) ++counts[i];
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / draws, 0.1, 0.001);
}

TEST(SampleBatch, EmptyDatasetOrZeroBatchThrows) {
  Dataset ds;
  Rng rng(0);
  EXPECT_THROW(sample_batch(ds, 1, rng), ConfigError);
  ds.transitions.push_back(make_transition(0, 0));
  EXPECT_THROW(sample_batch(ds, 0, rng), ConfigError);
}

TEST(DatasetIo, RoundTripBitExact) {
  const Dataset ds = collect_dataset(make_env("pendulum"), Tier::kMedium, 2, 8, 5);
  std::stringstream ss;
  write_dataset(ss, ds);
  const Dataset back = read_dataset(ss);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.transitions[i].s, ds.transitions[i].s);
    EXPECT_EQ(back.transitions[i].a, ds.transitions[i].a);
    EXPECT_EQ(back.transitions[i].r, ds.transitions[i].r);
    EXPECT_EQ(back.transitions[i].s_next, ds.transitions[i].s_next);
    EXPECT_EQ(back.transitions[i].done, ds.transitions[i].done);
  }
  EXPECT_EQ(back.meta.norm.state_std, ds.meta.norm.state_std);
  EXPECT_EQ(back.meta.score_ref.expert_return, ds.meta.score_ref.expert_return);
}

TEST(DatasetIo, MissingAndMalformed) {
  EXPECT_THROW(load_dataset("/nonexistent/x.dwmd"), MissingArtifactError);
  std::stringstream bad("not json\n");
  EXPECT_THROW(read_dataset(bad), IoError);
  Dataset ds = collect_dataset(make_env("pointmass"), Tier::kMedium, 1, 0, 2);
  std::stringstream ss;
  write_dataset(ss, ds);
  std::string text = ss.str();
  text.resize(text.size() - 10);
  std::stringstream truncated(text);
  EXPECT_THROW(read_dataset(truncated), IoError);
}

TEST(SplitEpisodes, HoldsOutWholeEpisodes) {
  const Dataset ds = collect_dataset(make_env("pointmass"), Tier::kMedium, 10, 0, 2);
  const auto split = split_episodes(ds, 0.2);
  EXPECT_EQ(split.train.size(), 1600u);
  EXPECT_EQ(split.heldout.size(), 400u);
  EXPECT_TRUE(split.train.back().done);
  EXPECT_THROW(split_episodes(ds, 1.0), ConfigError);
}

}  // namespace
}  // namespace dwm
