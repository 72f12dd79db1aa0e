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

#include "dwm/actor_critic.hpp"
#include "dwm/errors.hpp"
#include "support/test_support.hpp"

namespace dwm {
namespace {

using testing::fd_gradient;
using testing::max_rel_err;
using testing::with_values;

nn::MlpSpec linear_spec(int in, int out) {
  nn::MlpSpec spec;
  spec.input_dim = in;
  spec.output_dim = out;
  spec.activation = nn::Activation::kIdentity;
  return spec;
}

std::vector<Transition> random_transitions(int n, int d, int m, Rng& rng, double done_prob = 0.0) {
  std::vector<Transition> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({rng.normal_vector(d), rng.uniform_vector(Vector::Constant(m, -1.0), Vector::Constant(m, 1.0)), rng.normal(), rng.normal_vector(d),
                   rng.uniform() < done_prob});
  }
  return out;
}

NormStats reward_norm(int d, Rng& rng) {
  NormStats norm = testing::random_norm(d, rng);
  norm.reward_mean = 0.3;
  norm.reward_std = 1.4;
  return norm;
}

PolicyNet box_policy(int d, int m, std::uint64_t seed, NormStats norm, std::vector<int> hidden = {6}) {
  return PolicyNet(d, Vector::Constant(m, -1.0), Vector::Constant(m, 2.0), std::move(hidden),
                   nn::Activation::kTanh, seed, std::move(norm));
}

TEST(BracConfig, Validate) {
  BracConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.gamma = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = BracConfig{};
  cfg.alpha_bc = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = BracConfig{};
  cfg.tau = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = BracConfig{};
  cfg.batch = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PolicyNet, ActionsStayInsideBox) {
  Rng rng(1);
  const PolicyNet policy = box_policy(3, 2, 4, NormStats::identity(3), {16});
  nn::ParamVector psi = policy.params();
  psi *= 50.0;
  for (int i = 0; i < 2000; ++i) {
    const Vector a = policy.act(psi, 100.0 * rng.normal_vector(3));
    EXPECT_TRUE((a.array() >= -1.0).all() && (a.array() <= 2.0).all());
  }
}

TEST(PolicyNet, JacobiansMatchFiniteDifferences) {
  Rng rng(2);
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    const int d = 1 + static_cast<int>(rng.index(3)), m = 1 + static_cast<int>(rng.index(2));
    const PolicyNet policy = box_policy(d, m, rng.next_u64(), testing::random_norm(d, rng));
    const Vector s = rng.normal_vector(d);
    const auto jac = policy.jacobians(policy.params(), s);
    EXPECT_EQ(jac.a, policy.act(s));
    const Matrix fs = testing::fd_jacobian([&](const Vector& v) { return policy.act(v); }, s);
    const Matrix fp = testing::fd_jacobian(
        [&](const Vector& v) { return policy.act(with_values(policy.params(), v), s); }, policy.params().as_vector());
    worst = std::max({worst, max_rel_err(jac.Pi_s, fs), max_rel_err(jac.Pi_psi, fp)});
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(PolicyNet, VjpMatchesJacobianTranspose) {
  Rng rng(3);
  const PolicyNet policy = box_policy(2, 2, 8, testing::random_norm(2, rng));
  const Matrix states = Matrix::Random(2, 5), up = Matrix::Random(2, 5);
  Vector expected = Vector::Zero(policy.params().size());
  for (int b = 0; b < 5; ++b) {
    expected += policy.jacobians(policy.params(), states.col(b)).Pi_psi.transpose() * up.col(b);
  }
  EXPECT_LE(max_rel_err(policy.vjp(policy.params(), states, up).as_vector(), expected), 1e-12);
}

TEST(CriticNet, RawUnitsAndInputGradients) {
  Rng rng(4);
  const NormStats norm = reward_norm(3, rng);
  const CriticNet critic(3, 2, {8}, nn::Activation::kTanh, 5, norm, 0.9);
  const Vector s = rng.normal_vector(3), a = rng.normal_vector(2);
  const double qn = critic.q_normalized(critic.params(), s, a);
  EXPECT_NEAR(critic.q(s, a), 1.4 * qn + 0.3 / (1.0 - 0.9), 1e-14);
  const auto g = critic.grads(s, a);
  EXPECT_EQ(g.q, critic.q(s, a));
  EXPECT_LE(max_rel_err(g.q_s, fd_gradient([&](const Vector& v) { return critic.q(v, a); }, s)), 1e-6);
  EXPECT_LE(max_rel_err(g.q_a, fd_gradient([&](const Vector& v) { return critic.q(s, v); }, a)), 1e-6);
}

TEST(CriticNet, StartsWithTargetEqualToOnline) {
  const CriticNet critic(2, 1, {4}, nn::Activation::kTanh, 1, NormStats::identity(2), 0.99);
  EXPECT_EQ(critic.target_params().as_vector(), critic.params().as_vector());
}

TEST(CriticLoss, ZeroRewardsAndZeroNetsGiveZeroLoss) {
  Rng rng(5);
  auto batch = random_transitions(8, 2, 1, rng);
  for (auto& tr : batch) tr.r = 0.0;
  CriticNet critic(2, 1, {4}, nn::Activation::kTanh, 1, NormStats::identity(2), 0.7);
  critic.params().fill(0.0);
  critic.target_params().fill(0.0);
  const auto lg = critic_loss(critic, box_policy(2, 1, 2, NormStats::identity(2)), batch, 0.7);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.grad.as_vector(), Vector::Zero(critic.params().size()));
}

TEST(CriticLoss, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  const NormStats norm = reward_norm(2, rng);
  CriticNet critic(2, 2, {6}, nn::Activation::kTanh, 3, norm, 0.95);
  critic.target_params() = with_values(critic.params(), rng.normal_vector(critic.params().size()));
  const PolicyNet policy = box_policy(2, 2, 4, norm);
  const auto batch = random_transitions(7, 2, 2, rng, 0.3);
  const auto lg = critic_loss(critic, policy, batch, 0.95);
  auto loss_at = [&](const Vector& v) {
    CriticNet probe = critic;
    probe.params() = with_values(critic.params(), v);
    return critic_loss(probe, policy, batch, 0.95).loss;
  };
  EXPECT_LE(max_rel_err(lg.grad.as_vector(), fd_gradient(loss_at, critic.params().as_vector())), 1e-5);
}

// With target == online numerically, the analytic gradient must match the
// finite difference that moves only the online network, and must differ from
// the one that moves both networks together.
TEST(CriticLoss, TargetIsStopGradient) {
  Rng rng(7);
  const NormStats norm = reward_norm(2, rng);
  const CriticNet critic(2, 1, {6}, nn::Activation::kTanh, 9, norm, 0.9);
  const PolicyNet policy = box_policy(2, 1, 4, norm);
  const auto batch = random_transitions(6, 2, 1, rng);
  const Vector grad = critic_loss(critic, policy, batch, 0.9).grad.as_vector();
  const Vector online = fd_gradient(
      [&](const Vector& v) {
        CriticNet probe = critic;
        probe.params() = with_values(critic.params(), v);
        return critic_loss(probe, policy, batch, 0.9).loss;
      },
      critic.params().as_vector());
  const Vector tied = fd_gradient(
      [&](const Vector& v) {
        CriticNet probe = critic;
        probe.params() = with_values(critic.params(), v);
        probe.target_params() = probe.params();
        return critic_loss(probe, policy, batch, 0.9).loss;
      },
      critic.params().as_vector());
  EXPECT_LE(max_rel_err(grad, online), 1e-5);
  EXPECT_GT(max_rel_err(grad, tied), 1e-2);
}

// gamma = 0 on three transitions with a linear critic over [s | a] in 1 + 1
// dims: three parameters, three equations, a unique interpolant. Full-batch
// descent must reach the least-squares solution.
TEST(CriticStep, GammaZeroMatchesLeastSquares) {
  const NormStats norm = NormStats::identity(1);
  std::vector<Transition> batch = {
      {Vector::Constant(1, 0.5), Vector::Constant(1, -0.2), 1.0, Vector::Zero(1), false},
      {Vector::Constant(1, -1.0), Vector::Constant(1, 0.4), -0.5, Vector::Zero(1), false},
      {Vector::Constant(1, 0.2), Vector::Constant(1, 0.9), 2.0, Vector::Zero(1), true},
  };
  const nn::MlpSpec spec = linear_spec(2, 1);
  nn::ParamVector zero(spec.layout());
  CriticNet critic(spec, zero, zero, norm, 0.5, 1, 1);
  const PolicyNet policy = box_policy(1, 1, 2, norm);
  BracConfig cfg;
  cfg.gamma = 0.0;
  cfg.critic_lr = 0.2;
  for (int i = 0; i < 20000; ++i) critic_step(critic, policy, batch, cfg);
  Matrix X(3, 3);
  Vector y(3);
  for (int i = 0; i < 3; ++i) {
    X.row(i) << batch[i].s[0], batch[i].a[0], 1.0;
    y[i] = batch[i].r;
  }
  const Vector sol = X.colPivHouseholderQr().solve(y);
  const Vector got = (Vector(3) << critic.params().weight(0)(0, 0), critic.params().weight(0)(0, 1),
                      critic.params().bias(0)[0]).finished();
  EXPECT_LE((got - sol).cwiseAbs().maxCoeff(), 1e-8);
  for (const auto& tr : batch) EXPECT_NEAR(critic.q_normalized(critic.params(), tr.s, tr.a), tr.r, 1e-8);
}

TEST(CriticStep, LeavesTargetUntouched) {
  Rng rng(8);
  CriticNet critic(2, 1, {4}, nn::Activation::kTanh, 1, NormStats::identity(2), 0.9);
  const Vector target = critic.target_params().as_vector();
  critic_step(critic, box_policy(2, 1, 2, NormStats::identity(2)), random_transitions(5, 2, 1, rng), BracConfig{});
  EXPECT_EQ(critic.target_params().as_vector(), target);
  EXPECT_NE(critic.params().as_vector(), target);
}

TEST(ActorLoss, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  const NormStats norm = reward_norm(3, rng);
  const CriticNet critic(3, 2, {6}, nn::Activation::kTanh, 2, norm, 0.9);
  const PolicyNet policy = box_policy(3, 2, 5, norm);
  const auto batch = random_transitions(6, 3, 2, rng);
  for (double cw : {0.0, 1.0, 2.5}) {
    const auto lg = actor_loss(policy, critic, batch, 0.7, cw);
    auto loss_at = [&](const Vector& v) {
      const PolicyNet probe(policy.spec(), with_values(policy.params(), v), policy.action_low(),
                            policy.action_high(), norm);
      return actor_loss(probe, critic, batch, 0.7, cw).loss;
    };
    EXPECT_DOUBLE_EQ(lg.loss, loss_at(policy.params().as_vector()));
    EXPECT_LE(max_rel_err(lg.grad.as_vector(), fd_gradient(loss_at, policy.params().as_vector())), 1e-5);
  }
}

TEST(ActorLoss, ZeroCriticAndNoBehaviorTermGivesZeroGradient) {
  Rng rng(10);
  CriticNet critic(2, 1, {4}, nn::Activation::kTanh, 1, NormStats::identity(2), 0.9);
  critic.params().fill(0.0);
  const auto lg = actor_loss(box_policy(2, 1, 3, NormStats::identity(2)), critic, random_transitions(5, 2, 1, rng),
                             0.0, 1.0);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.grad.as_vector(), Vector::Zero(lg.grad.size()));
}

TEST(ActorStep, EmptyBatchThrows) {
  const CriticNet critic(2, 1, {4}, nn::Activation::kTanh, 1, NormStats::identity(2), 0.9);
  PolicyNet policy = box_policy(2, 1, 3, NormStats::identity(2));
  EXPECT_THROW(actor_step(policy, critic, {}, BracConfig{}), ShapeError);
}

// alpha_bc = 0, fixed critic: small-step descent on -Q is ascent on Q over a
// fixed probe batch.
TEST(ActorStep, AscendsFixedCritic) {
  Rng rng(11);
  const NormStats norm = NormStats::identity(2);
  const CriticNet critic(2, 1, {16}, nn::Activation::kTanh, 4, norm, 0.9);
  PolicyNet policy = box_policy(2, 1, 6, norm, {16});
  const auto probe = random_transitions(64, 2, 1, rng);
  BracConfig cfg;
  cfg.alpha_bc = 0.0;
  cfg.actor_lr = 1e-3;
  auto mean_q = [&] {
    double q = 0.0;
    for (const auto& tr : probe) q += critic.q_normalized(critic.params(), tr.s, policy.act(tr.s));
    return q / static_cast<double>(probe.size());
  };
  double prev = mean_q();
  const double start = prev;
  for (int i = 0; i < 100; ++i) {
    actor_step(policy, critic, probe, cfg);
    const double now = mean_q();
    EXPECT_GE(now, prev - 1e-12) << i;
    prev = now;
  }
  EXPECT_GT(prev, start);
}

// Linear controller a = K s, mostly inside the box. Pure behavior cloning
// must reach held-out action MSE below 1e-3.
TEST(ActorStep, BehaviorCloningRecoversLinearController) {
  Rng rng(12);
  const Matrix Kc = (Matrix(2, 3) << 0.3, -0.2, 0.1, -0.1, 0.25, 0.2).finished();
  auto make = [&](int n) {
    std::vector<Transition> out;
    for (int i = 0; i < n; ++i) {
      const Vector s = rng.normal_vector(3);
      out.push_back({s, Kc * s, 0.0, s, false});
    }
    return out;
  };
  const auto train = make(2000), heldout = make(500);
  const NormStats norm = fit_norm_stats(train);
  PolicyNet policy(3, Vector::Constant(2, -2.0), Vector::Constant(2, 2.0), {64, 64}, nn::Activation::kTanh, 3, norm);
  const CriticNet critic(3, 2, {4}, nn::Activation::kTanh, 1, norm, 0.9);
  BracConfig cfg;
  cfg.critic_weight = 0.0;
  cfg.actor_lr = 1e-3;
  nn::Adam adam(policy.params());
  std::vector<Transition> batch(128);
  for (int step = 0; step < 4000; ++step) {
    for (auto& tr : batch) tr = train[rng.index(train.size())];
    actor_step(policy, critic, batch, cfg, &adam);
  }
  double mse = 0.0;
  for (const auto& tr : heldout) mse += (policy.act(tr.s) - tr.a).squaredNorm() / 2.0;
  mse /= static_cast<double>(heldout.size());
  EXPECT_LE(mse, 1e-3);
}

TEST(TargetUpdate, Arithmetic) {
  const nn::MlpSpec spec = linear_spec(2, 1);
  nn::ParamVector ones(spec.layout()), zeros(spec.layout());
  ones.fill(1.0);
  CriticNet critic(spec, ones, zeros, NormStats::identity(1), 0.9, 1, 1);
  target_update(critic, 0.005);
  target_update(critic, 0.005);
  for (double v : critic.target_params().values()) EXPECT_NEAR(v, 0.009975, 1e-15);
  target_update(critic, 1.0);
  EXPECT_EQ(critic.target_params().as_vector(), critic.params().as_vector());
  EXPECT_THROW(target_update(critic, 0.0), ConfigError);
  EXPECT_THROW(target_update(critic, 1.5), ConfigError);
}

// Gap shrinks by (1 - tau) per update: it halves every ln 2 / tau steps to
// within 5%.
TEST(TargetUpdate, GeometricHalfLife) {
  const nn::MlpSpec spec = linear_spec(1, 1);
  nn::ParamVector ones(spec.layout()), zeros(spec.layout());
  ones.fill(1.0);
  for (double tau : {0.005, 0.02, 0.1}) {
    CriticNet critic(spec, ones, zeros, NormStats::identity(1), 0.9, 1, 0);
    const int half = static_cast<int>(std::lround(std::log(2.0) / tau));
    for (int i = 0; i < half; ++i) target_update(critic, tau);
    const double gap = 1.0 - critic.target_params().values()[0];
    EXPECT_NEAR(gap, 0.5, 0.025) << tau;
  }
}

TEST(Pretrain, ZeroStepsReturnsInitialNets) {
  const EnvSpec env = make_env("pointmass");
  const Dataset ds = collect_dataset(env, Tier::kMedium, 2, 0, 2);
  const NormStats norm = fit_norm_stats(ds.transitions);
  BracConfig cfg;
  cfg.steps = 0;
  const auto out = pretrain(ds.transitions, env, norm, cfg, 5);
  const PolicyNet init(env.state_dim, env.action_low, env.action_high, cfg.hidden, nn::Activation::kTanh,
                       derive_seed(5, 10), norm);
  EXPECT_EQ(out.policy.params().as_vector(), init.params().as_vector());
  EXPECT_EQ(out.critic.params().as_vector(), out.critic.target_params().as_vector());
  EXPECT_TRUE(out.log.empty());
}

TEST(Pretrain, DeterministicGivenSeed) {
  const EnvSpec env = make_env("pointmass");
  const Dataset ds = collect_dataset(env, Tier::kMedium, 3, 1, 2);
  const NormStats norm = fit_norm_stats(ds.transitions);
  BracConfig cfg;
  cfg.steps = 50;
  cfg.batch = 32;
  cfg.hidden = {16};
  const auto a = pretrain(ds.transitions, env, norm, cfg, 7, 10);
  const auto b = pretrain(ds.transitions, env, norm, cfg, 7, 10);
  const auto c = pretrain(ds.transitions, env, norm, cfg, 8, 10);
  EXPECT_EQ(a.policy.params().as_vector(), b.policy.params().as_vector());
  EXPECT_EQ(a.critic.params().as_vector(), b.critic.params().as_vector());
  EXPECT_EQ(a.critic.target_params().as_vector(), b.critic.target_params().as_vector());
  EXPECT_NE(a.policy.params().as_vector(), c.policy.params().as_vector());
  ASSERT_EQ(a.log.size(), 5u);
  EXPECT_EQ(a.log[4].step, 50);
}

TEST(Pretrain, CheckpointsRoundTrip) {
  Rng rng(13);
  const NormStats norm = reward_norm(2, rng);
  const PolicyNet policy = box_policy(2, 2, 3, norm);
  CriticNet critic(2, 2, {5}, nn::Activation::kTanh, 4, norm, 0.97);
  target_update(critic, 0.5);
  const auto dir = std::filesystem::temp_directory_path();
  policy.save(dir / "dwm_test_policy.ckpt");
  critic.save(dir / "dwm_test_critic.ckpt");
  const PolicyNet p2 = PolicyNet::load(dir / "dwm_test_policy.ckpt");
  const CriticNet c2 = CriticNet::load(dir / "dwm_test_critic.ckpt");
  std::filesystem::remove(dir / "dwm_test_policy.ckpt");
  std::filesystem::remove(dir / "dwm_test_critic.ckpt");
  const Vector s = rng.normal_vector(2), a = rng.normal_vector(2);
  EXPECT_EQ(p2.act(s), policy.act(s));
  EXPECT_EQ(c2.q(s, a), critic.q(s, a));
  EXPECT_EQ(c2.target_params().as_vector(), critic.target_params().as_vector());
  EXPECT_EQ(c2.gamma(), 0.97);
}

}  // namespace
}  // namespace dwm
