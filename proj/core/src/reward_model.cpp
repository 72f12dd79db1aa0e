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

#include "dwm/reward_model.hpp"

#include <string>

#include "dwm/checkpoint.hpp"
#include "dwm/errors.hpp"

namespace dwm {

RewardNet::RewardNet(int state_dim, int action_dim, std::vector<int> hidden, nn::Activation act,
                     std::uint64_t seed, NormStats norm)
    : norm_(std::move(norm)), state_dim_(state_dim), action_dim_(action_dim) {
  spec_.input_dim = state_dim + action_dim;
  spec_.hidden_dims = std::move(hidden);
  spec_.output_dim = 1;
  spec_.activation = act;
  params_ = nn::init_params(spec_, seed);
  if (norm_.state_mean.size() != state_dim) throw ShapeError("reward norm stats dim mismatch");
}

RewardNet::RewardNet(nn::MlpSpec spec, nn::ParamVector params, NormStats norm, int state_dim,
                     int action_dim)
    : spec_(std::move(spec)), params_(std::move(params)), norm_(std::move(norm)),
      state_dim_(state_dim), action_dim_(action_dim) {
  if (spec_.input_dim != state_dim + action_dim || spec_.output_dim != 1) {
    throw ShapeError("reward net must map state_dim + action_dim to 1");
  }
  if (norm_.state_mean.size() != state_dim) throw ShapeError("reward norm stats dim mismatch");
  nn::check_params(spec_, params_);
}

Vector RewardNet::input(const Vector& s, const Vector& a) const {
  if (s.size() != state_dim_ || a.size() != action_dim_) throw ShapeError("reward input dims mismatch");
  Vector x(spec_.input_dim);
  x << norm_.normalize_state(s), a;
  return x;
}

Matrix RewardNet::input_batch(std::span<const Transition> batch) const {
  Matrix x(spec_.input_dim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = input(batch[i].s, batch[i].a);
  }
  return x;
}

void RewardNet::save(const std::filesystem::path& path) const {
  const nlohmann::json extra = {{"kind", "reward"},
                                {"state_dim", state_dim_},
                                {"action_dim", action_dim_},
                                {"norm", norm_to_json(norm_)}};
  save_checkpoint(path, spec_, params_, extra);
}

RewardNet RewardNet::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.extra.value("kind", "") != "reward") throw IoError(path.string() + " is not a reward checkpoint");
  return {ckpt.spec, std::move(ckpt.params), norm_from_json(ckpt.extra.at("norm")),
          ckpt.extra.at("state_dim").get<int>(), ckpt.extra.at("action_dim").get<int>()};
}

double reward_eval(const RewardNet& net, const Vector& s, const Vector& a) {
  const Vector y = nn::mlp_forward(net.spec(), net.params(), net.input(s, a));
  return net.norm().denormalize_reward(y[0]);
}

RewardGrads reward_input_grads(const RewardNet& net, const Vector& s, const Vector& a) {
  const Vector x = net.input(s, a);
  const Matrix jac = nn::mlp_input_jacobian(net.spec(), net.params(), x);
  const double r_std = net.norm().reward_std;
  const Eigen::Index d = net.state_dim();
  RewardGrads out;
  out.r = net.norm().denormalize_reward(nn::mlp_forward(net.spec(), net.params(), x)[0]);
  out.r_s = r_std * jac.row(0).head(d).transpose().cwiseQuotient(net.norm().state_std);
  out.r_a = r_std * jac.row(0).tail(net.action_dim()).transpose();
  return out;
}

nn::LossAndGrad reward_loss(const RewardNet& net, std::span<const Transition> batch) {
  if (batch.empty()) throw ShapeError("empty reward batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const Matrix x = net.input_batch(batch);
  Matrix target(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    target(0, i) = net.norm().normalize_reward(batch[static_cast<std::size_t>(i)].r);
  }
  const Matrix resid = nn::mlp_forward_batch(net.spec(), net.params(), x) - target;
  nn::LossAndGrad out;
  out.loss = resid.squaredNorm() / static_cast<double>(n);
  out.grad = nn::mlp_backward_batch(net.spec(), net.params(), x, (2.0 / static_cast<double>(n)) * resid)
                 .param_grad;
  return out;
}

double reward_fit_step(RewardNet& net, std::span<const Transition> batch, double lr,
                       nn::Adam* adam) {
  nn::LossAndGrad lg = reward_loss(net, batch);
  if (adam != nullptr) {
    adam->descend(net.params(), lg.grad, lr);
  } else {
    net.params() = nn::sgd_step(net.params(), lg.grad, -lr);
  }
  return lg.loss;
}

stats::RmseResult reward_rmse(const RewardNet& net, std::span<const Transition> heldout) {
  if (heldout.empty()) throw ConfigError("reward_rmse: empty held-out set");
  const Matrix x = net.input_batch(heldout);
  const Matrix y = nn::mlp_forward_batch(net.spec(), net.params(), x);
  std::vector<double> squared(heldout.size());
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    const double err = net.norm().denormalize_reward(y(0, static_cast<Eigen::Index>(i))) - heldout[i].r;
    squared[i] = err * err;
  }
  return stats::rmse_from_squared_errors(squared);
}

}  // namespace dwm
