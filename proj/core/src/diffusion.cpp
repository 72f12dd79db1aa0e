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

#include "dwm/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dwm/checkpoint.hpp"
#include "dwm/errors.hpp"

namespace dwm::diffusion {
namespace {

void check_level(const Schedule& schedule, int k) {
  if (k < 1 || k > schedule.K) {
    throw ShapeError("diffusion level " + std::to_string(k) + " outside 1.." +
                     std::to_string(schedule.K));
  }
}

void check_noise(const Schedule& schedule, const NoisePack& noise, Eigen::Index d) {
  if (noise.depth() != schedule.K) {
    throw ShapeError("noise pack has " + std::to_string(noise.z.size()) + " entries, schedule needs " +
                     std::to_string(schedule.K + 1));
  }
  for (const auto& z : noise.z) {
    if (z.size() != d) throw ShapeError("noise vector has wrong dimension");
  }
}

std::string_view to_string(ReverseMean form) { return form == ReverseMean::kPlain ? "plain" : "ddpm"; }

ReverseMean reverse_mean_from_string(const std::string& name) {
  if (name == "plain") return ReverseMean::kPlain;
  if (name == "ddpm") return ReverseMean::kDdpm;
  throw ConfigError("unknown reverse mean form '" + name + "'");
}

}  // namespace

double Schedule::eps_coef(int k) const {
  const double one_minus_alpha = 1.0 - alpha(k);
  if (mean_form == ReverseMean::kPlain) return one_minus_alpha;
  return one_minus_alpha / std::sqrt(1.0 - alpha_bar(k));
}

Schedule Schedule::linear(int K, double beta_lo, double beta_hi, ReverseMean mean_form,
                          bool final_step_noise) {
  if (K < 1) throw ConfigError("diffusion depth K must be >= 1");
  if (!(beta_lo > 0.0 && beta_hi < 1.0 && beta_lo <= beta_hi)) {
    throw ConfigError("beta range must satisfy 0 < lo <= hi < 1");
  }
  std::vector<double> alphas(static_cast<std::size_t>(K));
  std::vector<double> sigmas(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    const double beta =
        K == 1 ? beta_lo : beta_lo + (beta_hi - beta_lo) * static_cast<double>(k - 1) / (K - 1);
    alphas[static_cast<std::size_t>(k - 1)] = 1.0 - beta;
    sigmas[static_cast<std::size_t>(k - 1)] = (k == 1 && !final_step_noise) ? 0.0 : std::sqrt(beta);
  }
  return from_alphas(std::move(alphas), std::move(sigmas), mean_form);
}

Schedule Schedule::from_alphas(std::vector<double> alphas, std::vector<double> sigmas,
                               ReverseMean mean_form) {
  if (alphas.empty() || alphas.size() != sigmas.size()) {
    throw ConfigError("schedule needs K >= 1 alphas and as many sigmas");
  }
  Schedule s;
  s.K = static_cast<int>(alphas.size());
  s.mean_form = mean_form;
  double bar = 1.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > 0.0 && alphas[i] < 1.0)) throw ConfigError("alphas must lie in (0, 1)");
    if (sigmas[i] < 0.0) throw ConfigError("sigmas must be >= 0");
    bar *= alphas[i];
    s.alpha_bars.push_back(bar);
  }
  s.alphas = std::move(alphas);
  s.sigmas = std::move(sigmas);
  return s;
}

nlohmann::json schedule_to_json(const Schedule& schedule) {
  return {{"K", schedule.K},
          {"alphas", schedule.alphas},
          {"sigmas", schedule.sigmas},
          {"mean_form", to_string(schedule.mean_form)}};
}

Schedule schedule_from_json(const nlohmann::json& j) {
  return Schedule::from_alphas(j.at("alphas").get<std::vector<double>>(),
                               j.at("sigmas").get<std::vector<double>>(),
                               reverse_mean_from_string(j.at("mean_form").get<std::string>()));
}

NoisePack NoisePack::draw(int K, int state_dim, Rng& rng) {
  NoisePack pack;
  pack.z.reserve(static_cast<std::size_t>(K + 1));
  for (int k = 0; k <= K; ++k) pack.z.push_back(rng.normal_vector(state_dim));
  return pack;
}

NoisePack NoisePack::zeros(int K, int state_dim) {
  NoisePack pack;
  pack.z.assign(static_cast<std::size_t>(K + 1), Vector::Zero(state_dim));
  return pack;
}

Vector forward_marginal_sample(const Schedule& schedule, const Vector& x0, int k,
                               const Vector& eps) {
  check_level(schedule, k);
  const double bar = schedule.alpha_bar(k);
  return std::sqrt(bar) * x0 + std::sqrt(1.0 - bar) * eps;
}

Vector forward_step(const Schedule& schedule, const Vector& x_prev, int k, const Vector& eps) {
  check_level(schedule, k);
  const double alpha = schedule.alpha(k);
  return std::sqrt(alpha) * x_prev + std::sqrt(1.0 - alpha) * eps;
}

Vector timestep_embedding(int k, int K) {
  Vector e(kEmbedDim);
  const double t = static_cast<double>(k) / static_cast<double>(K);
  for (int i = 0; i < kEmbedDim / 2; ++i) {
    const double w = 0.5 * std::numbers::pi * static_cast<double>(1 << i);
    e[2 * i] = std::sin(w * t);
    e[2 * i + 1] = std::cos(w * t);
  }
  return e;
}

Denoiser::Denoiser(int state_dim, int action_dim, int K, std::vector<int> hidden,
                   nn::Activation act, std::uint64_t seed)
    : state_dim_(state_dim), action_dim_(action_dim), K_(K) {
  spec_.input_dim = 2 * state_dim + kEmbedDim + action_dim;
  spec_.hidden_dims = std::move(hidden);
  spec_.output_dim = state_dim;
  spec_.activation = act;
  spec_.output_activation = nn::Activation::kIdentity;
  params_ = nn::init_params(spec_, seed);
}

Denoiser::Denoiser(nn::MlpSpec spec, nn::ParamVector params, int state_dim, int action_dim, int K)
    : spec_(std::move(spec)), params_(std::move(params)), state_dim_(state_dim),
      action_dim_(action_dim), K_(K) {
  if (spec_.input_dim != 2 * state_dim + kEmbedDim + action_dim || spec_.output_dim != state_dim) {
    throw ShapeError("denoiser spec does not match state/action dims");
  }
  nn::check_params(spec_, params_);
}

Vector Denoiser::input(const Vector& u, int k, const Vector& s, const Vector& a) const {
  if (u.size() != state_dim_ || s.size() != state_dim_ || a.size() != action_dim_) {
    throw ShapeError("denoiser input dims mismatch");
  }
  Vector x(spec_.input_dim);
  x << u, timestep_embedding(k, K_), s, a;
  return x;
}

Vector Denoiser::predict(const Vector& u, int k, const Vector& s, const Vector& a) const {
  return nn::mlp_forward(spec_, params_, input(u, k, s, a));
}

Denoiser::Jacobians Denoiser::jacobians(const Vector& u, int k, const Vector& s,
                                        const Vector& a) const {
  const Vector x = input(u, k, s, a);
  const Matrix jac = nn::mlp_input_jacobian(spec_, params_, x);
  const Eigen::Index d = state_dim_;
  Jacobians out;
  out.eps = nn::mlp_forward(spec_, params_, x);
  out.du = jac.leftCols(d);
  out.ds = jac.middleCols(d + kEmbedDim, d);
  out.da = jac.rightCols(action_dim_);
  return out;
}

DenoiseDraw draw_denoise_inputs(const Schedule& schedule, const Matrix& x0, Rng& rng) {
  DenoiseDraw draw;
  const Eigen::Index n = x0.cols();
  draw.levels.resize(static_cast<std::size_t>(n));
  draw.eps.resize(x0.rows(), n);
  draw.noisy.resize(x0.rows(), n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const int k = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(schedule.K)));
    draw.levels[static_cast<std::size_t>(b)] = k;
    draw.eps.col(b) = rng.normal_vector(x0.rows());
    draw.noisy.col(b) = forward_marginal_sample(schedule, x0.col(b), k, draw.eps.col(b));
  }
  return draw;
}

double denoise_loss(const Matrix& eps, const Matrix& eps_hat) {
  if (eps.rows() != eps_hat.rows() || eps.cols() != eps_hat.cols() || eps.cols() == 0) {
    throw ShapeError("denoise_loss shape mismatch");
  }
  return (eps - eps_hat).squaredNorm() / static_cast<double>(eps.cols());
}

LossAndGrad denoise_loss_batch(const Denoiser& denoiser, const Schedule& schedule,
                               const Matrix& x0, const Matrix& cond_s, const Matrix& cond_a,
                               Rng& rng) {
  const Eigen::Index n = x0.cols();
  if (n == 0) throw ShapeError("empty denoising batch");
  if (cond_s.cols() != n || cond_a.cols() != n || x0.rows() != denoiser.state_dim() ||
      cond_s.rows() != denoiser.state_dim() || cond_a.rows() != denoiser.action_dim()) {
    throw ShapeError("denoising batch shape mismatch");
  }
  const DenoiseDraw draw = draw_denoise_inputs(schedule, x0, rng);
  Matrix inputs(denoiser.spec().input_dim, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    inputs.col(b) << draw.noisy.col(b),
        timestep_embedding(draw.levels[static_cast<std::size_t>(b)], denoiser.depth()),
        cond_s.col(b), cond_a.col(b);
  }
  const Matrix eps_hat = nn::mlp_forward_batch(denoiser.spec(), denoiser.params(), inputs);
  LossAndGrad out;
  out.loss = denoise_loss(draw.eps, eps_hat);
  const Matrix upstream = (-2.0 / static_cast<double>(n)) * (draw.eps - eps_hat);
  out.grad = nn::mlp_backward_batch(denoiser.spec(), denoiser.params(), inputs, upstream).param_grad;
  return out;
}

namespace {

// Shared by both samplers so their outputs agree bit for bit.
Vector reverse_step(const Schedule& schedule, int k, const Vector& u, const Vector& eps,
                    const Vector& z) {
  return (u - schedule.eps_coef(k) * eps) / std::sqrt(schedule.alpha(k)) + schedule.sigma(k) * z;
}

}  // namespace

Vector reverse_sample(const Denoiser& denoiser, const Schedule& schedule, const Vector& s,
                      const Vector& a, const NoisePack& noise) {
  check_noise(schedule, noise, denoiser.state_dim());
  Vector u = noise.z[static_cast<std::size_t>(schedule.K)];
  for (int k = schedule.K; k >= 1; --k) {
    const Vector eps = denoiser.predict(u, k, s, a);
    u = reverse_step(schedule, k, u, eps, noise.z[static_cast<std::size_t>(k - 1)]);
  }
  return u;
}

SampleWithJacobians reverse_sample_jacobians(const Denoiser& denoiser, const Schedule& schedule,
                                             const Vector& s, const Vector& a,
                                             const NoisePack& noise) {
  check_noise(schedule, noise, denoiser.state_dim());
  const Eigen::Index d = denoiser.state_dim();
  const Eigen::Index m = denoiser.action_dim();
  Vector u = noise.z[static_cast<std::size_t>(schedule.K)];
  Matrix A = Matrix::Zero(d, m);
  Matrix B = Matrix::Zero(d, d);
  for (int k = schedule.K; k >= 1; --k) {
    const Denoiser::Jacobians jac = denoiser.jacobians(u, k, s, a);
    const double scale = 1.0 / std::sqrt(schedule.alpha(k));
    const double c = schedule.eps_coef(k);
    const Matrix dh_du = scale * (Matrix::Identity(d, d) - c * jac.du);
    A = dh_du * A - (scale * c) * jac.da;
    B = dh_du * B - (scale * c) * jac.ds;
    u = reverse_step(schedule, k, u, jac.eps, noise.z[static_cast<std::size_t>(k - 1)]);
  }
  return {u, {A, B}};
}

DiffusionDynamics::DiffusionDynamics(Denoiser denoiser, Schedule schedule, NormStats norm,
                                     DynamicsTarget target)
    : denoiser_(std::move(denoiser)), schedule_(std::move(schedule)), norm_(std::move(norm)),
      target_(target) {
  if (denoiser_.depth() != schedule_.K) throw ShapeError("denoiser depth does not match schedule");
  if (norm_.state_mean.size() != denoiser_.state_dim()) throw ShapeError("norm stats dim mismatch");
}

Vector DiffusionDynamics::sample(const Vector& s, const Vector& a, const NoisePack& noise) const {
  const Vector x0 = reverse_sample(denoiser_, schedule_, norm_.normalize_state(s), a, noise);
  if (target_ == DynamicsTarget::kDelta) {
    return s + norm_.delta_mean + norm_.delta_std.cwiseProduct(x0);
  }
  return norm_.denormalize_state(x0);
}

DiffusionDynamics::Jacobians DiffusionDynamics::jacobians(const Vector& s, const Vector& a,
                                                          const NoisePack& noise) const {
  const auto chain = reverse_sample_jacobians(denoiser_, schedule_, norm_.normalize_state(s), a, noise);
  const Vector inv_std = norm_.state_std.cwiseInverse();
  Jacobians out;
  if (target_ == DynamicsTarget::kDelta) {
    out.next = s + norm_.delta_mean + norm_.delta_std.cwiseProduct(chain.sample);
    out.F_s = norm_.delta_std.asDiagonal() * chain.jac.B * inv_std.asDiagonal();
    out.F_s += Matrix::Identity(s.size(), s.size());
    out.F_a = norm_.delta_std.asDiagonal() * chain.jac.A;
  } else {
    out.next = norm_.denormalize_state(chain.sample);
    out.F_s = norm_.state_std.asDiagonal() * chain.jac.B * inv_std.asDiagonal();
    out.F_a = norm_.state_std.asDiagonal() * chain.jac.A;
  }
  return out;
}

DiffusionDynamics::TrainingData DiffusionDynamics::training_data(
    const std::vector<Transition>& transitions) const {
  std::vector<const Transition*> kept;
  for (const auto& tr : transitions) {
    if (!tr.done) kept.push_back(&tr);
  }
  const auto n = static_cast<Eigen::Index>(kept.size());
  TrainingData data{Matrix(state_dim(), n), Matrix(state_dim(), n), Matrix(action_dim(), n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& tr = *kept[static_cast<std::size_t>(i)];
    if (target_ == DynamicsTarget::kDelta) {
      data.x0.col(i) = (tr.s_next - tr.s - norm_.delta_mean).cwiseQuotient(norm_.delta_std);
    } else {
      data.x0.col(i) = norm_.normalize_state(tr.s_next);
    }
    data.cond_s.col(i) = norm_.normalize_state(tr.s);
    data.cond_a.col(i) = tr.a;
  }
  return data;
}

void DiffusionDynamics::save(const std::filesystem::path& path) const {
  const nlohmann::json extra = {
      {"kind", "dynamics"},
      {"state_dim", state_dim()},
      {"action_dim", action_dim()},
      {"schedule", schedule_to_json(schedule_)},
      {"norm", norm_to_json(norm_)},
      {"target", target_ == DynamicsTarget::kDelta ? "delta" : "next_state"}};
  save_checkpoint(path, denoiser_.spec(), denoiser_.params(), extra);
}

DiffusionDynamics DiffusionDynamics::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  const auto& extra = ckpt.extra;
  if (extra.value("kind", "") != "dynamics") throw IoError(path.string() + " is not a dynamics checkpoint");
  Schedule schedule = schedule_from_json(extra.at("schedule"));
  const int d = extra.at("state_dim").get<int>();
  const int m = extra.at("action_dim").get<int>();
  Denoiser denoiser(ckpt.spec, std::move(ckpt.params), d, m, schedule.K);
  const auto target = extra.at("target").get<std::string>() == "delta" ? DynamicsTarget::kDelta
                                                                       : DynamicsTarget::kNextState;
  return {std::move(denoiser), std::move(schedule), norm_from_json(extra.at("norm")), target};
}

stats::RmseResult one_step_rmse(const DiffusionDynamics& dynamics,
                                const std::vector<Transition>& heldout, int m_eval, Rng& rng) {
  if (m_eval < 1) throw ConfigError("m_eval must be >= 1");
  std::vector<double> squared;
  for (const auto& tr : heldout) {
    if (tr.done) continue;
    Vector mean = Vector::Zero(dynamics.state_dim());
    for (int i = 0; i < m_eval; ++i) mean += dynamics.sample(tr.s, tr.a, dynamics.draw_noise(rng));
    mean /= static_cast<double>(m_eval);
    squared.push_back((mean - tr.s_next).squaredNorm() / static_cast<double>(mean.size()));
  }
  if (squared.empty()) throw ConfigError("one_step_rmse: held-out set has no usable transitions");
  return stats::rmse_from_squared_errors(squared);
}

}  // namespace dwm::diffusion
