// SPDX-License-Identifier: Apache-2.0
#include "mtms/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "mtms/error.hpp"

namespace mtms {

NoiseSchedule::NoiseSchedule(std::vector<double> beta) : beta_(std::move(beta)) {
  if (beta_.empty()) throw InvalidArgument("noise schedule needs at least one step");
  for (std::size_t i = 0; i < beta_.size(); ++i) {
    if (!(beta_[i] >= 0.0 && beta_[i] <= 1.0)) {
      throw InvalidArgument(fmt::format("noise schedule beta_{} = {} outside [0,1]", i + 1, beta_[i]));
    }
    if (i > 0 && beta_[i] > beta_[i - 1]) {
      throw InvalidArgument(fmt::format("noise schedule must be non-increasing (beta_{} > beta_{})", i + 1, i));
    }
  }
}

NoiseSchedule NoiseSchedule::make(ScheduleShape shape, std::size_t steps, double start, double end) {
  if (steps == 0) throw InvalidArgument("noise schedule needs at least one step");
  std::vector<double> beta(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    double u = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    if (shape == ScheduleShape::kCosine) u = 0.5 * (1.0 - std::cos(std::numbers::pi * u));
    beta[i] = start + (end - start) * u;
  }
  return NoiseSchedule(std::move(beta));
}

double NoiseSchedule::beta(std::size_t t) const {
  if (t < 1 || t > beta_.size()) {
    throw InvalidArgument(fmt::format("diffusion step {} outside [1, {}]", t, beta_.size()));
  }
  return beta_[t - 1];
}

Denoiser init_denoiser(std::size_t channels, std::size_t hidden, std::size_t steps, std::uint64_t seed) {
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>((channels + 1) * 9));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden * 9));
  Denoiser d;
  d.steps = steps;
  d.params.w1 = uniform_tensor({hidden, channels + 1, 3, 3}, -s1, s1, rng);
  d.params.b1 = uniform_tensor({hidden}, -s1, s1, rng);
  d.params.w2 = uniform_tensor({channels, hidden, 3, 3}, -s2, s2, rng);
  d.params.b2 = uniform_tensor({channels}, -s2, s2, rng);
  return d;
}

ad::Var denoise(const DenoiserVars& p, std::size_t steps, ad::Var z, std::size_t t) {
  const Shape s = z.shape();
  if (s.size() != 3) throw ShapeError(fmt::format("denoiser input must be [C,H,W], got {}", to_string(s)));
  ad::Tape& tape = z.tape();
  const ad::Var time = tape.constant(Tensor({1, s[1], s[2]}, static_cast<double>(t) / static_cast<double>(steps)));
  const ad::Var in[] = {z, time};
  const ad::Var hidden = ad::relu(ad::add_channel_bias(ad::conv2d(ad::concat_channels(in), p.w1, 1), p.b1));
  return ad::add_channel_bias(ad::conv2d(hidden, p.w2, 1), p.b2);
}

Tensor denoise(const Denoiser& den, const Tensor& z, std::size_t t) {
  ad::Tape tape;
  const auto p = ad::bind(tape, den.params, false);
  return denoise(p, den.steps, tape.constant(z), t).value();
}

Tensor forward_diffuse(const Tensor& z0, std::size_t t, const NoiseSchedule& sched, const Tensor& noise) {
  if (noise.shape() != z0.shape()) throw ShapeError("forward_diffuse: noise shape differs from z0");
  const double b = sched.beta(t);
  const double sd = std::sqrt(1.0 - b);
  Tensor out(z0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = b * z0[i] + sd * noise[i];
  return out;
}

Tensor forward_diffuse(const Tensor& z0, std::size_t t, const NoiseSchedule& sched, Rng& rng) {
  sched.beta(t);  // range check before drawing
  return forward_diffuse(z0, t, sched, normal_tensor(z0.shape(), rng));
}

Tensor reverse_step(const Tensor& z_t, std::size_t t, const Denoiser& den, double sigma_t, Rng& rng) {
  if (t < 1) throw InvalidArgument("reverse_step needs t >= 1");
  if (!(sigma_t >= 0.0)) throw InvalidArgument("reverse_step needs sigma_t >= 0");
  Tensor out = denoise(den, z_t, t);
  if (sigma_t > 0.0) {
    for (auto& v : out.data()) v += sigma_t * rng.normal();
  }
  return out;
}

double trajectory_consistency(const Tensor& z_t, const Tensor& generated) {
  if (z_t.shape() != generated.shape()) throw ShapeError("trajectory_consistency: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < z_t.size(); ++i) s += (z_t[i] - generated[i]) * (z_t[i] - generated[i]);
  return s;
}

double trajectory_consistency(const Tensor& z0, std::size_t t, const Denoiser& den, const NoiseSchedule& sched,
                              Rng& rng) {
  const Tensor z_t = forward_diffuse(z0, t, sched, rng);
  return trajectory_consistency(z_t, denoise(den, z0, t));
}

namespace {

// ceil(T/2) distinct steps, sorted.
std::vector<std::size_t> consistency_steps(std::size_t steps, Rng& rng) {
  std::vector<std::size_t> all(steps);
  std::iota(all.begin(), all.end(), 1);
  std::shuffle(all.begin(), all.end(), rng.engine());
  all.resize((steps + 1) / 2);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

ad::Var sss_loss(const DenoiserVars& p, std::size_t steps, const Tensor& z0, const NoiseSchedule& sched, double lambda,
                 std::uint64_t seed) {
  if (!(lambda >= 0.0)) throw InvalidArgument("sss_loss needs lambda >= 0");
  ad::Tape& tape = p.w1.tape();
  Rng rng(seed);
  std::vector<Tensor> noisy;
  noisy.reserve(sched.steps());
  for (std::size_t t = 1; t <= sched.steps(); ++t) noisy.push_back(forward_diffuse(z0, t, sched, rng));
  const auto subset = consistency_steps(sched.steps(), rng);

  const ad::Var clean = tape.constant(z0);
  std::vector<ad::Var> reg;
  for (std::size_t t = 1; t <= sched.steps(); ++t) {
    reg.push_back(ad::mse(denoise(p, steps, tape.constant(noisy[t - 1]), t), clean));
  }
  ad::Var total = ad::sum(ad::stack(reg));
  if (lambda > 0.0) {
    std::vector<ad::Var> cons;
    for (auto t : subset) {
      cons.push_back(ad::sum_squares(ad::sub(tape.constant(noisy[t - 1]), denoise(p, steps, clean, t))));
    }
    total = ad::add(total, ad::scale(ad::sum(ad::stack(cons)), lambda));
  }
  return total;
}

double sss_loss(const Tensor& z0, const Denoiser& den, const NoiseSchedule& sched, double lambda, std::uint64_t seed) {
  ad::Tape tape;
  const auto p = ad::bind(tape, den.params, false);
  return sss_loss(p, den.steps, z0, sched, lambda, seed).value().item();
}

Tensor augment(const Tensor& frame, const Denoiser& den, const NoiseSchedule& sched, std::size_t depth, Rng& rng,
               const AugmentOptions& options) {
  if (depth > sched.steps()) {
    throw InvalidArgument(fmt::format("augmentation depth {} exceeds schedule length {}", depth, sched.steps()));
  }
  if (depth == 0) return frame;
  Tensor z = forward_diffuse(frame, depth, sched, rng);
  for (std::size_t t = depth; t >= 1; --t) {
    z = reverse_step(z, t, den, options.sigma_scale * std::sqrt(1.0 - sched.beta(t)), rng);
  }
  return z;
}

std::pair<Tensor, Tensor> augment_pair(const Tensor& frame, const Denoiser& den, const NoiseSchedule& sched,
                                       std::size_t depth, Rng& rng, const AugmentOptions& options) {
  Tensor a = augment(frame, den, sched, depth, rng, options);
  Tensor b = augment(frame, den, sched, depth, rng, options);
  return {std::move(a), std::move(b)};
}

std::vector<double> train_denoiser(Denoiser& den, std::span<const Tensor> frames, const NoiseSchedule& sched,
                                   const DenoiserTraining& cfg) {
  if (frames.empty()) throw InvalidArgument("train_denoiser: no frames");
  std::vector<double> history;
  Rng order_rng(cfg.seed);
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng.engine());
    double total = 0.0;
    for (auto i : order) {
      ad::Tape tape;
      const auto p = ad::bind(tape, den.params, true);
      const ad::Var loss = sss_loss(p, den.steps, frames[i], sched, cfg.lambda, derive_seed(cfg.seed, ++step));
      const double v = loss.value().item();
      if (!std::isfinite(v)) throw NumericalError(fmt::format("denoiser training diverged at epoch {}", epoch));
      tape.backward(loss);
      ad::sgd_step(den.params, p, tape, cfg.learning_rate);
      total += v;
    }
    history.push_back(total / static_cast<double>(frames.size()));
  }
  return history;
}

}  // namespace mtms
