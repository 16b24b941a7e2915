// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mtms/autodiff.hpp"
#include "mtms/rng.hpp"
#include "mtms/tensor.hpp"

namespace mtms {

enum class ScheduleShape { kLinear, kCosine };

/// Per-step mean coefficients beta_1..beta_T. q(z_t | z_0) = N(beta_t z_0, (1 - beta_t) I), so beta
/// near 1 keeps the image and beta near 0 is pure noise. Values lie in [0,1] and never increase with t.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> beta);

  /// Interpolates from `start` at t=1 to `end` at t=steps; kCosine eases the interpolation.
  static NoiseSchedule make(ScheduleShape shape, std::size_t steps, double start = 0.95, double end = 0.30);

  std::size_t steps() const noexcept { return beta_.size(); }
  /// 1-based step index.
  double beta(std::size_t t) const;

 private:
  std::vector<double> beta_;
};

/// Two-layer convolutional mean predictor mu_theta(z, t). The step enters as one extra input
/// channel holding t / steps. The same network plays the generator G_theta(z_0, t).
template <class T>
struct DenoiserParamsT {
  T w1;  // [hidden, C+1, 3, 3]
  T b1;  // [hidden]
  T w2;  // [C, hidden, 3, 3]
  T b2;  // [C]

  template <class F, class Self, class... Others>
  static void visit(F&& f, Self& s, Others&... o) {
    f("w1", s.w1, o.w1...);
    f("b1", s.b1, o.b1...);
    f("w2", s.w2, o.w2...);
    f("b2", s.b2, o.b2...);
  }
};
using DenoiserParams = DenoiserParamsT<Tensor>;
using DenoiserVars = DenoiserParamsT<ad::Var>;

struct Denoiser {
  DenoiserParams params;
  std::size_t steps = 10;  // T_d used to scale the time channel
};

Denoiser init_denoiser(std::size_t channels, std::size_t hidden, std::size_t steps, std::uint64_t seed);

/// mu_theta(z, t) on a tape.
ad::Var denoise(const DenoiserVars& p, std::size_t steps, ad::Var z, std::size_t t);
Tensor denoise(const Denoiser& den, const Tensor& z, std::size_t t);

/// z_t = beta_t z_0 + sqrt(1 - beta_t) eps, eps drawn from `rng`. Requires 1 <= t <= steps.
Tensor forward_diffuse(const Tensor& z0, std::size_t t, const NoiseSchedule& sched, Rng& rng);
/// Same with a caller-supplied noise sample.
Tensor forward_diffuse(const Tensor& z0, std::size_t t, const NoiseSchedule& sched, const Tensor& noise);

/// z_{t-1} = mu_theta(z_t, t) + sigma_t eps.
Tensor reverse_step(const Tensor& z_t, std::size_t t, const Denoiser& den, double sigma_t, Rng& rng);

/// ||z_t - generated||^2.
double trajectory_consistency(const Tensor& z_t, const Tensor& generated);
/// Draws z_t once from `rng` and measures ||z_t - G_theta(z_0, t)||^2.
double trajectory_consistency(const Tensor& z0, std::size_t t, const Denoiser& den, const NoiseSchedule& sched,
                              Rng& rng);

/// sum_t L_reg(z_t, z_0) + lambda * sum_{t in S} T_consistency(z_0, t).
/// L_reg is the MSE between mu_theta(z_t, t) and z_0; S is a seeded uniform subset of ceil(T/2)
/// steps. All noise comes from `seed`, so the loss is a deterministic function of the parameters.
ad::Var sss_loss(const DenoiserVars& p, std::size_t steps, const Tensor& z0, const NoiseSchedule& sched, double lambda,
                 std::uint64_t seed);
double sss_loss(const Tensor& z0, const Denoiser& den, const NoiseSchedule& sched, double lambda, std::uint64_t seed);

struct AugmentOptions {
  double sigma_scale = 0.1;  // sigma_t = sigma_scale * sqrt(1 - beta_t)
};

/// Forward-diffuses `frame` to `depth` and walks the reverse chain back to step 0.
/// depth == 0 returns the frame unchanged.
Tensor augment(const Tensor& frame, const Denoiser& den, const NoiseSchedule& sched, std::size_t depth, Rng& rng,
               const AugmentOptions& options = {});

/// Two independent round trips of the same frame (the contrastive positive pair).
std::pair<Tensor, Tensor> augment_pair(const Tensor& frame, const Denoiser& den, const NoiseSchedule& sched,
                                       std::size_t depth, Rng& rng, const AugmentOptions& options = {});

struct DenoiserTraining {
  std::size_t epochs = 2;
  double learning_rate = 1e-3;
  double lambda = 0.1;
  std::uint64_t seed = 0;
};

/// SGD on sss_loss, one frame per step. Returns the mean loss of each epoch.
std::vector<double> train_denoiser(Denoiser& den, std::span<const Tensor> frames, const NoiseSchedule& sched,
                                   const DenoiserTraining& cfg);

}  // namespace mtms
