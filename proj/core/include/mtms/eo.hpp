// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mtms/rng.hpp"

namespace mtms {

using Mask = std::vector<bool>;

/// Fitness reported for an empty mask; no real fitness reaches it.
inline constexpr double kEmptyMaskPenalty = std::numeric_limits<double>::max();

/// How the random factor delta_r of the position update is drawn.
///   kSigned: per coordinate from U[-1,1]
///   kUnit:   per particle from U[0,1]
enum class EoDelta { kSigned, kUnit };

std::string_view to_string(EoDelta mode);
EoDelta parse_eo_delta(std::string_view name);

struct EoConfig {
  std::size_t particles = 20;
  std::size_t iterations = 100;
  double alpha = 0.5;   // generation-rate scale
  double lambda = 0.5;  // balance between attraction and momentum
  EoDelta delta = EoDelta::kSigned;
  std::uint64_t seed = 0;
};

struct Particle {
  std::vector<double> position;       // every coordinate in [0,1]
  std::vector<double> prev_position;  // empty before the first step
  double fitness = kEmptyMaskPenalty;
};

struct EoState {
  std::vector<Particle> particles;
  std::vector<std::size_t> pool;  // indices of the four best particles, ascending fitness
  std::vector<double> p_avg;      // mean position of the pool
  std::size_t iter = 0;
  EoConfig config;
  Rng rng{0};
};

using MaskFitness = std::function<double(const Mask&)>;
using PositionFitness = std::function<double(std::span<const double>)>;

/// Coordinate >= 0.5 selects the feature.
Mask binarize(std::span<const double> position);
std::size_t count_selected(const Mask& mask);

/// Positions drawn uniformly from [0,1]; fitness left unevaluated. Rejects fewer than four particles.
EoState eo_initialize(std::size_t dim, const EoConfig& config);

/// Fitness of the particle's binarized position; kEmptyMaskPenalty for the empty mask.
/// Exceptions from `fitness` are rethrown with the particle index.
double evaluate_fitness(const Particle& particle, const MaskFitness& fitness, std::size_t index = 0);

/// Evaluates every particle and refreshes the pool.
void evaluate_all(EoState& state, const MaskFitness& fitness);
void evaluate_all(EoState& state, const PositionFitness& fitness);

/// Pool = four lowest-fitness particles (ties by lower index); p_avg = their mean position.
void update_pool(EoState& state);

/// clamp(p + delta (p - p_avg) + g lambda, 0, 1).
double eo_update_coordinate(double p, double p_avg, double delta, double g, double lambda);

/// Source of delta_r for (particle, coordinate); defaults to the configured draw.
using DeltaSource = std::function<double(std::size_t particle, std::size_t coord)>;

/// Moves every particle once (g = alpha (P(t) - P(t-1)), zero on the first step) without
/// re-evaluating fitness.
void eo_move(EoState& state, const DeltaSource& delta = {});

/// eo_move, then fitness re-evaluation and a pool refresh.
void eo_step(EoState& state, const MaskFitness& fitness, const DeltaSource& delta = {});
void eo_step(EoState& state, const PositionFitness& fitness, const DeltaSource& delta = {});

struct EoResult {
  Mask mask;                    // best-ever binarized position
  std::vector<double> position; // best-ever position
  double fitness = kEmptyMaskPenalty;
  std::vector<double> history;  // best-ever fitness after initialization and after each step
  std::size_t found_at = 0;     // iteration at which the best-ever value first appeared
};

EoResult run_eo(std::size_t dim, const MaskFitness& fitness, const EoConfig& config);
/// Diagnostic mode: fitness evaluated on continuous positions, no binarization.
EoResult run_eo_relaxed(std::size_t dim, const PositionFitness& fitness, const EoConfig& config);

/// Validation MSE of a ridge-regularized linear probe on the selected columns, plus
/// `sparsity` times the selected fraction. Features are standardized on the training rows.
class RidgeProbe {
 public:
  RidgeProbe(std::vector<std::vector<double>> train_x, std::vector<double> train_y,
             std::vector<std::vector<double>> val_x, std::vector<double> val_y, double ridge = 1e-2,
             double sparsity = 0.01);

  double operator()(const Mask& mask) const;
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::vector<std::vector<double>> train_x_, val_x_;
  std::vector<double> train_y_, val_y_;
  std::size_t dim_ = 0;
  double ridge_;
  double sparsity_;
};

}  // namespace mtms
