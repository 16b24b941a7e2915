// SPDX-License-Identifier: Apache-2.0
#include "mtms/eo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <type_traits>

#include <fmt/format.h>

#include "mtms/error.hpp"

namespace mtms {

namespace {

void check_config(std::size_t dim, const EoConfig& c) {
  if (dim == 0) throw InvalidArgument("EO needs at least one dimension");
  if (c.particles < 4) throw InvalidArgument(fmt::format("EO needs at least 4 particles, got {}", c.particles));
  if (!(c.alpha >= 0.0) || !(c.lambda >= 0.0)) throw InvalidArgument("EO alpha and lambda must be non-negative");
}

template <class Fitness>
void evaluate_particles(EoState& state, const Fitness& fitness) {
  for (std::size_t i = 0; i < state.particles.size(); ++i) {
    if constexpr (std::is_same_v<Fitness, MaskFitness>) {
      state.particles[i].fitness = evaluate_fitness(state.particles[i], fitness, i);
    } else {
      state.particles[i].fitness = fitness(state.particles[i].position);
    }
  }
  update_pool(state);
}

template <class Fitness>
EoResult run(std::size_t dim, const Fitness& fitness, const EoConfig& config) {
  EoState state = eo_initialize(dim, config);
  evaluate_all(state, fitness);
  EoResult best;
  auto record = [&] {
    const Particle& top = state.particles[state.pool.front()];
    if (top.fitness < best.fitness || best.history.empty()) {
      best.fitness = top.fitness;
      best.position = top.position;
      best.mask = binarize(top.position);
      best.found_at = state.iter;
    }
    best.history.push_back(best.fitness);
  };
  record();
  for (std::size_t it = 0; it < config.iterations; ++it) {
    eo_step(state, fitness);
    record();
  }
  return best;
}

}  // namespace

std::string_view to_string(EoDelta mode) { return mode == EoDelta::kSigned ? "signed" : "unit"; }

EoDelta parse_eo_delta(std::string_view name) {
  if (name == "signed") return EoDelta::kSigned;
  if (name == "unit") return EoDelta::kUnit;
  throw InvalidArgument(fmt::format("unknown eo_delta '{}' (signed|unit)", name));
}

Mask binarize(std::span<const double> position) {
  Mask m(position.size());
  for (std::size_t i = 0; i < position.size(); ++i) m[i] = position[i] >= 0.5;
  return m;
}

std::size_t count_selected(const Mask& mask) { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

EoState eo_initialize(std::size_t dim, const EoConfig& config) {
  check_config(dim, config);
  EoState s;
  s.config = config;
  s.rng = Rng(config.seed);
  s.particles.resize(config.particles);
  for (auto& p : s.particles) {
    p.position.resize(dim);
    for (auto& x : p.position) x = s.rng.uniform();
  }
  return s;
}

double evaluate_fitness(const Particle& particle, const MaskFitness& fitness, std::size_t index) {
  const Mask mask = binarize(particle.position);
  if (count_selected(mask) == 0) return kEmptyMaskPenalty;
  try {
    return fitness(mask);
  } catch (const std::exception& e) {
    throw Error(fmt::format("fitness evaluation failed for particle {}: {}", index, e.what()));
  }
}

void evaluate_all(EoState& state, const MaskFitness& fitness) { evaluate_particles(state, fitness); }
void evaluate_all(EoState& state, const PositionFitness& fitness) { evaluate_particles(state, fitness); }

void update_pool(EoState& state) {
  std::vector<std::size_t> idx(state.particles.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return state.particles[a].fitness < state.particles[b].fitness;
  });
  idx.resize(std::min<std::size_t>(4, idx.size()));
  state.pool = idx;
  const std::size_t dim = state.particles.front().position.size();
  state.p_avg.assign(dim, 0.0);
  for (auto i : idx) {
    for (std::size_t j = 0; j < dim; ++j) state.p_avg[j] += state.particles[i].position[j];
  }
  for (auto& v : state.p_avg) v /= static_cast<double>(idx.size());
}

double eo_update_coordinate(double p, double p_avg, double delta, double g, double lambda) {
  return std::clamp(p + delta * (p - p_avg) + g * lambda, 0.0, 1.0);
}

void eo_move(EoState& state, const DeltaSource& delta) {
  if (state.pool.empty()) throw InvalidArgument("eo_move: pool is empty; evaluate the population first");
  const EoConfig& c = state.config;
  for (std::size_t i = 0; i < state.particles.size(); ++i) {
    Particle& p = state.particles[i];
    const double unit = c.delta == EoDelta::kUnit && !delta ? state.rng.uniform() : 0.0;
    std::vector<double> next(p.position.size());
    for (std::size_t j = 0; j < p.position.size(); ++j) {
      double d = unit;
      if (delta) {
        d = delta(i, j);
      } else if (c.delta == EoDelta::kSigned) {
        d = state.rng.uniform(-1.0, 1.0);
      }
      const double g = p.prev_position.empty() ? 0.0 : c.alpha * (p.position[j] - p.prev_position[j]);
      next[j] = eo_update_coordinate(p.position[j], state.p_avg[j], d, g, c.lambda);
    }
    p.prev_position = std::move(p.position);
    p.position = std::move(next);
  }
  ++state.iter;
}

void eo_step(EoState& state, const MaskFitness& fitness, const DeltaSource& delta) {
  eo_move(state, delta);
  evaluate_all(state, fitness);
}

void eo_step(EoState& state, const PositionFitness& fitness, const DeltaSource& delta) {
  eo_move(state, delta);
  evaluate_all(state, fitness);
}

EoResult run_eo(std::size_t dim, const MaskFitness& fitness, const EoConfig& config) {
  return run(dim, fitness, config);
}

EoResult run_eo_relaxed(std::size_t dim, const PositionFitness& fitness, const EoConfig& config) {
  return run(dim, fitness, config);
}

RidgeProbe::RidgeProbe(std::vector<std::vector<double>> train_x, std::vector<double> train_y,
                       std::vector<std::vector<double>> val_x, std::vector<double> val_y, double ridge,
                       double sparsity)
    : train_x_(std::move(train_x)),
      val_x_(std::move(val_x)),
      train_y_(std::move(train_y)),
      val_y_(std::move(val_y)),
      ridge_(ridge),
      sparsity_(sparsity) {
  if (train_x_.empty() || val_x_.empty()) throw InvalidArgument("ridge probe needs train and validation rows");
  if (train_x_.size() != train_y_.size() || val_x_.size() != val_y_.size()) {
    throw ShapeError("ridge probe: feature rows and targets differ in count");
  }
  dim_ = train_x_.front().size();
  for (const auto* rows : {&train_x_, &val_x_}) {
    for (const auto& r : *rows) {
      if (r.size() != dim_) throw ShapeError("ridge probe: ragged feature rows");
    }
  }
  if (!(ridge_ > 0.0)) throw InvalidArgument("ridge strength must be positive");
}

double RidgeProbe::operator()(const Mask& mask) const {
  if (mask.size() != dim_) throw ShapeError(fmt::format("mask of {} for {} features", mask.size(), dim_));
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < dim_; ++j) {
    if (mask[j]) cols.push_back(j);
  }
  if (cols.empty()) return kEmptyMaskPenalty;
  const auto n = static_cast<Eigen::Index>(train_x_.size());
  const auto m = static_cast<Eigen::Index>(val_x_.size());
  const auto d = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd x(n, d), xv(m, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = train_x_[i][cols[j]];
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) xv(i, j) = val_x_[i][cols[j]];
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::RowVectorXd sd = ((x.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < d; ++j) sd(j) = sd(j) > 1e-12 ? sd(j) : 1.0;
  x = (x.rowwise() - mu).array().rowwise() / sd.array();
  xv = (xv.rowwise() - mu).array().rowwise() / sd.array();
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(train_y_.data(), n);
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(val_y_.data(), m);
  const double y_mean = y.mean();
  const Eigen::MatrixXd gram = x.transpose() * x + ridge_ * static_cast<double>(n) * Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd w = gram.ldlt().solve(x.transpose() * (y.array() - y_mean).matrix());
  const Eigen::VectorXd resid = (xv * w).array() + y_mean - yv.array();
  return resid.squaredNorm() / static_cast<double>(m) +
         sparsity_ * static_cast<double>(d) / static_cast<double>(dim_);
}

}  // namespace mtms
