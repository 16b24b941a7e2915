// SPDX-License-Identifier: Apache-2.0
#include "mtms/stcl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mtms/error.hpp"
#include "mtms/rng.hpp"

namespace mtms {

namespace {

struct View {
  PairTag tag;
  Tensor first;
  Tensor second;
};

std::vector<ad::Var> frame_constants(ad::Tape& tape, const Tensor& frames) {
  std::vector<ad::Var> out;
  for (auto& f : unstack_frames(frames)) out.push_back(tape.constant(std::move(f)));
  return out;
}

Tensor augment_window(const Tensor& window, const Denoiser& den, const NoiseSchedule& sched, std::size_t depth,
                      Rng& rng, const AugmentOptions& opts) {
  Tensor out(window.shape());
  const std::size_t n = window.size() / window.dim(0);
  const auto frames = unstack_frames(window);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Tensor a = augment(frames[t], den, sched, depth, rng, opts);
    std::copy(a.data().begin(), a.data().end(), out.data().begin() + t * n);
  }
  return out;
}

/// Positive pairs for `plots`: `timestamps_per_plot` distinct window ends each, two views per window.
std::vector<View> build_views(std::span<const Tensor> sequences, std::span<const std::int64_t> plot_ids,
                              std::span<const std::size_t> plots, const Denoiser& den, const NoiseSchedule& sched,
                              const PretrainConfig& pc, Rng& rng) {
  std::vector<View> views;
  for (std::size_t idx : plots) {
    const Tensor& seq = sequences[idx];
    const std::size_t T = seq.dim(0);
    if (T < pc.window) throw InvalidArgument(fmt::format("sequence of {} frames is shorter than window {}", T, pc.window));
    std::vector<std::size_t> ends(T - pc.window + 1);
    std::iota(ends.begin(), ends.end(), pc.window - 1);
    std::shuffle(ends.begin(), ends.end(), rng.engine());
    ends.resize(std::min(ends.size(), pc.timestamps_per_plot));
    std::sort(ends.begin(), ends.end());
    for (std::size_t end : ends) {
      const Tensor w = sequence_window(seq, end, pc.window);
      Tensor a = augment_window(w, den, sched, pc.aug_depth, rng, pc.augment);
      Tensor b = augment_window(w, den, sched, pc.aug_depth, rng, pc.augment);
      views.push_back({{plot_ids[idx], end}, std::move(a), std::move(b)});
    }
  }
  return views;
}

}  // namespace

EncoderConfig make_encoder_config(std::size_t in_channels, std::size_t height, std::size_t width, std::size_t hidden,
                                  const SsaConfig& ssa) {
  EncoderConfig cfg;
  cfg.lstm = {in_channels, hidden, cfg.lstm.kernel, height, width};
  cfg.ssa = ssa;
  cfg.ssa.channels = hidden;
  validate(cfg.ssa);
  return cfg;
}

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  if (cfg.ssa.channels != cfg.lstm.hidden_channels) {
    throw InvalidArgument(fmt::format("attention width {} differs from hidden width {}", cfg.ssa.channels,
                                      cfg.lstm.hidden_channels));
  }
  if (cfg.embed_dim == 0) throw InvalidArgument("embedding dimension must be positive");
  EncoderParams p;
  p.lstm = init_convlstm(cfg.lstm, derive_seed(seed, 1));
  p.ssa = init_ssa(cfg.ssa, derive_seed(seed, 2));
  Rng rng(derive_seed(seed, 3));
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.feature_channels()));
  p.proj = uniform_tensor({cfg.embed_dim, cfg.feature_channels()}, -s, s, rng);
  return p;
}

ad::Var encode_map(std::span<const ad::Var> frames, const EncoderVars& p, const EncoderConfig& cfg) {
  const std::size_t a = cfg.ssa.window;
  if (frames.size() < a + 1) {
    throw InvalidArgument(fmt::format("encoder needs at least {} frames, got {}", a + 1, frames.size()));
  }
  ad::Tape& tape = frames.front().tape();
  const ConvLstmState zero = zero_state(cfg.lstm);
  const auto states = convlstm_sequence(frames, p.lstm, {tape.constant(zero.h), tape.constant(zero.c)});
  const std::size_t last = states.size() - 1;
  std::vector<ad::Var> hist;
  for (std::size_t t = last - a; t < last; ++t) hist.push_back(states[t].h);
  return ssa_forward(states[last].h, hist, p.ssa, cfg.ssa);
}

ad::Var encode_features(std::span<const ad::Var> frames, const EncoderVars& p, const EncoderConfig& cfg) {
  return ad::global_avg_pool(encode_map(frames, p, cfg));
}

ad::Var embed_sequence(std::span<const ad::Var> frames, const EncoderVars& p, const EncoderConfig& cfg) {
  return ad::matvec(p.proj, encode_features(frames, p, cfg));
}

Tensor encode_map(const Tensor& frames, const EncoderParams& p, const EncoderConfig& cfg) {
  ad::Tape tape;
  const auto vars = ad::bind(tape, p, false);
  return encode_map(frame_constants(tape, frames), vars, cfg).value();
}

Tensor encode_features(const Tensor& frames, const EncoderParams& p, const EncoderConfig& cfg) {
  ad::Tape tape;
  const auto vars = ad::bind(tape, p, false);
  return encode_features(frame_constants(tape, frames), vars, cfg).value();
}

Tensor embed_sequence(const Tensor& frames, const EncoderParams& p, const EncoderConfig& cfg) {
  ad::Tape tape;
  const auto vars = ad::bind(tape, p, false);
  return embed_sequence(frame_constants(tape, frames), vars, cfg).value();
}

ad::Var contrastive_loss(std::span<const ad::Var> first, std::span<const ad::Var> second, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument(fmt::format("temperature must be positive, got {}", tau));
  if (first.size() != second.size()) {
    throw ShapeError(fmt::format("contrastive_loss: {} anchors vs {} positives", first.size(), second.size()));
  }
  if (first.size() < 2) throw InvalidArgument("contrastive_loss needs at least one negative per anchor");
  const std::size_t n = first.size();
  std::vector<ad::Var> per_anchor;
  per_anchor.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<ad::Var> sims;
    sims.reserve(n);
    for (std::size_t j = 0; j < n; ++j) sims.push_back(ad::cosine_similarity(first[i], second[j]));
    const ad::Var logits = ad::scale(ad::stack(sims), 1.0 / tau);
    per_anchor.push_back(ad::sub(ad::log_sum_exp(logits), ad::index(logits, i)));
  }
  return ad::mean(ad::stack(per_anchor));
}

double contrastive_loss(const ContrastiveBatch& batch, double tau) {
  if (batch.first.size() != batch.tags.size() || batch.second.size() != batch.tags.size()) {
    throw ShapeError("contrastive batch: views and tags differ in count");
  }
  for (std::size_t i = 0; i < batch.tags.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.tags.size(); ++j) {
      if (batch.tags[i] == batch.tags[j]) {
        throw InvalidArgument(fmt::format("contrastive batch: pairs {} and {} share plot {} timestamp {}", i, j,
                                          batch.tags[i].plot_id, batch.tags[i].timestamp));
      }
    }
  }
  ad::Tape tape;
  std::vector<ad::Var> a, b;
  for (const auto& t : batch.first) a.push_back(tape.constant(t));
  for (const auto& t : batch.second) b.push_back(tape.constant(t));
  return contrastive_loss(a, b, tau).value().item();
}

std::vector<Tensor> prepare_sequences(const Dataset& ds) {
  std::vector<Tensor> out;
  out.reserve(ds.samples.size());
  for (const auto& s : ds.samples) out.push_back(enhance_sequence(s.x));
  return out;
}

Tensor sequence_window(const Tensor& frames, std::size_t end, std::size_t window) {
  if (frames.rank() != 4) throw ShapeError(fmt::format("expected [T,C,H,W], got {}", to_string(frames.shape())));
  if (window == 0 || end >= frames.dim(0) || end + 1 < window) {
    throw InvalidArgument(fmt::format("window of {} ending at {} exceeds {} frames", window, end, frames.dim(0)));
  }
  Shape shape = frames.shape();
  shape[0] = window;
  const std::size_t n = frames.size() / frames.dim(0);
  const auto first = frames.data().begin() + (end + 1 - window) * n;
  return Tensor(shape, std::vector<double>(first, first + window * n));
}

PretrainResult pretrain(EncoderParams& enc, const EncoderConfig& cfg, std::span<const Tensor> sequences,
                        std::span<const std::int64_t> plot_ids, std::span<const std::size_t> plots,
                        const Denoiser& den, const NoiseSchedule& sched, const PretrainConfig& pc) {
  if (plots.empty()) throw InvalidArgument("pretrain: empty training split");
  if (pc.plots_per_batch == 0 || pc.timestamps_per_plot == 0) throw InvalidArgument("pretrain: empty batches");
  if (pc.window < cfg.ssa.window + 1) {
    throw InvalidArgument(fmt::format("pretrain window {} is shorter than attention window + 1", pc.window));
  }
  PretrainResult result;
  std::vector<std::size_t> order(plots.begin(), plots.end());
  for (std::size_t epoch = 0; epoch < pc.epochs; ++epoch) {
    Rng rng(derive_seed(pc.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += pc.plots_per_batch) {
      const std::size_t stop = std::min(order.size(), start + pc.plots_per_batch);
      const auto views = build_views(sequences, plot_ids, std::span(order).subspan(start, stop - start), den, sched,
                                     pc, rng);
      if (views.size() < 2) continue;
      ad::Tape tape;
      const auto vars = ad::bind(tape, enc, true);
      std::vector<ad::Var> first, second;
      for (const auto& v : views) {
        first.push_back(embed_sequence(frame_constants(tape, v.first), vars, cfg));
        second.push_back(embed_sequence(frame_constants(tape, v.second), vars, cfg));
      }
      const ad::Var loss = contrastive_loss(first, second, pc.tau);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericalError(fmt::format("contrastive loss diverged at epoch {} batch {}", epoch, batches));
      }
      tape.backward(loss);
      ad::clipped_sgd_step(enc, vars, tape, pc.learning_rate, pc.clip_norm);
      total += value;
      ++batches;
    }
    if (batches == 0) throw InvalidArgument("pretrain: no batch holds two positive pairs");
    result.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return result;
}

SeparationStats contrastive_separation(const EncoderParams& enc, const EncoderConfig& cfg,
                                       std::span<const Tensor> sequences, std::span<const std::int64_t> plot_ids,
                                       std::span<const std::size_t> plots, const Denoiser& den,
                                       const NoiseSchedule& sched, const PretrainConfig& pc, std::uint64_t seed) {
  Rng rng(seed);
  const auto views = build_views(sequences, plot_ids, plots, den, sched, pc, rng);
  if (views.size() < 2) throw InvalidArgument("contrastive_separation needs at least two pairs");
  std::vector<Tensor> first, second;
  for (const auto& v : views) {
    first.push_back(embed_sequence(v.first, enc, cfg));
    second.push_back(embed_sequence(v.second, enc, cfg));
  }
  SeparationStats s;
  s.pairs = views.size();
  std::size_t negatives = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    for (std::size_t j = 0; j < second.size(); ++j) {
      const double c = cosine_similarity(first[i], second[j]);
      if (i == j) {
        s.positive += c;
      } else {
        s.negative += c;
        ++negatives;
      }
    }
  }
  s.positive /= static_cast<double>(first.size());
  s.negative /= static_cast<double>(negatives);
  return s;
}

}  // namespace mtms
