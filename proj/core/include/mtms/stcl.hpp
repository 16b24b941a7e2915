// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtms/autodiff.hpp"
#include "mtms/convlstm.hpp"
#include "mtms/dataset.hpp"
#include "mtms/diffusion.hpp"
#include "mtms/ssa.hpp"
#include "mtms/tensor.hpp"

namespace mtms {

struct EncoderConfig {
  ConvLstmConfig lstm;
  SsaConfig ssa;
  std::size_t embed_dim = 16;  // d_e

  std::size_t feature_channels() const noexcept { return ssa.concat_channels(); }
};

/// Recurrent cell, attention block and linear projection head.
template <class T>
struct EncoderParamsT {
  ConvLstmParamsT<T> lstm;
  SsaParamsT<T> ssa;
  T proj;  // [d_e, C' + C]

  template <class F, class Self, class... Others>
  static void visit(F&& f, Self& s, Others&... o) {
    ConvLstmParamsT<T>::visit([&](std::string_view n, auto&... xs) { f(std::string("lstm.").append(n), xs...); },
                              s.lstm, o.lstm...);
    SsaParamsT<T>::visit([&](std::string_view n, auto&... xs) { f(std::string("ssa.").append(n), xs...); }, s.ssa,
                         o.ssa...);
    f("proj", s.proj, o.proj...);
  }
};
using EncoderParams = EncoderParamsT<Tensor>;
using EncoderVars = EncoderParamsT<ad::Var>;

/// Fills cfg.lstm / cfg.ssa channel counts consistently and validates.
EncoderConfig make_encoder_config(std::size_t in_channels, std::size_t height, std::size_t width,
                                  std::size_t hidden = 8, const SsaConfig& ssa = {});
EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed);

/// F_concat for frames[0..T-1]: the recurrent cell runs over every frame, the attention block reads
/// the final hidden map and the `window` maps before it. Requires T >= window + 1.
ad::Var encode_map(std::span<const ad::Var> frames, const EncoderVars& p, const EncoderConfig& cfg);
/// global_avg_pool(F_concat): [C' + C].
ad::Var encode_features(std::span<const ad::Var> frames, const EncoderVars& p, const EncoderConfig& cfg);
/// proj * encode_features: [d_e].
ad::Var embed_sequence(std::span<const ad::Var> frames, const EncoderVars& p, const EncoderConfig& cfg);

/// Tensor front-ends over frames [T,C,H,W].
Tensor encode_map(const Tensor& frames, const EncoderParams& p, const EncoderConfig& cfg);
Tensor encode_features(const Tensor& frames, const EncoderParams& p, const EncoderConfig& cfg);
Tensor embed_sequence(const Tensor& frames, const EncoderParams& p, const EncoderConfig& cfg);

/// Mean over anchors i of -log(exp(s_ii/tau) / (sum_{j != i} exp(s_ij/tau) + exp(s_ii/tau))), with
/// s_ij = cos(first_i, second_j). The negatives of anchor i are every other second view.
ad::Var contrastive_loss(std::span<const ad::Var> first, std::span<const ad::Var> second, double tau);

struct PairTag {
  std::int64_t plot_id = 0;
  std::size_t timestamp = 0;

  friend bool operator==(const PairTag&, const PairTag&) = default;
};

struct ContrastiveBatch {
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  std::vector<PairTag> tags;  // one per positive pair
};

/// Requires distinct tags (so every negative differs in plot or timestamp) and at least two pairs.
double contrastive_loss(const ContrastiveBatch& batch, double tau);

struct PretrainConfig {
  double tau = 0.5;
  double learning_rate = 0.01;
  std::size_t epochs = 20;
  std::size_t plots_per_batch = 4;
  std::size_t timestamps_per_plot = 2;  // batch = 8 positive pairs
  std::size_t window = 4;               // frames per contrastive view
  std::size_t aug_depth = 1;
  double clip_norm = 1.0;  // global gradient-norm cap, <= 0 disables
  AugmentOptions augment;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  std::vector<double> epoch_loss;  // mean contrastive loss per epoch
};

/// Pre-enhanced frames [T,C,H,W] for every sample of a dataset.
std::vector<Tensor> prepare_sequences(const Dataset& ds);

/// SGD on the contrastive loss over batches of `plots` drawn from `sequences`; each positive pair is
/// two diffusion round trips of one window. Aborts with NumericalError on a non-finite loss.
PretrainResult pretrain(EncoderParams& enc, const EncoderConfig& cfg, std::span<const Tensor> sequences,
                        std::span<const std::int64_t> plot_ids, std::span<const std::size_t> plots,
                        const Denoiser& den, const NoiseSchedule& sched, const PretrainConfig& pc);

struct SeparationStats {
  double positive = 0.0;  // mean cos over positive pairs
  double negative = 0.0;  // mean cos over (first_i, second_j), i != j
  std::size_t pairs = 0;
};

/// Builds one batch over `plots` exactly as pre-training does and measures mean similarities.
SeparationStats contrastive_separation(const EncoderParams& enc, const EncoderConfig& cfg,
                                       std::span<const Tensor> sequences, std::span<const std::int64_t> plot_ids,
                                       std::span<const std::size_t> plots, const Denoiser& den,
                                       const NoiseSchedule& sched, const PretrainConfig& pc, std::uint64_t seed);

/// Window [end - window + 1, end] of a [T,C,H,W] sequence; frames outside [0,T) are rejected.
Tensor sequence_window(const Tensor& frames, std::size_t end, std::size_t window);

}  // namespace mtms
