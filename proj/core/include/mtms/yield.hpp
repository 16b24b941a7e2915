// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mtms/autodiff.hpp"
#include "mtms/stcl.hpp"
#include "mtms/tensor.hpp"

namespace mtms {

/// Y_pred = act(W_c * F_opt + b_c) with a 3x3 kernel and padding 1.
template <class T>
struct HeadParamsT {
  T w;  // [1, C_sel, 3, 3]
  T b;  // [1]

  template <class F, class Self, class... Others>
  static void visit(F&& f, Self& s, Others&... o) {
    f("w", s.w, o.w...);
    f("b", s.b, o.b...);
  }
};
using HeadParams = HeadParamsT<Tensor>;
using HeadVars = HeadParamsT<ad::Var>;

HeadParams init_head(std::size_t channels, std::uint64_t seed);

struct YieldPrediction {
  Tensor map;  // [1,H,W]
  double scalar = 0.0;
};

struct YieldPredictionVar {
  ad::Var map;
  ad::Var scalar;  // spatial mean of the map, one element
};

/// Only identity and relu are meaningful output activations for regression.
YieldPredictionVar predict_yield(ad::Var features, const HeadVars& p, Activation act);
YieldPrediction predict_yield(const Tensor& features, const HeadParams& p, Activation act = Activation::kIdentity);

/// (1/N) sum (y - y_pred)^2.
double mse_loss(std::span<const double> y, std::span<const double> y_pred);
ad::Var mse_loss(std::span<const ad::Var> y_pred, std::span<const double> y);

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 0.01;
  double encoder_learning_rate = 1e-3;
  std::size_t batch_size = 8;  // 0 = whole training split
  std::size_t patience = 5;
  bool standardize_targets = true;
  bool normalize_features = true;  // per-channel affine map fitted on the training split
  bool finetune_encoder = false;
  bool bias_only = false;
  double clip_norm = 1.0;
  Activation activation = Activation::kIdentity;
  std::uint64_t seed = 0;
};

/// Encoder, selected channels, feature normalization and head: everything needed to map a
/// [T,C,H,W] sequence to a yield.
struct YieldModel {
  EncoderConfig encoder_config;
  EncoderParams encoder;
  std::vector<std::size_t> channels;  // selected F_concat channels
  std::vector<double> feature_shift, feature_scale;  // per selected channel
  HeadParams head;
  Activation activation = Activation::kIdentity;
  double target_mean = 0.0, target_scale = 1.0;

  double predict(const Tensor& sequence) const;
};

/// Normalized selected feature maps of a sequence on a tape.
ad::Var model_features(const YieldModel& model, std::span<const ad::Var> frames, const EncoderVars& enc);

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double train_mse = 0.0;
  double val_mse = 0.0;   // in standardized target units when standardization is on
};

struct TrainResult {
  YieldModel model;  // parameters of the best validation epoch
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
};

/// Mask channels of F_concat selected by an EO mask.
std::vector<std::size_t> mask_channels(const std::vector<bool>& mask);

/// SGD on the squared error over `train`; early stop when validation MSE has not improved for
/// `patience` epochs. Aborts with NumericalError on a non-finite loss.
TrainResult train_final(const EncoderParams& encoder, const EncoderConfig& encoder_config,
                        std::span<const Tensor> sequences, std::span<const double> targets,
                        std::span<const std::size_t> train, std::span<const std::size_t> val,
                        const std::vector<std::size_t>& channels, const TrainConfig& config);

}  // namespace mtms
