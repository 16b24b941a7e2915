// SPDX-License-Identifier: Apache-2.0
#include "mtms/yield.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mtms/convlstm.hpp"
#include "mtms/error.hpp"
#include "mtms/rng.hpp"

namespace mtms {

namespace {

std::vector<ad::Var> frame_constants(ad::Tape& tape, const Tensor& frames) {
  std::vector<ad::Var> out;
  for (auto& f : unstack_frames(frames)) out.push_back(tape.constant(std::move(f)));
  return out;
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

/// Selected F_concat maps, before normalization, for every sample.
std::vector<Tensor> raw_maps(const YieldModel& m, std::span<const Tensor> sequences) {
  std::vector<Tensor> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) {
    ad::Tape tape;
    const auto enc = ad::bind(tape, m.encoder, false);
    out.push_back(ad::select_channels(encode_map(frame_constants(tape, s), enc, m.encoder_config), m.channels).value());
  }
  return out;
}

Tensor normalize(const YieldModel& m, const Tensor& maps) {
  Tensor out = maps;
  const std::size_t n = maps.size() / maps.dim(0);
  for (std::size_t c = 0; c < maps.dim(0); ++c) {
    for (std::size_t i = 0; i < n; ++i) out[c * n + i] = (out[c * n + i] - m.feature_shift[c]) * m.feature_scale[c];
  }
  return out;
}

}  // namespace

HeadParams init_head(std::size_t channels, std::uint64_t seed) {
  if (channels == 0) throw InvalidArgument("yield head needs at least one selected feature");
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(channels * 9));
  return {uniform_tensor({1, channels, 3, 3}, -s, s, rng), Tensor({1})};
}

YieldPredictionVar predict_yield(ad::Var features, const HeadVars& p, Activation act) {
  const Shape fs = features.shape();
  if (fs.size() != 3 || fs[0] == 0) {
    throw ShapeError(fmt::format("yield head input must be [C_sel,H,W] with C_sel >= 1, got {}", to_string(fs)));
  }
  const ad::Var map = ad::activation(ad::add_channel_bias(ad::conv2d(features, p.w, 1), p.b), act);
  return {map, ad::mean(map)};
}

YieldPrediction predict_yield(const Tensor& features, const HeadParams& p, Activation act) {
  ad::Tape tape;
  const auto vars = ad::bind(tape, p, false);
  const auto out = predict_yield(tape.constant(features), vars, act);
  return {out.map.value(), out.scalar.value().item()};
}

double mse_loss(std::span<const double> y, std::span<const double> y_pred) {
  if (y.size() != y_pred.size()) throw ShapeError(fmt::format("mse_loss: {} targets vs {} predictions", y.size(), y_pred.size()));
  if (y.empty()) throw InvalidArgument("mse_loss needs at least one value");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_pred[i]) * (y[i] - y_pred[i]);
  return s / static_cast<double>(y.size());
}

ad::Var mse_loss(std::span<const ad::Var> y_pred, std::span<const double> y) {
  if (y.size() != y_pred.size()) throw ShapeError(fmt::format("mse_loss: {} targets vs {} predictions", y.size(), y_pred.size()));
  if (y.empty()) throw InvalidArgument("mse_loss needs at least one value");
  ad::Tape& tape = y_pred.front().tape();
  return ad::mse(ad::stack(y_pred), tape.constant(Tensor({y.size()}, std::vector<double>(y.begin(), y.end()))));
}

std::vector<std::size_t> mask_channels(const std::vector<bool>& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

ad::Var model_features(const YieldModel& model, std::span<const ad::Var> frames, const EncoderVars& enc) {
  const ad::Var maps = ad::select_channels(encode_map(frames, enc, model.encoder_config), model.channels);
  ad::Tape& tape = frames.front().tape();
  const std::size_t c = model.channels.size();
  std::vector<double> shift(c);
  for (std::size_t i = 0; i < c; ++i) shift[i] = -model.feature_shift[i] * model.feature_scale[i];
  const ad::Var scaled = ad::scale_channels(maps, tape.constant(Tensor({c}, model.feature_scale)));
  return ad::add_channel_bias(scaled, tape.constant(Tensor({c}, shift)));
}

double YieldModel::predict(const Tensor& sequence) const {
  ad::Tape tape;
  const auto enc = ad::bind(tape, encoder, false);
  const auto head_vars = ad::bind(tape, head, false);
  const auto out = predict_yield(model_features(*this, frame_constants(tape, sequence), enc), head_vars, activation);
  return out.scalar.value().item() * target_scale + target_mean;
}

TrainResult train_final(const EncoderParams& encoder, const EncoderConfig& encoder_config,
                        std::span<const Tensor> sequences, std::span<const double> targets,
                        std::span<const std::size_t> train, std::span<const std::size_t> val,
                        const std::vector<std::size_t>& channels, const TrainConfig& cfg) {
  if (channels.empty()) throw InvalidArgument("train_final: empty feature selection");
  if (train.empty()) throw InvalidArgument("train_final: empty training split");
  if (val.empty()) throw InvalidArgument("train_final: empty validation split");
  if (sequences.size() != targets.size()) throw ShapeError("train_final: sequences and targets differ in count");
  for (auto c : channels) {
    if (c >= encoder_config.feature_channels()) {
      throw InvalidArgument(fmt::format("selected channel {} exceeds {} features", c, encoder_config.feature_channels()));
    }
  }

  YieldModel model;
  model.encoder_config = encoder_config;
  model.encoder = encoder;
  model.channels = channels;
  model.activation = cfg.activation;
  model.head = init_head(channels.size(), derive_seed(cfg.seed, 1));
  if (cfg.bias_only) model.head.w.fill(0.0);

  std::vector<double> train_y;
  for (auto i : train) train_y.push_back(targets[i]);
  if (cfg.standardize_targets) {
    model.target_mean = mean_of(train_y);
    double var = 0.0;
    for (double y : train_y) var += (y - model.target_mean) * (y - model.target_mean);
    model.target_scale = std::sqrt(var / static_cast<double>(train_y.size()));
    if (!(model.target_scale > 1e-12)) model.target_scale = 1.0;
  }
  auto standardized = [&](std::size_t i) { return (targets[i] - model.target_mean) / model.target_scale; };

  const std::size_t c = channels.size();
  model.feature_shift.assign(c, 0.0);
  model.feature_scale.assign(c, 1.0);
  std::vector<Tensor> maps = raw_maps(model, sequences);
  if (cfg.normalize_features) {
    const std::size_t n = maps.front().size() / c;
    for (std::size_t k = 0; k < c; ++k) {
      double s = 0.0, sq = 0.0;
      for (auto i : train) {
        for (std::size_t j = 0; j < n; ++j) {
          const double v = maps[i][k * n + j];
          s += v;
          sq += v * v;
        }
      }
      const double count = static_cast<double>(train.size() * n);
      const double mu = s / count;
      const double sd = std::sqrt(std::max(0.0, sq / count - mu * mu));
      model.feature_shift[k] = mu;
      model.feature_scale[k] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
  }
  for (auto& m : maps) m = normalize(model, m);

  auto evaluate = [&](std::span<const std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) {
      const double p = predict_yield(maps[i], model.head, model.activation).scalar;
      s += (p - standardized(i)) * (p - standardized(i));
    }
    return s / static_cast<double>(idx.size());
  };

  TrainResult result;
  result.curve.push_back({0, evaluate(train), evaluate(val)});
  double best_val = result.curve.back().val_mse;
  YieldModel best = model;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train.begin(), train.end());
  const std::size_t batch = cfg.batch_size == 0 ? order.size() : cfg.batch_size;
  Rng rng(derive_seed(cfg.seed, 2));

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      ad::Tape tape;
      const auto head = ad::bind(tape, model.head, true);
      const auto enc = ad::bind(tape, model.encoder, cfg.finetune_encoder);
      std::vector<ad::Var> preds;
      std::vector<double> ys;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        const ad::Var feats = cfg.finetune_encoder ? model_features(model, frame_constants(tape, sequences[i]), enc)
                                                   : tape.constant(maps[i]);
        preds.push_back(predict_yield(feats, head, model.activation).scalar);
        ys.push_back(standardized(i));
      }
      const ad::Var loss = mse_loss(preds, ys);
      if (!std::isfinite(loss.value().item())) {
        throw NumericalError(fmt::format("yield training diverged at epoch {}", epoch));
      }
      tape.backward(loss);
      if (cfg.bias_only) {
        const Tensor g = tape.grad(head.b);
        model.head.b[0] -= cfg.learning_rate * g[0];
      } else {
        ad::clipped_sgd_step(model.head, head, tape, cfg.learning_rate, cfg.clip_norm);
      }
      if (cfg.finetune_encoder) ad::clipped_sgd_step(model.encoder, enc, tape, cfg.encoder_learning_rate, cfg.clip_norm);
    }
    if (cfg.finetune_encoder) {
      maps = raw_maps(model, sequences);
      for (auto& m : maps) m = normalize(model, m);
    }
    result.curve.push_back({epoch, evaluate(train), evaluate(val)});
    if (result.curve.back().val_mse < best_val) {
      best_val = result.curve.back().val_mse;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  result.model = std::move(best);
  return result;
}

}  // namespace mtms
