// SPDX-License-Identifier: Apache-2.0
#include "mtms/ssa.hpp"

#include <array>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "mtms/error.hpp"
#include "mtms/rng.hpp"

namespace mtms {

namespace {

constexpr std::array<std::pair<AttentionMode, std::string_view>, 7> kAttentionNames{{
    {AttentionMode::kSeShuffle, "se_shuffle"},
    {AttentionMode::kShuffleSe, "shuffle_se"},
    {AttentionMode::kSeOnly, "se_only"},
    {AttentionMode::kShuffleOnly, "shuffle_only"},
    {AttentionMode::kNone, "none"},
    {AttentionMode::kCbam, "cbam"},
    {AttentionMode::kTransformer, "transformer"},
}};

constexpr std::array<std::pair<ConvMode, std::string_view>, 5> kConvNames{{
    {ConvMode::kConvCondConv, "conv_condconv"},
    {ConvMode::kCondConvConv, "condconv_conv"},
    {ConvMode::kConvOnly, "conv_only"},
    {ConvMode::kCondConvOnly, "condconv_only"},
    {ConvMode::kDilated, "dilated"},
}};

bool cond_first(ConvMode m) { return m == ConvMode::kCondConvConv || m == ConvMode::kCondConvOnly; }

std::size_t conv_input(const SsaConfig& cfg) {
  return cfg.conv == ConvMode::kCondConvConv ? cfg.out_channels : cfg.channels;
}

std::size_t cond_input(const SsaConfig& cfg) { return cond_first(cfg.conv) ? cfg.channels : cfg.out_channels; }

SsaParams shaped(const SsaConfig& cfg) {
  validate(cfg);
  const std::size_t k = cfg.kernel;
  SsaParams p;
  p.se_w1 = Tensor({cfg.channels / cfg.reduction, cfg.channels});
  p.se_w2 = Tensor({cfg.channels, cfg.channels / cfg.reduction});
  p.temporal_w = Tensor({cfg.window});
  p.conv_w = Tensor({cfg.out_channels, conv_input(cfg), k, k});
  p.conv_b = Tensor({cfg.out_channels});
  p.cond_experts = Tensor({cfg.experts, cfg.out_channels, cond_input(cfg), k, k});
  p.cond_routing = Tensor({cfg.experts, cond_input(cfg)});
  return p;
}

std::vector<ad::Var> constants(ad::Tape& tape, std::span<const Tensor> ts) {
  std::vector<ad::Var> out;
  for (const auto& t : ts) out.push_back(tape.constant(t));
  return out;
}

}  // namespace

std::string_view to_string(AttentionMode mode) {
  for (const auto& [m, name] : kAttentionNames) {
    if (m == mode) return name;
  }
  return "?";
}

std::string_view to_string(ConvMode mode) {
  for (const auto& [m, name] : kConvNames) {
    if (m == mode) return name;
  }
  return "?";
}

AttentionMode parse_attention_mode(std::string_view name) {
  for (const auto& [m, n] : kAttentionNames) {
    if (n == name) return m;
  }
  throw InvalidArgument(fmt::format("unknown attention mode '{}'", name));
}

ConvMode parse_conv_mode(std::string_view name) {
  for (const auto& [m, n] : kConvNames) {
    if (n == name) return m;
  }
  throw InvalidArgument(fmt::format("unknown conv mode '{}'", name));
}

void validate(const SsaConfig& cfg) {
  if (cfg.attention == AttentionMode::kCbam || cfg.attention == AttentionMode::kTransformer) {
    throw InvalidArgument(fmt::format("attention mode '{}' is reserved and not implemented", to_string(cfg.attention)));
  }
  if (cfg.channels == 0 || cfg.out_channels == 0) throw InvalidArgument("SSA channel counts must be positive");
  if (cfg.reduction == 0 || cfg.channels % cfg.reduction != 0) {
    throw InvalidArgument(fmt::format("SE reduction {} does not divide {} channels", cfg.reduction, cfg.channels));
  }
  if (cfg.groups == 0 || cfg.channels % cfg.groups != 0) {
    throw InvalidArgument(fmt::format("shuffle groups {} do not divide {} channels", cfg.groups, cfg.channels));
  }
  if (cfg.experts == 0) throw InvalidArgument("CondConv needs at least one expert");
  if (cfg.window == 0) throw InvalidArgument("temporal window must be at least 1");
  if (cfg.kernel % 2 == 0) throw InvalidArgument(fmt::format("SSA kernel must be odd, got {}", cfg.kernel));
}

SsaParams zero_ssa(const SsaConfig& cfg) { return shaped(cfg); }

SsaParams init_ssa(const SsaConfig& cfg, std::uint64_t seed) {
  SsaParams p = shaped(cfg);
  Rng rng(seed);
  auto fill = [&](Tensor& t, std::size_t fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data()) v = rng.uniform(-s, s);
  };
  const std::size_t k2 = cfg.kernel * cfg.kernel;
  fill(p.se_w1, cfg.channels);
  fill(p.se_w2, cfg.channels / cfg.reduction);
  p.temporal_w.fill(1.0 / static_cast<double>(cfg.window));
  fill(p.conv_w, conv_input(cfg) * k2);
  fill(p.conv_b, conv_input(cfg) * k2);
  fill(p.cond_experts, cond_input(cfg) * k2);
  fill(p.cond_routing, cond_input(cfg));
  return p;
}

ad::Var se_attention(ad::Var h, ad::Var w1, ad::Var w2) {
  const ad::Var squeeze = ad::global_avg_pool(h);
  const ad::Var scales = ad::sigmoid(ad::matvec(w2, ad::relu(ad::matvec(w1, squeeze))));
  return ad::scale_channels(h, scales);
}

Tensor se_attention(const Tensor& h, const Tensor& w1, const Tensor& w2) {
  ad::Tape tape;
  return se_attention(tape.constant(h), tape.constant(w1), tape.constant(w2)).value();
}

ad::Var channel_shuffle(ad::Var x, std::size_t groups) {
  if (x.shape().empty()) throw ShapeError("channel_shuffle needs a channel axis");
  return ad::permute_channels(x, shuffle_permutation(x.shape()[0], groups));
}

Tensor channel_shuffle(const Tensor& x, std::size_t groups) {
  ad::Tape tape;
  return channel_shuffle(tape.constant(x), groups).value();
}

ad::Var attend(ad::Var h, const SsaVars& p, const SsaConfig& cfg) {
  switch (cfg.attention) {
    case AttentionMode::kSeShuffle:
      return channel_shuffle(se_attention(h, p.se_w1, p.se_w2), cfg.groups);
    case AttentionMode::kShuffleSe:
      return se_attention(channel_shuffle(h, cfg.groups), p.se_w1, p.se_w2);
    case AttentionMode::kSeOnly:
      return se_attention(h, p.se_w1, p.se_w2);
    case AttentionMode::kShuffleOnly:
      return channel_shuffle(h, cfg.groups);
    case AttentionMode::kNone:
      return h;
    default:
      validate(cfg);
      return h;
  }
}

ad::Var temporal_attention(std::span<const ad::Var> hist, const SsaVars& p, const SsaConfig& cfg) {
  if (hist.empty()) throw InvalidArgument("temporal_attention: empty history");
  if (hist.size() != p.temporal_w.shape()[0]) {
    throw ShapeError(fmt::format("temporal_attention: {} maps for window {}", hist.size(), p.temporal_w.shape()[0]));
  }
  std::vector<ad::Var> branches;
  branches.reserve(hist.size());
  for (auto h : hist) branches.push_back(attend(h, p, cfg));
  return ad::weighted_sum(branches, p.temporal_w);
}

ad::Var routing_weights(ad::Var x, ad::Var routing) { return ad::softmax(ad::matvec(routing, ad::global_avg_pool(x))); }

Tensor routing_weights(const Tensor& x, const Tensor& routing) {
  ad::Tape tape;
  return routing_weights(tape.constant(x), tape.constant(routing)).value();
}

ad::Var cond_conv(ad::Var x, ad::Var experts, ad::Var routing) {
  const Shape es = experts.shape();
  if (es.size() != 5) throw ShapeError(fmt::format("cond_conv: experts must be [K,Cout,Cin,k,k], got {}", to_string(es)));
  const ad::Var kernel = ad::mix(experts, routing_weights(x, routing));
  return ad::conv2d(x, kernel, (es[3] - 1) / 2);
}

Tensor cond_conv(const Tensor& x, const Tensor& experts, const Tensor& routing) {
  ad::Tape tape;
  return cond_conv(tape.constant(x), tape.constant(experts), tape.constant(routing)).value();
}

ad::Var conv_stack(ad::Var h, const SsaVars& p, const SsaConfig& cfg) {
  const std::size_t half = (cfg.kernel - 1) / 2;
  auto conv = [&](ad::Var x, std::size_t dilation) {
    return ad::relu(ad::add_channel_bias(ad::conv2d(x, p.conv_w, half * dilation, dilation), p.conv_b));
  };
  auto cond = [&](ad::Var x) { return cond_conv(x, p.cond_experts, p.cond_routing); };
  switch (cfg.conv) {
    case ConvMode::kConvCondConv:
      return cond(conv(h, 1));
    case ConvMode::kCondConvConv:
      return conv(cond(h), 1);
    case ConvMode::kConvOnly:
      return conv(h, 1);
    case ConvMode::kCondConvOnly:
      return cond(h);
    case ConvMode::kDilated:
      return cond(conv(h, 2));
  }
  throw InvalidArgument("unknown conv mode");
}

ad::Var ssa_forward(ad::Var h_t, std::span<const ad::Var> hist, const SsaVars& p, const SsaConfig& cfg) {
  const std::array<ad::Var, 2> parts{conv_stack(h_t, p, cfg), temporal_attention(hist, p, cfg)};
  return ad::concat_channels(parts);
}

Tensor ssa_forward(const Tensor& h_t, std::span<const Tensor> hist, const SsaParams& p, const SsaConfig& cfg) {
  ad::Tape tape;
  const auto vars = ad::bind(tape, p, false);
  const auto hv = constants(tape, hist);
  return ssa_forward(tape.constant(h_t), hv, vars, cfg).value();
}

}  // namespace mtms
