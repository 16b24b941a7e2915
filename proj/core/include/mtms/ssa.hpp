// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mtms/autodiff.hpp"
#include "mtms/tensor.hpp"

namespace mtms {

/// Composition of SE and shuffle inside the temporal branch. kCbam and kTransformer are reserved
/// tags; selecting them fails.
enum class AttentionMode { kSeShuffle, kShuffleSe, kSeOnly, kShuffleOnly, kNone, kCbam, kTransformer };
/// Composition of the spatial stack applied to H_t.
enum class ConvMode { kConvCondConv, kCondConvConv, kConvOnly, kCondConvOnly, kDilated };

std::string_view to_string(AttentionMode mode);
std::string_view to_string(ConvMode mode);
AttentionMode parse_attention_mode(std::string_view name);
ConvMode parse_conv_mode(std::string_view name);

struct SsaConfig {
  std::size_t channels = 8;      // C, hidden channels of the recurrent cell
  std::size_t out_channels = 8;  // C', channels of the spatial stack output
  std::size_t reduction = 2;     // r
  std::size_t groups = 2;        // g
  std::size_t experts = 2;       // K
  std::size_t window = 2;        // a
  std::size_t kernel = 3;
  AttentionMode attention = AttentionMode::kSeShuffle;
  ConvMode conv = ConvMode::kConvCondConv;

  std::size_t concat_channels() const noexcept { return out_channels + channels; }
};

/// Rejects inconsistent sizes and the reserved attention tags.
void validate(const SsaConfig& cfg);

template <class T>
struct SsaParamsT {
  T se_w1;         // [C/r, C]
  T se_w2;         // [C, C/r]
  T temporal_w;    // [a], oldest offset first
  T conv_w;        // [C', C_in, k, k]
  T conv_b;        // [C']
  T cond_experts;  // [K, C', C_in, k, k]
  T cond_routing;  // [K, C_in]

  template <class F, class Self, class... Others>
  static void visit(F&& f, Self& s, Others&... o) {
    f("se_w1", s.se_w1, o.se_w1...);
    f("se_w2", s.se_w2, o.se_w2...);
    f("temporal_w", s.temporal_w, o.temporal_w...);
    f("conv_w", s.conv_w, o.conv_w...);
    f("conv_b", s.conv_b, o.conv_b...);
    f("cond_experts", s.cond_experts, o.cond_experts...);
    f("cond_routing", s.cond_routing, o.cond_routing...);
  }
};
using SsaParams = SsaParamsT<Tensor>;
using SsaVars = SsaParamsT<ad::Var>;

/// The input width of conv_w and cond_* depends on which stage comes first in `cfg.conv`.
SsaParams init_ssa(const SsaConfig& cfg, std::uint64_t seed);
SsaParams zero_ssa(const SsaConfig& cfg);

/// sigma(W2 relu(W1 pool(H))) scales each channel of H.
ad::Var se_attention(ad::Var h, ad::Var w1, ad::Var w2);
Tensor se_attention(const Tensor& h, const Tensor& w1, const Tensor& w2);

ad::Var channel_shuffle(ad::Var x, std::size_t groups);
Tensor channel_shuffle(const Tensor& x, std::size_t groups);

/// The per-map branch selected by cfg.attention (SE then shuffle by default).
ad::Var attend(ad::Var h, const SsaVars& p, const SsaConfig& cfg);

/// sum_tau w_tau * attend(H_tau) over hist = H_{t-a}..H_{t-1}.
ad::Var temporal_attention(std::span<const ad::Var> hist, const SsaVars& p, const SsaConfig& cfg);

/// pi = softmax(routing pool(x)).
ad::Var routing_weights(ad::Var x, ad::Var routing);
Tensor routing_weights(const Tensor& x, const Tensor& routing);
/// conv2d(x, sum_k pi_k(x) W_k) with same padding and no bias.
ad::Var cond_conv(ad::Var x, ad::Var experts, ad::Var routing);
Tensor cond_conv(const Tensor& x, const Tensor& experts, const Tensor& routing);

/// Standard conv (bias, ReLU) and CondConv in the order selected by cfg.conv.
ad::Var conv_stack(ad::Var h, const SsaVars& p, const SsaConfig& cfg);

/// [conv_stack(H_t), temporal_attention(hist)] along channels: C' + C channels.
ad::Var ssa_forward(ad::Var h_t, std::span<const ad::Var> hist, const SsaVars& p, const SsaConfig& cfg);
Tensor ssa_forward(const Tensor& h_t, std::span<const Tensor> hist, const SsaParams& p, const SsaConfig& cfg);

}  // namespace mtms
