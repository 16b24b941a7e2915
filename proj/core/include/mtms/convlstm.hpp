// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mtms/autodiff.hpp"
#include "mtms/tensor.hpp"

namespace mtms {

struct ConvLstmConfig {
  std::size_t in_channels = 12;
  std::size_t hidden_channels = 8;
  std::size_t kernel = 3;  // odd; padding (k-1)/2 keeps spatial extents
  std::size_t height = 8;
  std::size_t width = 8;
};

/// Gate weights of the peephole ConvLSTM:
///   i_t = sigma(W_Fi * F_t + W_Hi * H_{t-1} + W_Ci . C_{t-1} + b_i)
///   f_t = sigma(W_Ff * F_t + W_Hf * H_{t-1} + W_Cf . C_{t-1} + b_f)
///   C_t = f_t . C_{t-1} + i_t . tanh(W_Fc * F_t + W_Hc * H_{t-1} + b_c)
///   o_t = sigma(W_Fo * F_t + W_Ho * H_{t-1} + W_Co . C_t + b_o)
///   H_t = o_t . tanh(C_t)
/// where * is convolution and . the Hadamard product. The output gate peeks at the current cell.
template <class T>
struct ConvLstmParamsT {
  T w_fi, w_ff, w_fo, w_fc;  // [C_hid, C_in, k, k]
  T w_hi, w_hf, w_ho, w_hc;  // [C_hid, C_hid, k, k]
  T w_ci, w_cf, w_co;        // [C_hid, H, W]
  T b_i, b_f, b_o, b_c;      // [C_hid]

  template <class F, class Self, class... Others>
  static void visit(F&& f, Self& s, Others&... o) {
    f("w_fi", s.w_fi, o.w_fi...);
    f("w_ff", s.w_ff, o.w_ff...);
    f("w_fo", s.w_fo, o.w_fo...);
    f("w_fc", s.w_fc, o.w_fc...);
    f("w_hi", s.w_hi, o.w_hi...);
    f("w_hf", s.w_hf, o.w_hf...);
    f("w_ho", s.w_ho, o.w_ho...);
    f("w_hc", s.w_hc, o.w_hc...);
    f("w_ci", s.w_ci, o.w_ci...);
    f("w_cf", s.w_cf, o.w_cf...);
    f("w_co", s.w_co, o.w_co...);
    f("b_i", s.b_i, o.b_i...);
    f("b_f", s.b_f, o.b_f...);
    f("b_o", s.b_o, o.b_o...);
    f("b_c", s.b_c, o.b_c...);
  }
};
using ConvLstmParams = ConvLstmParamsT<Tensor>;
using ConvLstmVars = ConvLstmParamsT<ad::Var>;

struct ConvLstmState {
  Tensor h;  // [C_hid,H,W]
  Tensor c;  // [C_hid,H,W]
};

struct ConvLstmStateVar {
  ad::Var h;
  ad::Var c;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], seeded.
ConvLstmParams init_convlstm(const ConvLstmConfig& cfg, std::uint64_t seed);
/// All-zero parameters of the configured shapes.
ConvLstmParams zero_convlstm(const ConvLstmConfig& cfg);
ConvLstmState zero_state(const ConvLstmConfig& cfg);

ConvLstmStateVar convlstm_step(ad::Var frame, const ConvLstmStateVar& prev, const ConvLstmVars& p);
ConvLstmState convlstm_step(const Tensor& frame, const ConvLstmState& prev, const ConvLstmParams& p);

/// Iterates convlstm_step over frames in time order and returns every intermediate state.
std::vector<ConvLstmStateVar> convlstm_sequence(std::span<const ad::Var> frames, const ConvLstmVars& p,
                                                const ConvLstmStateVar& init);
/// frames [T,C_in,H,W].
std::vector<ConvLstmState> convlstm_sequence(const Tensor& frames, const ConvLstmParams& p, const ConvLstmState& init);

/// Splits [T,C,H,W] into T tensors [C,H,W].
std::vector<Tensor> unstack_frames(const Tensor& frames);

}  // namespace mtms
