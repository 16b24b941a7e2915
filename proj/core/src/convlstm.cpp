// SPDX-License-Identifier: Apache-2.0
#include "mtms/convlstm.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mtms/error.hpp"
#include "mtms/rng.hpp"

namespace mtms {

namespace {

void check_config(const ConvLstmConfig& cfg) {
  if (cfg.kernel % 2 == 0) throw InvalidArgument(fmt::format("ConvLSTM kernel must be odd, got {}", cfg.kernel));
  if (cfg.in_channels == 0 || cfg.hidden_channels == 0 || cfg.height == 0 || cfg.width == 0) {
    throw InvalidArgument("ConvLSTM extents must be positive");
  }
}

ConvLstmParams shaped(const ConvLstmConfig& cfg) {
  check_config(cfg);
  const std::size_t k = cfg.kernel, ci = cfg.in_channels, ch = cfg.hidden_channels;
  ConvLstmParams p;
  for (auto* t : {&p.w_fi, &p.w_ff, &p.w_fo, &p.w_fc}) *t = Tensor({ch, ci, k, k});
  for (auto* t : {&p.w_hi, &p.w_hf, &p.w_ho, &p.w_hc}) *t = Tensor({ch, ch, k, k});
  for (auto* t : {&p.w_ci, &p.w_cf, &p.w_co}) *t = Tensor({ch, cfg.height, cfg.width});
  for (auto* t : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) *t = Tensor({ch});
  return p;
}

}  // namespace

ConvLstmParams zero_convlstm(const ConvLstmConfig& cfg) { return shaped(cfg); }

ConvLstmParams init_convlstm(const ConvLstmConfig& cfg, std::uint64_t seed) {
  ConvLstmParams p = shaped(cfg);
  Rng rng(seed);
  const double k2 = static_cast<double>(cfg.kernel * cfg.kernel);
  const double s_in = 1.0 / std::sqrt(static_cast<double>(cfg.in_channels) * k2);
  const double s_hid = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_channels) * k2);
  const double s_gate = 1.0 / std::sqrt(static_cast<double>(cfg.in_channels + cfg.hidden_channels) * k2);
  auto fill = [&](Tensor& t, double s) {
    for (auto& v : t.data()) v = rng.uniform(-s, s);
  };
  for (auto* t : {&p.w_fi, &p.w_ff, &p.w_fo, &p.w_fc}) fill(*t, s_in);
  for (auto* t : {&p.w_hi, &p.w_hf, &p.w_ho, &p.w_hc}) fill(*t, s_hid);
  // Peephole weights act elementwise: fan-in 1.
  for (auto* t : {&p.w_ci, &p.w_cf, &p.w_co}) fill(*t, 1.0);
  for (auto* t : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) fill(*t, s_gate);
  return p;
}

ConvLstmState zero_state(const ConvLstmConfig& cfg) {
  return {Tensor({cfg.hidden_channels, cfg.height, cfg.width}), Tensor({cfg.hidden_channels, cfg.height, cfg.width})};
}

ConvLstmStateVar convlstm_step(ad::Var frame, const ConvLstmStateVar& prev, const ConvLstmVars& p) {
  const Shape fs = frame.shape();
  const Shape hs = prev.h.shape();
  if (fs.size() != 3 || hs.size() != 3 || fs[1] != hs[1] || fs[2] != hs[2] || prev.c.shape() != hs) {
    throw ShapeError(fmt::format("convlstm_step: frame {} does not match state {}", to_string(fs), to_string(hs)));
  }
  const std::size_t pad = (p.w_fi.shape()[2] - 1) / 2;
  auto gate_pre = [&](ad::Var wf, ad::Var wh, ad::Var b) {
    return ad::add_channel_bias(ad::add(ad::conv2d(frame, wf, pad), ad::conv2d(prev.h, wh, pad)), b);
  };
  const ad::Var i = ad::sigmoid(ad::add(gate_pre(p.w_fi, p.w_hi, p.b_i), ad::mul(p.w_ci, prev.c)));
  const ad::Var f = ad::sigmoid(ad::add(gate_pre(p.w_ff, p.w_hf, p.b_f), ad::mul(p.w_cf, prev.c)));
  const ad::Var candidate = ad::tanh(gate_pre(p.w_fc, p.w_hc, p.b_c));
  const ad::Var c = ad::add(ad::mul(f, prev.c), ad::mul(i, candidate));
  const ad::Var o = ad::sigmoid(ad::add(gate_pre(p.w_fo, p.w_ho, p.b_o), ad::mul(p.w_co, c)));
  const ad::Var h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

ConvLstmState convlstm_step(const Tensor& frame, const ConvLstmState& prev, const ConvLstmParams& p) {
  ad::Tape tape;
  const auto vars = ad::bind(tape, p, false);
  const auto next = convlstm_step(tape.constant(frame), {tape.constant(prev.h), tape.constant(prev.c)}, vars);
  return {next.h.value(), next.c.value()};
}

std::vector<ConvLstmStateVar> convlstm_sequence(std::span<const ad::Var> frames, const ConvLstmVars& p,
                                                const ConvLstmStateVar& init) {
  if (frames.empty()) throw InvalidArgument("convlstm_sequence needs at least one frame");
  std::vector<ConvLstmStateVar> states;
  states.reserve(frames.size());
  ConvLstmStateVar s = init;
  for (auto f : frames) {
    s = convlstm_step(f, s, p);
    states.push_back(s);
  }
  return states;
}

std::vector<Tensor> unstack_frames(const Tensor& frames) {
  if (frames.rank() != 4) throw ShapeError(fmt::format("expected [T,C,H,W], got {}", to_string(frames.shape())));
  const Shape one(frames.shape().begin() + 1, frames.shape().end());
  const std::size_t n = element_count(one);
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < frames.dim(0); ++t) {
    out.emplace_back(one, std::vector<double>(frames.data().begin() + t * n, frames.data().begin() + (t + 1) * n));
  }
  return out;
}

std::vector<ConvLstmState> convlstm_sequence(const Tensor& frames, const ConvLstmParams& p, const ConvLstmState& init) {
  ad::Tape tape;
  const auto vars = ad::bind(tape, p, false);
  std::vector<ad::Var> fv;
  for (auto& f : unstack_frames(frames)) fv.push_back(tape.constant(std::move(f)));
  const auto states = convlstm_sequence(fv, vars, {tape.constant(init.h), tape.constant(init.c)});
  std::vector<ConvLstmState> out;
  for (const auto& s : states) out.push_back({s.h.value(), s.c.value()});
  return out;
}

}  // namespace mtms
