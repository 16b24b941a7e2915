// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "mtms/convlstm.hpp"
#include "mtms/eo.hpp"
#include "mtms/ops.hpp"
#include "mtms/rng.hpp"
#include "mtms/stcl.hpp"

namespace {

void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  mtms::Rng rng(1);
  const mtms::Tensor x = mtms::uniform_tensor({c, 8, 8}, -1, 1, rng);
  const mtms::Tensor k = mtms::uniform_tensor({8, c, 3, 3}, -1, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mtms::conv2d(x, k, 1));
}
BENCHMARK(BM_Conv2d)->Arg(2)->Arg(12)->Arg(16);

void BM_ConvLstmStep(benchmark::State& state) {
  const mtms::ConvLstmConfig cfg;
  mtms::Rng rng(2);
  const auto p = mtms::init_convlstm(cfg, 3);
  const mtms::Tensor frame = mtms::uniform_tensor({cfg.in_channels, cfg.height, cfg.width}, 0, 1, rng);
  const auto prev = mtms::zero_state(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(mtms::convlstm_step(frame, prev, p));
}
BENCHMARK(BM_ConvLstmStep);

void BM_EmbedSequence(benchmark::State& state) {
  const auto cfg = mtms::make_encoder_config(12, 8, 8);
  const auto p = mtms::init_encoder(cfg, 4);
  mtms::Rng rng(5);
  const mtms::Tensor frames = mtms::uniform_tensor({static_cast<std::size_t>(state.range(0)), 12, 8, 8}, 0, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mtms::embed_sequence(frames, p, cfg));
}
BENCHMARK(BM_EmbedSequence)->Arg(4)->Arg(6);

void BM_EoPlanted(benchmark::State& state) {
  mtms::Mask target(20);
  for (std::size_t i = 0; i < 20; i += 3) target[i] = true;
  auto hamming = [&](const mtms::Mask& m) {
    double d = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) d += m[i] != target[i];
    return d;
  };
  for (auto _ : state) benchmark::DoNotOptimize(mtms::run_eo(20, hamming, {.seed = 1}));
}
BENCHMARK(BM_EoPlanted);

}  // namespace
BENCHMARK_MAIN();
