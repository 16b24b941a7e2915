// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mtms/tensor.hpp"

namespace mtms {

enum class Source { kS1, kS2, kL8 };

std::string_view to_string(Source source);
Source parse_source(std::string_view name);

/// Band layout of one sensor: S1 has VV/VH, S2 twelve MSI bands, L8 seven surface-reflectance bands
/// plus thermal ST_B10.
struct BandSpec {
  Source source = Source::kS2;
  std::vector<std::string> band_names;

  std::size_t channels() const noexcept { return band_names.size(); }
  static BandSpec for_source(Source source);

  friend bool operator==(const BandSpec&, const BandSpec&) = default;
};

struct PlotSample {
  std::int64_t plot_id = 0;
  std::string season_tag;
  Tensor x;  // [T,H,W,C], values in [0,1]
  double y = 0.0;

  friend bool operator==(const PlotSample&, const PlotSample&) = default;
};

struct Split {
  std::vector<std::size_t> train, val, test;

  friend bool operator==(const Split&, const Split&) = default;
};

struct Dataset {
  BandSpec bands;
  std::size_t T = 0, H = 0, W = 0;
  std::vector<PlotSample> samples;
  Split split;
};

/// Same band layout, extents and samples. The split is not part of the comparison because the file
/// format does not carry it.
bool same_content(const Dataset& a, const Dataset& b);

struct SynthOptions {
  double yield_noise = 0.05;  // relative std of multiplicative yield noise
  double band_noise = 0.01;   // absolute std on reflectances
};

/// Deterministic synthetic plot time series. Each plot draws a latent fertility and growth onset;
/// band responses follow a logistic growth curve scaled by fertility, and yield is affine in
/// fertility and the late-season vegetation-band response, plus noise.
Dataset generate_dataset(const BandSpec& bands, std::size_t n_plots, std::size_t T, std::size_t H, std::size_t W,
                         std::uint64_t seed, const SynthOptions& options = {});

/// x + L(x) with the 4-neighbour Laplacian [[0,-1,0],[-1,4,-1],[0,-1,0]] and zero padding.
Tensor laplacian_enhance(const Tensor& image);

/// Applies laplacian_enhance to every band of every step of x[T,H,W,C] and returns the
/// channel-first encoder input [T,C,H,W].
Tensor enhance_sequence(const Tensor& x);

/// [T,H,W,C] -> [T,C,H,W] without filtering.
Tensor to_channel_first(const Tensor& x);

/// Seeded shuffle then floor(0.8 n) train, floor(0.1 n) val, remainder test.
Dataset split_dataset(Dataset ds, std::uint64_t seed);

/// File layout:
///   "MTMSDS v1 <source> <n> <T> <H> <W> <C>\n"
///   "<band>,<band>,...\n"
///   per sample: "<plot_id> <season_tag> <y>\n" then T*H*W*C little-endian doubles in [t][h][w][c] order
///   trailing little-endian u64 FNV-1a checksum of every preceding byte.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace mtms
