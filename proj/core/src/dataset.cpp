// SPDX-License-Identifier: Apache-2.0
#include "mtms/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "mtms/binary_io.hpp"
#include "mtms/error.hpp"
#include "mtms/rng.hpp"

namespace mtms {

std::string_view to_string(Source source) {
  switch (source) {
    case Source::kS1: return "S1";
    case Source::kS2: return "S2";
    case Source::kL8: return "L8";
  }
  return "?";
}

Source parse_source(std::string_view name) {
  if (name == "S1") return Source::kS1;
  if (name == "S2") return Source::kS2;
  if (name == "L8") return Source::kL8;
  throw InvalidArgument(fmt::format("unknown source '{}' (expected S1, S2 or L8)", name));
}

BandSpec BandSpec::for_source(Source source) {
  switch (source) {
    case Source::kS1:
      return {source, {"VV", "VH"}};
    case Source::kS2:
      return {source, {"B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B9", "B11", "B12"}};
    case Source::kL8:
      return {source, {"SR_B1", "SR_B2", "SR_B3", "SR_B4", "SR_B5", "SR_B6", "SR_B7", "ST_B10"}};
  }
  throw InvalidArgument("unknown source");
}

bool same_content(const Dataset& a, const Dataset& b) {
  return a.bands == b.bands && a.T == b.T && a.H == b.H && a.W == b.W && a.samples == b.samples;
}

namespace {

// Baseline reflectance and growth response per band. Bands with a response >= 0.25 are the
// "vegetation" bands whose late-season level drives yield.
struct BandResponse {
  double base;
  double growth;
};

BandResponse band_response(std::string_view band) {
  if (band == "VV") return {0.35, -0.04};
  if (band == "VH") return {0.15, 0.30};
  if (band == "B2" || band == "B3" || band == "B4" || band == "SR_B2" || band == "SR_B3" || band == "SR_B4")
    return {0.12, -0.06};
  if (band == "B5") return {0.18, 0.15};
  if (band == "B6") return {0.22, 0.30};
  if (band == "B7") return {0.24, 0.35};
  if (band == "B8" || band == "B8A" || band == "SR_B5") return {0.25, 0.40};
  if (band == "B9") return {0.10, 0.05};
  if (band == "B11" || band == "SR_B6") return {0.30, -0.05};
  if (band == "B12" || band == "SR_B7") return {0.22, -0.08};
  if (band == "ST_B10") return {0.55, 0.02};
  return {0.10, 0.0};  // coastal aerosol bands
}

constexpr double kVegetationThreshold = 0.25;
constexpr std::string_view kSeasons[] = {"kuruvai", "samba", "thaladi"};

}  // namespace

Dataset generate_dataset(const BandSpec& bands, std::size_t n_plots, std::size_t T, std::size_t H, std::size_t W,
                         std::uint64_t seed, const SynthOptions& options) {
  if (n_plots < 10) throw InvalidArgument(fmt::format("generate_dataset: need >= 10 plots, got {}", n_plots));
  if (T < 2) throw InvalidArgument(fmt::format("generate_dataset: need T >= 2, got {}", T));
  if (H < 8 || W < 8) throw InvalidArgument(fmt::format("generate_dataset: need H,W >= 8, got {}x{}", H, W));
  if (bands.channels() == 0) throw InvalidArgument("generate_dataset: empty band list");

  const std::size_t C = bands.channels();
  std::vector<BandResponse> resp;
  for (const auto& b : bands.band_names) resp.push_back(band_response(b));

  Dataset ds;
  ds.bands = bands;
  ds.T = T;
  ds.H = H;
  ds.W = W;
  Rng rng(seed);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n_plots; ++i) {
    PlotSample s;
    s.plot_id = static_cast<std::int64_t>(1000 + i);
    const std::size_t season = rng.index(std::size(kSeasons));
    s.season_tag = std::string(kSeasons[season]);
    const double fertility = rng.uniform();
    const double onset = rng.uniform(-0.1, 0.1) + 0.05 * (static_cast<double>(season) - 1.0);
    const double phase_h = rng.uniform(0.0, kTwoPi);
    const double phase_w = rng.uniform(0.0, kTwoPi);

    s.x = Tensor({T, H, W, C});
    double veg_sum = 0.0;
    std::size_t veg_count = 0;
    for (std::size_t t = 0; t < T; ++t) {
      const double stage = static_cast<double>(t) / static_cast<double>(T - 1);
      const double growth = 1.0 / (1.0 + std::exp(-8.0 * (stage - 0.45 - onset)));
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t w = 0; w < W; ++w) {
          const double pattern = 1.0 + 0.08 * std::sin(kTwoPi * static_cast<double>(h) / static_cast<double>(H) + phase_h) *
                                           std::cos(kTwoPi * static_cast<double>(w) / static_cast<double>(W) + phase_w);
          for (std::size_t c = 0; c < C; ++c) {
            double v = resp[c].base + resp[c].growth * growth * (0.4 + 0.6 * fertility) * pattern +
                       options.band_noise * rng.normal();
            v = std::clamp(v, 0.0, 1.0);
            s.x[((t * H + h) * W + w) * C + c] = v;
            if (2 * t >= T && resp[c].growth >= kVegetationThreshold) {
              veg_sum += v;
              ++veg_count;
            }
          }
        }
      }
    }
    const double veg_late = veg_count ? veg_sum / static_cast<double>(veg_count) : 0.0;
    const double clean = 2000.0 + 1500.0 * fertility + 2000.0 * veg_late;
    s.y = std::max(1.0, clean * (1.0 + options.yield_noise * rng.normal()));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Tensor laplacian_enhance(const Tensor& image) {
  if (image.rank() != 2 || image.dim(0) < 3 || image.dim(1) < 3) {
    throw ShapeError(fmt::format("laplacian_enhance expects [H,W] with H,W >= 3, got {}", to_string(image.shape())));
  }
  const std::size_t H = image.dim(0), W = image.dim(1);
  auto px = [&](std::ptrdiff_t h, std::ptrdiff_t w) {
    if (h < 0 || w < 0 || h >= static_cast<std::ptrdiff_t>(H) || w >= static_cast<std::ptrdiff_t>(W)) return 0.0;
    return image[static_cast<std::size_t>(h) * W + static_cast<std::size_t>(w)];
  };
  Tensor out(image.shape());
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      const auto y = static_cast<std::ptrdiff_t>(h), x = static_cast<std::ptrdiff_t>(w);
      const double lap = 4.0 * px(y, x) - px(y - 1, x) - px(y + 1, x) - px(y, x - 1) - px(y, x + 1);
      out[h * W + w] = px(y, x) + lap;
    }
  }
  return out;
}

Tensor to_channel_first(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError(fmt::format("expected [T,H,W,C], got {}", to_string(x.shape())));
  const std::size_t T = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  Tensor out({T, C, H, W});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w)
        for (std::size_t c = 0; c < C; ++c) out[((t * C + c) * H + h) * W + w] = x[((t * H + h) * W + w) * C + c];
  return out;
}

Tensor enhance_sequence(const Tensor& x) {
  Tensor cf = to_channel_first(x);
  const std::size_t T = cf.dim(0), C = cf.dim(1), H = cf.dim(2), W = cf.dim(3);
  Tensor plane({H, W});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (t * C + c) * H * W;
      std::copy_n(cf.data().begin() + off, H * W, plane.data().begin());
      const Tensor sharp = laplacian_enhance(plane);
      std::copy(sharp.data().begin(), sharp.data().end(), cf.data().begin() + off);
    }
  }
  return cf;
}

Dataset split_dataset(Dataset ds, std::uint64_t seed) {
  const std::size_t n = ds.samples.size();
  if (n < 10) throw InvalidArgument(fmt::format("split_dataset: need >= 10 samples, got {}", n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  ds.split.train.assign(idx.begin(), idx.begin() + n_train);
  ds.split.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  ds.split.test.assign(idx.begin() + n_train + n_val, idx.end());
  return ds;
}

namespace {

constexpr std::string_view kDatasetMagic = "MTMSDS";

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

FormatError malformed_header(std::string_view why) {
  return FormatError(FormatError::Kind::kMalformedHeader, fmt::format("malformed header: {}", why));
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  const std::size_t C = ds.bands.channels();
  std::string out = fmt::format("{} v1 {} {} {} {} {} {}\n", kDatasetMagic, to_string(ds.bands.source),
                                ds.samples.size(), ds.T, ds.H, ds.W, C);
  for (std::size_t c = 0; c < C; ++c) {
    if (c) out += ',';
    out += ds.bands.band_names[c];
  }
  out += '\n';
  const Shape expected{ds.T, ds.H, ds.W, C};
  for (const auto& s : ds.samples) {
    if (s.x.shape() != expected) {
      throw ShapeError(fmt::format("save_dataset: sample {} has shape {}, expected {}", s.plot_id,
                                   to_string(s.x.shape()), to_string(expected)));
    }
    if (s.season_tag.empty() || s.season_tag.find_first_of(" \n") != std::string::npos) {
      throw InvalidArgument(fmt::format("save_dataset: season tag '{}' must be non-empty without spaces", s.season_tag));
    }
    // fmt prints the shortest representation that parses back to the same double.
    out += fmt::format("{} {} {}\n", s.plot_id, s.season_tag, s.y);
    for (double v : s.x.data()) append_f64_le(out, v);
  }
  Fnv1a h;
  h.update(out);
  append_u64_le(out, h.digest());
  write_file(path, out);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes);
  const std::string_view header = r.line("header");
  const auto f = split_on(header, ' ');
  if (f.size() != 8 || f[0] != kDatasetMagic) throw malformed_header("bad magic string");
  if (f[1] != "v1") throw malformed_header(fmt::format("unsupported version '{}'", f[1]));
  Dataset ds;
  Source source;
  try {
    source = parse_source(f[2]);
  } catch (const InvalidArgument&) {
    throw malformed_header(fmt::format("unknown source '{}'", f[2]));
  }
  std::size_t n = 0, C = 0;
  if (!parse_number(f[3], n) || !parse_number(f[4], ds.T) || !parse_number(f[5], ds.H) || !parse_number(f[6], ds.W) ||
      !parse_number(f[7], C) || ds.T == 0 || ds.H == 0 || ds.W == 0 || C == 0) {
    throw malformed_header("bad extents");
  }
  const auto names = split_on(r.line("band list"), ',');
  if (names.size() != C) throw malformed_header(fmt::format("{} band names for C={}", names.size(), C));
  ds.bands.source = source;
  for (auto nm : names) ds.bands.band_names.emplace_back(nm);

  const std::size_t per_sample = ds.T * ds.H * ds.W * C;
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto rec = split_on(r.line("sample record"), ' ');
    PlotSample s;
    if (rec.size() != 3 || !parse_number(rec[0], s.plot_id) || rec[1].empty() || !parse_number(rec[2], s.y)) {
      throw FormatError(FormatError::Kind::kMalformedRecord, fmt::format("malformed record for sample {}", i));
    }
    s.season_tag = std::string(rec[1]);
    const auto payload = r.take(8 * per_sample, "sample values");
    std::vector<double> data(per_sample);
    for (std::size_t k = 0; k < per_sample; ++k) data[k] = read_f64_le(payload.substr(8 * k, 8));
    s.x = Tensor({ds.T, ds.H, ds.W, C}, std::move(data));
    ds.samples.push_back(std::move(s));
  }
  Fnv1a h;
  h.update(r.consumed());
  const auto stored = r.take(8, "checksum");
  if (r.remaining() != 0) {
    throw FormatError(FormatError::Kind::kMalformedRecord, fmt::format("{} trailing bytes after checksum", r.remaining()));
  }
  if (read_u64_le(stored) != h.digest()) {
    throw FormatError(FormatError::Kind::kChecksumMismatch, fmt::format("checksum mismatch in {}", path.string()));
  }
  return ds;
}

}  // namespace mtms
