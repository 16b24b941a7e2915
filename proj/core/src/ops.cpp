// SPDX-License-Identifier: Apache-2.0
#include "mtms/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mtms/error.hpp"

namespace mtms {

double apply_activation(double x, Activation kind) {
  switch (kind) {
    case Activation::kSigmoid:
      // Split on sign so exp() never overflows.
      if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
      {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kRelu:
      return x > 0 ? x : 0.0;
    case Activation::kIdentity:
      return x;
  }
  return x;
}

namespace {

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, k, h_out, w_out;
  std::ptrdiff_t pad, dil;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels, std::size_t padding,
                           std::size_t dilation) {
  if (input.rank() != 3) {
    throw ShapeError(fmt::format("conv2d input must be [C,H,W], got {}", to_string(input.shape())));
  }
  if (kernels.rank() != 4) {
    throw ShapeError(fmt::format("conv2d kernels must be [C_out,C_in,k,k], got {}", to_string(kernels.shape())));
  }
  if (kernels.dim(1) != input.dim(0)) {
    throw ShapeError(fmt::format("conv2d channel mismatch: input {} has {} channels, kernels {} expect {}",
                                 to_string(input.shape()), input.dim(0), to_string(kernels.shape()),
                                 kernels.dim(1)));
  }
  if (kernels.dim(2) != kernels.dim(3) || kernels.dim(2) % 2 == 0) {
    throw ShapeError(fmt::format("conv2d kernels must be square with odd size, got {}", to_string(kernels.shape())));
  }
  if (dilation == 0) throw InvalidArgument("conv2d dilation must be >= 1");
  ConvGeometry g{};
  g.c_in = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.c_out = kernels.dim(0);
  g.k = kernels.dim(2);
  g.pad = static_cast<std::ptrdiff_t>(padding);
  g.dil = static_cast<std::ptrdiff_t>(dilation);
  const auto span = static_cast<std::ptrdiff_t>(dilation * (g.k - 1));
  const auto h_out = static_cast<std::ptrdiff_t>(g.h) + 2 * g.pad - span;
  const auto w_out = static_cast<std::ptrdiff_t>(g.w) + 2 * g.pad - span;
  if (h_out < 1 || w_out < 1) {
    throw ShapeError(fmt::format("conv2d output would be empty for input {} kernel {} padding {}",
                                 to_string(input.shape()), g.k, padding));
  }
  g.h_out = static_cast<std::size_t>(h_out);
  g.w_out = static_cast<std::size_t>(w_out);
  return g;
}

// Output rows/cols whose tap at `offset` lands inside [0, extent).
struct Range {
  std::size_t lo, hi;
};

Range valid_range(std::ptrdiff_t offset, std::size_t extent, std::size_t out_extent) {
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -offset);
  const std::ptrdiff_t hi =
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_extent), static_cast<std::ptrdiff_t>(extent) - offset);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t padding, std::size_t dilation) {
  const auto g = conv_geometry(input, kernels, padding, dilation);
  Tensor out({g.c_out, g.h_out, g.w_out});
  const double* in = input.data().data();
  const double* kw = kernels.data().data();
  double* o = out.data().data();
  for (std::size_t co = 0; co < g.c_out; ++co) {
    double* oc = o + co * g.h_out * g.w_out;
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      const double* ic = in + ci * g.h * g.w;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const std::ptrdiff_t oy_off = static_cast<std::ptrdiff_t>(ky) * g.dil - g.pad;
        const Range ry = valid_range(oy_off, g.h, g.h_out);
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const double wv = kw[((co * g.c_in + ci) * g.k + ky) * g.k + kx];
          if (wv == 0.0) continue;
          const std::ptrdiff_t ox_off = static_cast<std::ptrdiff_t>(kx) * g.dil - g.pad;
          const Range rx = valid_range(ox_off, g.w, g.w_out);
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const double* irow = ic + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oy) + oy_off) * g.w;
            double* orow = oc + oy * g.w_out;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              orow[ox] += wv * irow[static_cast<std::ptrdiff_t>(ox) + ox_off];
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                     std::size_t padding, std::size_t dilation, Tensor* grad_input, Tensor* grad_kernels) {
  const auto g = conv_geometry(input, kernels, padding, dilation);
  if (grad_output.shape() != Shape{g.c_out, g.h_out, g.w_out}) {
    throw ShapeError(fmt::format("conv2d_backward grad shape {} does not match output", to_string(grad_output.shape())));
  }
  if (grad_input && grad_input->shape() != input.shape()) *grad_input = Tensor(input.shape());
  if (grad_kernels && grad_kernels->shape() != kernels.shape()) *grad_kernels = Tensor(kernels.shape());
  const double* in = input.data().data();
  const double* kw = kernels.data().data();
  const double* go = grad_output.data().data();
  double* gi = grad_input ? grad_input->data().data() : nullptr;
  double* gk = grad_kernels ? grad_kernels->data().data() : nullptr;
  for (std::size_t co = 0; co < g.c_out; ++co) {
    const double* goc = go + co * g.h_out * g.w_out;
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      const double* ic = in + ci * g.h * g.w;
      double* gic = gi ? gi + ci * g.h * g.w : nullptr;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const std::ptrdiff_t oy_off = static_cast<std::ptrdiff_t>(ky) * g.dil - g.pad;
        const Range ry = valid_range(oy_off, g.h, g.h_out);
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const std::size_t kidx = ((co * g.c_in + ci) * g.k + ky) * g.k + kx;
          const double wv = kw[kidx];
          const std::ptrdiff_t ox_off = static_cast<std::ptrdiff_t>(kx) * g.dil - g.pad;
          const Range rx = valid_range(ox_off, g.w, g.w_out);
          double acc = 0.0;
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t iy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oy) + oy_off);
            const double* irow = ic + iy * g.w;
            const double* grow = goc + oy * g.w_out;
            double* girow = gic ? gic + iy * g.w : nullptr;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              const std::size_t ix = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(ox) + ox_off);
              acc += grow[ox] * irow[ix];
              if (girow) girow[ix] += wv * grow[ox];
            }
          }
          if (gk) gk[kidx] += acc;
        }
      }
    }
  }
}

Tensor global_avg_pool(const Tensor& input) {
  if (input.rank() != 3) {
    throw ShapeError(fmt::format("global_avg_pool expects [C,H,W], got {}", to_string(input.shape())));
  }
  const std::size_t c = input.dim(0);
  const std::size_t hw = input.dim(1) * input.dim(2);
  Tensor out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto plane = input.data().subspan(ch * hw, hw);
    out[ch] = std::accumulate(plane.begin(), plane.end(), 0.0) / static_cast<double>(hw);
  }
  return out;
}

Tensor activation(const Tensor& x, Activation kind) {
  Tensor out = x;
  for (auto& v : out.data()) v = apply_activation(v, kind);
  return out;
}

double cosine_similarity(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size() || u.rank() != 1 || v.rank() != 1) {
    throw ShapeError(fmt::format("cosine_similarity needs equal-length vectors, got {} and {}",
                                 to_string(u.shape()), to_string(v.shape())));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw DomainError("cosine_similarity of a zero-norm vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

std::vector<std::size_t> shuffle_permutation(std::size_t channels, std::size_t groups) {
  if (groups == 0 || channels % groups != 0) {
    throw InvalidArgument(fmt::format("channel shuffle: {} groups do not divide {} channels", groups, channels));
  }
  const std::size_t per_group = channels / groups;
  std::vector<std::size_t> perm(channels);
  // Output position j*groups + i takes channel i*per_group + j.
  for (std::size_t i = 0; i < groups; ++i) {
    for (std::size_t j = 0; j < per_group; ++j) perm[j * groups + i] = i * per_group + j;
  }
  return perm;
}

}  // namespace mtms
