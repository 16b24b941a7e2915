// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "mtms/tensor.hpp"

namespace mtms {

enum class Activation { kSigmoid, kTanh, kRelu, kIdentity };

double apply_activation(double x, Activation kind);

/// Cross-correlation with zero padding.
/// input [C_in,H,W], kernels [C_out,C_in,k,k] with k odd; output [C_out,H',W'],
/// H' = H + 2*padding - dilation*(k-1).
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t padding, std::size_t dilation = 1);

/// Gradients of conv2d. Either output pointer may be null.
void conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                     std::size_t padding, std::size_t dilation, Tensor* grad_input,
                     Tensor* grad_kernels);

/// Per-channel spatial mean: [C,H,W] -> [C].
Tensor global_avg_pool(const Tensor& input);

Tensor activation(const Tensor& x, Activation kind);

/// dot(u,v) / (|u| |v|). Throws DomainError on a zero-norm argument.
double cosine_similarity(const Tensor& u, const Tensor& v);

/// Channel permutation g groups -> reshape [g, C/g], transpose, flatten.
/// Returned vector maps output channel -> source channel.
std::vector<std::size_t> shuffle_permutation(std::size_t channels, std::size_t groups);

}  // namespace mtms
