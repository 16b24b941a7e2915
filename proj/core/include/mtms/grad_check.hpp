// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mtms/autodiff.hpp"

namespace mtms {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

/// Builds a one-element loss on `tape` from leaves bound to the checked inputs.
using ScalarGraph = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

/// Compares reverse-mode gradients of `f` against central differences for every coordinate of
/// every input. Error per coordinate is |analytic - numeric| / max(1, |numeric|).
/// eps must lie in [1e-7, 1e-3]; a non-finite loss or gradient raises NumericalError.
GradCheckReport grad_check(const ScalarGraph& f, std::span<const Tensor> inputs, double eps = 1e-5);

/// Single-input form.
double grad_check(const std::function<ad::Var(ad::Tape&, ad::Var)>& f, const Tensor& x, double eps = 1e-5);

}  // namespace mtms
