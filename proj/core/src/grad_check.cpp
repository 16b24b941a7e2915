// SPDX-License-Identifier: Apache-2.0
#include "mtms/grad_check.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mtms/error.hpp"

namespace mtms {

namespace {

double loss_value(const ad::Tape& tape, ad::Var loss) {
  const double v = tape.value(loss).item();
  if (!std::isfinite(v)) throw NumericalError("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const ScalarGraph& f, std::span<const Tensor> inputs, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw InvalidArgument(fmt::format("grad_check: eps {} outside [1e-7, 1e-3]", eps));
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(tape.parameter(t));
  const ad::Var loss = f(tape, leaves);
  loss_value(tape, loss);
  tape.backward(loss);

  std::vector<Tensor> analytic;
  analytic.reserve(leaves.size());
  for (auto v : leaves) {
    analytic.push_back(tape.grad(v));
    if (!all_finite(analytic.back())) throw NumericalError("grad_check: analytic gradient is not finite");
  }

  // Central differences use forward replays only, never the backward rules.
  GradCheckReport report;
  for (std::size_t p = 0; p < leaves.size(); ++p) {
    Tensor probe = inputs[p];
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const double orig = probe[i];
      probe[i] = orig + eps;
      tape.set_value(leaves[p], probe);
      tape.replay();
      const double up = loss_value(tape, loss);
      probe[i] = orig - eps;
      tape.set_value(leaves[p], probe);
      tape.replay();
      const double down = loss_value(tape, loss);
      probe[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[p][i] - numeric) / std::max(1.0, std::abs(numeric));
      if (err > report.max_rel_error) report = {err, p, i};
    }
    tape.set_value(leaves[p], probe);
  }
  tape.replay();
  return report;
}

double grad_check(const std::function<ad::Var(ad::Tape&, ad::Var)>& f, const Tensor& x, double eps) {
  const Tensor in[] = {x};
  return grad_check([&](ad::Tape& t, std::span<const ad::Var> v) { return f(t, v[0]); }, in, eps).max_rel_error;
}

}  // namespace mtms
