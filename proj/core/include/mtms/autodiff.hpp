// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mtms/ops.hpp"
#include "mtms/tensor.hpp"

namespace mtms::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of primitive applications.
///
/// Every node keeps its forward rule, so the whole computation can be replayed after leaf values
/// change (used by finite-difference checks). backward() walks the record in reverse and accumulates
/// d(loss)/d(node) into every node that depends on a parameter leaf. Single-threaded.
class Tape {
 public:
  using Forward = std::function<Tensor(const Tape&)>;
  using Backward = std::function<void(Tape&, const Tensor& out, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives gradients.
  Var parameter(Tensor value);
  /// Leaf that never receives gradients.
  Var constant(Tensor value);

  /// Appends a derived node. `backward` may be empty for non-differentiable outputs.
  Var record(std::span<const Var> inputs, Forward forward, Backward backward);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node. `loss` must hold one element.
  void backward(Var loss);

  /// Accumulated gradient; exactly zero for nodes the loss does not depend on.
  Tensor grad(Var v) const;

  /// Mutable gradient storage for op implementations, allocated on first use.
  Tensor& grad_buffer(Var v);

  /// Drops all gradients so backward() can run again.
  void zero_grad();

  /// Overwrites a leaf value. Call replay() afterwards to refresh derived nodes.
  void set_value(Var leaf, Tensor value);
  /// Recomputes every derived node in recording order.
  void replay();

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Forward forward;
    Backward backward;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

// Elementwise, same shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_constant(Var a, double c);
Var activation(Var x, Activation kind);
inline Var sigmoid(Var x) { return activation(x, Activation::kSigmoid); }
inline Var tanh(Var x) { return activation(x, Activation::kTanh); }
inline Var relu(Var x) { return activation(x, Activation::kRelu); }

// Channel-structured ops over [C,...] tensors.
Var conv2d(Var input, Var kernels, std::size_t padding, std::size_t dilation = 1);
Var add_channel_bias(Var x, Var bias);           // x[C,...] + bias[C]
Var scale_channels(Var x, Var scales);           // x[C,...] * s[C]
Var global_avg_pool(Var x);                      // [C,H,W] -> [C]
Var permute_channels(Var x, std::vector<std::size_t> source_of_output);
Var select_channels(Var x, std::vector<std::size_t> channels);
Var concat_channels(std::span<const Var> parts);  // along axis 0

// Vector/matrix ops.
Var matvec(Var matrix, Var vec);  // [m,n] x [n] -> [m]
Var softmax(Var v);
Var log_sum_exp(Var v);           // [n] -> [1]
Var index(Var v, std::size_t i);  // -> [1]
Var stack(std::span<const Var> scalars);

/// sum_k weights[k] * stacked[k]; stacked has leading axis K.
Var mix(Var stacked, Var weights);
/// sum_k weights[k] * parts[k]; all parts share one shape.
Var weighted_sum(std::span<const Var> parts, Var weights);

// Reductions to a single element.
Var sum(Var x);
Var mean(Var x);
Var sum_squares(Var x);
Var l2_norm(Var x);
Var mse(Var a, Var b);
Var cosine_similarity(Var u, Var v);

/// Packs a parameter struct's tensors onto a tape. `P` is a template over the field type with a
/// static `visit(f, self, others...)` listing its fields.
template <template <class> class P>
P<Var> bind(Tape& tape, const P<Tensor>& params, bool trainable) {
  P<Var> out;
  P<Tensor>::visit(
      [&](std::string_view, const Tensor& t, Var& v) { v = trainable ? tape.parameter(t) : tape.constant(t); },
      params, out);
  return out;
}

/// Plain gradient step on every bound tensor: p -= lr * dL/dp.
template <template <class> class P>
void sgd_step(P<Tensor>& params, const P<Var>& bound, const Tape& tape, double lr) {
  P<Tensor>::visit(
      [&](std::string_view, Tensor& t, const Var& v) {
        const Tensor g = tape.grad(v);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] -= lr * g[i];
      },
      params, bound);
}

/// Euclidean norm of the gradient over every bound tensor.
template <template <class> class P>
double grad_norm(const P<Var>& bound, const Tape& tape) {
  double sq = 0.0;
  P<Var>::visit(
      [&](std::string_view, const Var& v) {
        const Tensor g = tape.grad(v);
        for (double x : g.data()) sq += x * x;
      },
      bound);
  return std::sqrt(sq);
}

/// SGD with the gradient rescaled to norm at most `max_norm` (no clipping when max_norm <= 0).
template <template <class> class P>
void clipped_sgd_step(P<Tensor>& params, const P<Var>& bound, const Tape& tape, double lr, double max_norm) {
  const double norm = grad_norm(bound, tape);
  const double factor = (max_norm > 0.0 && norm > max_norm) ? max_norm / norm : 1.0;
  sgd_step(params, bound, tape, lr * factor);
}

template <template <class> class P>
std::vector<Tensor> flatten(const P<Tensor>& params) {
  std::vector<Tensor> out;
  P<Tensor>::visit([&](std::string_view, const Tensor& t) { out.push_back(t); }, params);
  return out;
}

template <template <class> class P>
P<Var> unflatten(std::span<const Var> vars) {
  P<Var> out;
  std::size_t i = 0;
  P<Var>::visit([&](std::string_view, Var& v) { v = vars[i++]; }, out);
  return out;
}

}  // namespace mtms::ad
