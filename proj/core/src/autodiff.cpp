// SPDX-License-Identifier: Apache-2.0
#include "mtms/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mtms/error.hpp"

namespace mtms::ad {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::record(std::span<const Var> inputs, Forward forward, Backward backward) {
  Node n;
  n.value = forward(*this);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return requires_grad(v); });
  n.forward = std::move(forward);
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw ShapeError(fmt::format("backward() needs a one-element loss, got {}", to_string(value(loss).shape())));
  }
  zero_grad();
  if (!requires_grad(loss)) return;
  nodes_[loss.id()].grad = Tensor(value(loss).shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, n.value, n.grad);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad = Tensor();
}

void Tape::set_value(Var leaf, Tensor value) {
  Node& n = nodes_[leaf.id()];
  if (n.forward) throw InvalidArgument("set_value() is only allowed on leaf nodes");
  if (value.shape() != n.value.shape()) {
    throw ShapeError(fmt::format("set_value() shape {} differs from leaf {}", to_string(value.shape()),
                                 to_string(n.value.shape())));
  }
  n.value = std::move(value);
}

void Tape::replay() {
  for (auto& n : nodes_) {
    if (n.forward) n.value = n.forward(*this);
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape {} vs {}", op, to_string(a.shape()), to_string(b.shape())));
  }
}

// grad(v) += s * g
void accumulate(Tape& t, Var v, const Tensor& g, double s = 1.0) {
  if (!t.requires_grad(v)) return;
  Tensor& buf = t.grad_buffer(v);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += s * g[i];
}

Var record1(Var x, Tape::Forward f, Tape::Backward b) {
  const Var in[] = {x};
  return x.tape().record(in, std::move(f), std::move(b));
}

Var record2(Var x, Var y, Tape::Forward f, Tape::Backward b) {
  const Var in[] = {x, y};
  return x.tape().record(in, std::move(f), std::move(b));
}

std::size_t leading(const Tensor& t) { return t.dim(0); }
std::size_t trailing(const Tensor& t) { return t.size() / t.dim(0); }

Shape with_leading(const Shape& s, std::size_t n) {
  Shape out = s;
  out[0] = n;
  return out;
}

Var gather_channels(Var x, std::vector<std::size_t> src, const char* op) {
  const std::size_t c = leading(x.value());
  for (auto s : src) {
    if (s >= c) throw ShapeError(fmt::format("{}: channel {} out of range for {} channels", op, s, c));
  }
  if (src.empty()) throw ShapeError(fmt::format("{}: no channels selected", op));
  return record1(
      x,
      [x, src](const Tape& t) {
        const Tensor& v = t.value(x);
        const std::size_t n = trailing(v);
        Tensor out(with_leading(v.shape(), src.size()));
        for (std::size_t c = 0; c < src.size(); ++c) {
          std::copy_n(v.data().begin() + src[c] * n, n, out.data().begin() + c * n);
        }
        return out;
      },
      [x, src](Tape& t, const Tensor&, const Tensor& g) {
        if (!t.requires_grad(x)) return;
        Tensor& gx = t.grad_buffer(x);
        const std::size_t n = trailing(gx);
        for (std::size_t c = 0; c < src.size(); ++c) {
          for (std::size_t i = 0; i < n; ++i) gx[src[c] * n + i] += g[c * n + i];
        }
      });
}

}  // namespace

Var add(Var a, Var b) {
  return record2(
      a, b,
      [a, b](const Tape& t) {
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(b);
        require_same_shape(x, y, "add");
        Tensor out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
        return out;
      },
      [a, b](Tape& t, const Tensor&, const Tensor& g) {
        accumulate(t, a, g);
        accumulate(t, b, g);
      });
}

Var sub(Var a, Var b) {
  return record2(
      a, b,
      [a, b](const Tape& t) {
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(b);
        require_same_shape(x, y, "sub");
        Tensor out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
        return out;
      },
      [a, b](Tape& t, const Tensor&, const Tensor& g) {
        accumulate(t, a, g);
        accumulate(t, b, g, -1.0);
      });
}

Var mul(Var a, Var b) {
  return record2(
      a, b,
      [a, b](const Tape& t) {
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(b);
        require_same_shape(x, y, "mul");
        Tensor out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
        return out;
      },
      [a, b](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(b);
        if (t.requires_grad(a)) {
          Tensor& ga = t.grad_buffer(a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        }
        if (t.requires_grad(b)) {
          Tensor& gb = t.grad_buffer(b);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
        }
      });
}

Var scale(Var a, double s) {
  return record1(
      a,
      [a, s](const Tape& t) {
        Tensor out = t.value(a);
        for (auto& v : out.data()) v *= s;
        return out;
      },
      [a, s](Tape& t, const Tensor&, const Tensor& g) { accumulate(t, a, g, s); });
}

Var add_constant(Var a, double c) {
  return record1(
      a,
      [a, c](const Tape& t) {
        Tensor out = t.value(a);
        for (auto& v : out.data()) v += c;
        return out;
      },
      [a](Tape& t, const Tensor&, const Tensor& g) { accumulate(t, a, g); });
}

Var activation(Var x, Activation kind) {
  return record1(
      x, [x, kind](const Tape& t) { return mtms::activation(t.value(x), kind); },
      [x, kind](Tape& t, const Tensor& y, const Tensor& g) {
        if (!t.requires_grad(x)) return;
        Tensor& gx = t.grad_buffer(x);
        switch (kind) {
          case Activation::kSigmoid:
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
            break;
          case Activation::kTanh:
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
            break;
          case Activation::kRelu: {
            const Tensor& in = t.value(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += in[i] > 0 ? g[i] : 0.0;
            break;
          }
          case Activation::kIdentity:
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            break;
        }
      });
}

Var conv2d(Var input, Var kernels, std::size_t padding, std::size_t dilation) {
  return record2(
      input, kernels,
      [=](const Tape& t) { return mtms::conv2d(t.value(input), t.value(kernels), padding, dilation); },
      [=](Tape& t, const Tensor&, const Tensor& g) {
        Tensor* gi = t.requires_grad(input) ? &t.grad_buffer(input) : nullptr;
        Tensor* gk = t.requires_grad(kernels) ? &t.grad_buffer(kernels) : nullptr;
        conv2d_backward(t.value(input), t.value(kernels), g, padding, dilation, gi, gk);
      });
}

Var add_channel_bias(Var x, Var bias) {
  return record2(
      x, bias,
      [x, bias](const Tape& t) {
        const Tensor& v = t.value(x);
        const Tensor& b = t.value(bias);
        if (b.rank() != 1 || b.size() != leading(v)) {
          throw ShapeError(fmt::format("add_channel_bias: bias {} for input {}", to_string(b.shape()),
                                       to_string(v.shape())));
        }
        Tensor out = v;
        const std::size_t n = trailing(v);
        for (std::size_t c = 0; c < b.size(); ++c) {
          for (std::size_t i = 0; i < n; ++i) out[c * n + i] += b[c];
        }
        return out;
      },
      [x, bias](Tape& t, const Tensor&, const Tensor& g) {
        accumulate(t, x, g);
        if (t.requires_grad(bias)) {
          Tensor& gb = t.grad_buffer(bias);
          const std::size_t n = trailing(g);
          for (std::size_t c = 0; c < gb.size(); ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += g[c * n + i];
            gb[c] += s;
          }
        }
      });
}

Var scale_channels(Var x, Var scales) {
  return record2(
      x, scales,
      [x, scales](const Tape& t) {
        const Tensor& v = t.value(x);
        const Tensor& s = t.value(scales);
        if (s.rank() != 1 || s.size() != leading(v)) {
          throw ShapeError(fmt::format("scale_channels: scales {} for input {}", to_string(s.shape()),
                                       to_string(v.shape())));
        }
        Tensor out = v;
        const std::size_t n = trailing(v);
        for (std::size_t c = 0; c < s.size(); ++c) {
          for (std::size_t i = 0; i < n; ++i) out[c * n + i] *= s[c];
        }
        return out;
      },
      [x, scales](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& v = t.value(x);
        const Tensor& s = t.value(scales);
        const std::size_t n = trailing(v);
        if (t.requires_grad(x)) {
          Tensor& gx = t.grad_buffer(x);
          for (std::size_t c = 0; c < s.size(); ++c) {
            for (std::size_t i = 0; i < n; ++i) gx[c * n + i] += g[c * n + i] * s[c];
          }
        }
        if (t.requires_grad(scales)) {
          Tensor& gs = t.grad_buffer(scales);
          for (std::size_t c = 0; c < s.size(); ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += g[c * n + i] * v[c * n + i];
            gs[c] += acc;
          }
        }
      });
}

Var global_avg_pool(Var x) {
  return record1(
      x, [x](const Tape& t) { return mtms::global_avg_pool(t.value(x)); },
      [x](Tape& t, const Tensor&, const Tensor& g) {
        if (!t.requires_grad(x)) return;
        Tensor& gx = t.grad_buffer(x);
        const std::size_t n = trailing(gx);
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t c = 0; c < g.size(); ++c) {
          for (std::size_t i = 0; i < n; ++i) gx[c * n + i] += g[c] * inv;
        }
      });
}

Var permute_channels(Var x, std::vector<std::size_t> source_of_output) {
  const std::size_t c = leading(x.value());
  std::vector<bool> seen(c, false);
  if (source_of_output.size() != c) throw ShapeError("permute_channels: permutation length differs from channels");
  for (auto s : source_of_output) {
    if (s >= c || seen[s]) throw InvalidArgument("permute_channels: not a permutation");
    seen[s] = true;
  }
  return gather_channels(x, std::move(source_of_output), "permute_channels");
}

Var select_channels(Var x, std::vector<std::size_t> channels) {
  return gather_channels(x, std::move(channels), "select_channels");
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  std::vector<Var> in(parts.begin(), parts.end());
  return in.front().tape().record(
      in,
      [in](const Tape& t) {
        const Tensor& first = t.value(in.front());
        std::size_t total = 0;
        for (auto v : in) {
          const Tensor& p = t.value(v);
          if (p.rank() != first.rank() ||
              !std::equal(p.shape().begin() + 1, p.shape().end(), first.shape().begin() + 1)) {
            throw ShapeError(fmt::format("concat_channels: {} vs {}", to_string(p.shape()), to_string(first.shape())));
          }
          total += leading(p);
        }
        Tensor out(with_leading(first.shape(), total));
        auto dst = out.data().begin();
        for (auto v : in) dst = std::copy(t.value(v).data().begin(), t.value(v).data().end(), dst);
        return out;
      },
      [in](Tape& t, const Tensor&, const Tensor& g) {
        std::size_t off = 0;
        for (auto v : in) {
          const std::size_t n = t.value(v).size();
          if (t.requires_grad(v)) {
            Tensor& gv = t.grad_buffer(v);
            for (std::size_t i = 0; i < n; ++i) gv[i] += g[off + i];
          }
          off += n;
        }
      });
}

Var matvec(Var matrix, Var vec) {
  return record2(
      matrix, vec,
      [matrix, vec](const Tape& t) {
        const Tensor& w = t.value(matrix);
        const Tensor& v = t.value(vec);
        if (w.rank() != 2 || v.rank() != 1 || w.dim(1) != v.size()) {
          throw ShapeError(fmt::format("matvec: {} x {}", to_string(w.shape()), to_string(v.shape())));
        }
        Tensor out({w.dim(0)});
        for (std::size_t i = 0; i < w.dim(0); ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < v.size(); ++j) s += w[i * v.size() + j] * v[j];
          out[i] = s;
        }
        return out;
      },
      [matrix, vec](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& w = t.value(matrix);
        const Tensor& v = t.value(vec);
        const std::size_t n = v.size();
        if (t.requires_grad(matrix)) {
          Tensor& gw = t.grad_buffer(matrix);
          for (std::size_t i = 0; i < g.size(); ++i) {
            for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += g[i] * v[j];
          }
        }
        if (t.requires_grad(vec)) {
          Tensor& gv = t.grad_buffer(vec);
          for (std::size_t i = 0; i < g.size(); ++i) {
            for (std::size_t j = 0; j < n; ++j) gv[j] += g[i] * w[i * n + j];
          }
        }
      });
}

Var softmax(Var v) {
  return record1(
      v,
      [v](const Tape& t) {
        const Tensor& x = t.value(v);
        if (x.rank() != 1) throw ShapeError("softmax expects a vector");
        const double m = *std::max_element(x.data().begin(), x.data().end());
        Tensor out = x;
        double z = 0.0;
        for (auto& e : out.data()) z += (e = std::exp(e - m));
        for (auto& e : out.data()) e /= z;
        return out;
      },
      [v](Tape& t, const Tensor& y, const Tensor& g) {
        if (!t.requires_grad(v)) return;
        double gy = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) gy += g[i] * y[i];
        Tensor& gv = t.grad_buffer(v);
        for (std::size_t i = 0; i < y.size(); ++i) gv[i] += y[i] * (g[i] - gy);
      });
}

Var log_sum_exp(Var v) {
  return record1(
      v,
      [v](const Tape& t) {
        const Tensor& x = t.value(v);
        const double m = *std::max_element(x.data().begin(), x.data().end());
        double z = 0.0;
        for (double e : x.data()) z += std::exp(e - m);
        return Tensor::scalar(m + std::log(z));
      },
      [v](Tape& t, const Tensor& out, const Tensor& g) {
        if (!t.requires_grad(v)) return;
        const Tensor& x = t.value(v);
        Tensor& gv = t.grad_buffer(v);
        for (std::size_t i = 0; i < x.size(); ++i) gv[i] += g[0] * std::exp(x[i] - out[0]);
      });
}

Var index(Var v, std::size_t i) {
  if (i >= v.value().size()) throw ShapeError(fmt::format("index {} out of range for {}", i, to_string(v.shape())));
  return record1(
      v, [v, i](const Tape& t) { return Tensor::scalar(t.value(v)[i]); },
      [v, i](Tape& t, const Tensor&, const Tensor& g) {
        if (t.requires_grad(v)) t.grad_buffer(v)[i] += g[0];
      });
}

Var stack(std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("stack: no inputs");
  std::vector<Var> in(scalars.begin(), scalars.end());
  for (auto s : in) {
    if (s.value().size() != 1) throw ShapeError("stack: inputs must be one-element tensors");
  }
  return in.front().tape().record(
      in,
      [in](const Tape& t) {
        Tensor out({in.size()});
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = t.value(in[i])[0];
        return out;
      },
      [in](Tape& t, const Tensor&, const Tensor& g) {
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (t.requires_grad(in[i])) t.grad_buffer(in[i])[0] += g[i];
        }
      });
}

Var mix(Var stacked, Var weights) {
  return record2(
      stacked, weights,
      [stacked, weights](const Tape& t) {
        const Tensor& s = t.value(stacked);
        const Tensor& w = t.value(weights);
        if (s.rank() < 2 || w.rank() != 1 || w.size() != leading(s)) {
          throw ShapeError(fmt::format("mix: stacked {} with weights {}", to_string(s.shape()), to_string(w.shape())));
        }
        const std::size_t n = trailing(s);
        Tensor out(Shape(s.shape().begin() + 1, s.shape().end()));
        for (std::size_t k = 0; k < w.size(); ++k) {
          for (std::size_t i = 0; i < n; ++i) out[i] += w[k] * s[k * n + i];
        }
        return out;
      },
      [stacked, weights](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& s = t.value(stacked);
        const Tensor& w = t.value(weights);
        const std::size_t n = trailing(s);
        if (t.requires_grad(stacked)) {
          Tensor& gs = t.grad_buffer(stacked);
          for (std::size_t k = 0; k < w.size(); ++k) {
            for (std::size_t i = 0; i < n; ++i) gs[k * n + i] += w[k] * g[i];
          }
        }
        if (t.requires_grad(weights)) {
          Tensor& gw = t.grad_buffer(weights);
          for (std::size_t k = 0; k < w.size(); ++k) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += g[i] * s[k * n + i];
            gw[k] += acc;
          }
        }
      });
}

Var weighted_sum(std::span<const Var> parts, Var weights) {
  if (parts.empty()) throw ShapeError("weighted_sum: no inputs");
  std::vector<Var> in(parts.begin(), parts.end());
  std::vector<Var> deps = in;
  deps.push_back(weights);
  return weights.tape().record(
      deps,
      [in, weights](const Tape& t) {
        const Tensor& w = t.value(weights);
        if (w.rank() != 1 || w.size() != in.size()) {
          throw ShapeError(fmt::format("weighted_sum: {} parts with weights {}", in.size(), to_string(w.shape())));
        }
        Tensor out(t.value(in.front()).shape());
        for (std::size_t k = 0; k < in.size(); ++k) {
          const Tensor& p = t.value(in[k]);
          require_same_shape(p, out, "weighted_sum");
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * p[i];
        }
        return out;
      },
      [in, weights](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& w = t.value(weights);
        for (std::size_t k = 0; k < in.size(); ++k) accumulate(t, in[k], g, w[k]);
        if (t.requires_grad(weights)) {
          Tensor& gw = t.grad_buffer(weights);
          for (std::size_t k = 0; k < in.size(); ++k) {
            const Tensor& p = t.value(in[k]);
            double acc = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) acc += g[i] * p[i];
            gw[k] += acc;
          }
        }
      });
}

Var sum(Var x) {
  return record1(
      x,
      [x](const Tape& t) {
        double s = 0.0;
        for (double v : t.value(x).data()) s += v;
        return Tensor::scalar(s);
      },
      [x](Tape& t, const Tensor&, const Tensor& g) {
        if (!t.requires_grad(x)) return;
        for (auto& v : t.grad_buffer(x).data()) v += g[0];
      });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var sum_squares(Var x) {
  return record1(
      x,
      [x](const Tape& t) {
        double s = 0.0;
        for (double v : t.value(x).data()) s += v * v;
        return Tensor::scalar(s);
      },
      [x](Tape& t, const Tensor&, const Tensor& g) {
        if (!t.requires_grad(x)) return;
        const Tensor& v = t.value(x);
        Tensor& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < v.size(); ++i) gx[i] += 2.0 * g[0] * v[i];
      });
}

Var l2_norm(Var x) {
  return record1(
      x,
      [x](const Tape& t) {
        double s = 0.0;
        for (double v : t.value(x).data()) s += v * v;
        return Tensor::scalar(std::sqrt(s));
      },
      [x](Tape& t, const Tensor& out, const Tensor& g) {
        if (!t.requires_grad(x) || out[0] == 0.0) return;
        accumulate(t, x, t.value(x), g[0] / out[0]);
      });
}

Var mse(Var a, Var b) {
  return record2(
      a, b,
      [a, b](const Tape& t) {
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(b);
        require_same_shape(x, y, "mse");
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
        return Tensor::scalar(s / static_cast<double>(x.size()));
      },
      [a, b](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(b);
        const double c = 2.0 * g[0] / static_cast<double>(x.size());
        if (t.requires_grad(a)) {
          Tensor& ga = t.grad_buffer(a);
          for (std::size_t i = 0; i < x.size(); ++i) ga[i] += c * (x[i] - y[i]);
        }
        if (t.requires_grad(b)) {
          Tensor& gb = t.grad_buffer(b);
          for (std::size_t i = 0; i < x.size(); ++i) gb[i] -= c * (x[i] - y[i]);
        }
      });
}

Var cosine_similarity(Var u, Var v) {
  return record2(
      u, v, [u, v](const Tape& t) { return Tensor::scalar(mtms::cosine_similarity(t.value(u), t.value(v))); },
      [u, v](Tape& t, const Tensor& out, const Tensor& g) {
        const Tensor& a = t.value(u);
        const Tensor& b = t.value(v);
        double na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          na += a[i] * a[i];
          nb += b[i] * b[i];
        }
        const double c = out[0];
        const double inv = 1.0 / std::sqrt(na * nb);
        if (t.requires_grad(u)) {
          Tensor& ga = t.grad_buffer(u);
          for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[0] * (b[i] * inv - c * a[i] / na);
        }
        if (t.requires_grad(v)) {
          Tensor& gb = t.grad_buffer(v);
          for (std::size_t i = 0; i < b.size(); ++i) gb[i] += g[0] * (a[i] * inv - c * b[i] / nb);
        }
      });
}

}  // namespace mtms::ad
