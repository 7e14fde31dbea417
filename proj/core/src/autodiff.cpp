/* Copyright 2026 The SBNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "sbnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sbnn/tensor_ops.hpp"

namespace sbnn {

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || v.id() >= nodes_.size())
    throw ContractViolation("variable does not belong to this tape");
  return nodes_[v.id()];
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id() >= nodes_.size())
    throw ContractViolation("variable does not belong to this tape");
  return nodes_[v.id()];
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  consumed_ = false;
  return Var(nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  return leaf_with_sink(param.value, [&param](const Tensor& g) {
    for (std::size_t i = 0; i < g.size(); ++i) param.grad[i] += g[i];
  });
}

Var Tape::leaf_with_sink(Tensor value, std::function<void(const Tensor&)> sink) {
  nodes_.push_back(Node{std::move(value), {}, true, false,
                        [sink = std::move(sink)](Tape&, const Tensor& g) {
                          sink(g);
                        }});
  consumed_ = false;
  return Var(nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  bool needs = false;
  for (Var v : inputs) needs = needs || node(v).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, false,
                        needs ? std::move(backward) : BackwardFn{}});
  consumed_ = false;
  return Var(nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::accumulate(Var v, const Tensor& g) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (g.size() != n.value.size())
    throw ContractViolation("gradient shape " + g.shape().str() +
                            " does not match value " + n.value.shape().str());
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), std::vector<real>(g.values().begin(),
                                                       g.values().end()));
    n.has_grad = true;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

void Tape::backward(Var loss) {
  if (consumed_)
    throw ContractViolation(
        "backward() called twice without recording a new forward pass");
  Node& root = node(loss);
  if (root.value.size() != 1)
    throw ContractViolation("backward() needs a scalar loss");
  consumed_ = true;
  if (!root.requires_grad) return;
  root.grad = Tensor(root.value.shape(), real{1});
  root.has_grad = true;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

void Tape::clear() {
  nodes_.clear();
  consumed_ = false;
}

namespace ops {

Var conv2d(Tape& tape, Var x, Var w, int stride, int pad) {
  Tensor y = kernels::conv2d_fp(tape.value(x), tape.value(w), nullptr, stride,
                                pad);
  const Var in[] = {x, w};
  return tape.record(std::move(y), in,
                     [x, w, stride, pad](Tape& t, const Tensor& g) {
                       auto grads = kernels::conv2d_fp_backward(
                           t.value(x), t.value(w), g, stride, pad,
                           t.requires_grad(x), t.requires_grad(w), false);
                       if (t.requires_grad(x)) t.accumulate(x, grads.input);
                       if (t.requires_grad(w)) t.accumulate(w, grads.weight);
                     });
}

Var conv2d(Tape& tape, Var x, Var w, Var bias, int stride, int pad) {
  Tensor y = kernels::conv2d_fp(tape.value(x), tape.value(w),
                                &tape.value(bias), stride, pad);
  const Var in[] = {x, w, bias};
  return tape.record(std::move(y), in,
                     [x, w, bias, stride, pad](Tape& t, const Tensor& g) {
                       auto grads = kernels::conv2d_fp_backward(
                           t.value(x), t.value(w), g, stride, pad,
                           t.requires_grad(x), t.requires_grad(w),
                           t.requires_grad(bias));
                       if (t.requires_grad(x)) t.accumulate(x, grads.input);
                       if (t.requires_grad(w)) t.accumulate(w, grads.weight);
                       if (t.requires_grad(bias)) t.accumulate(bias, grads.bias);
                     });
}

Var linear(Tape& tape, Var x, Var w, Var bias) {
  const Tensor& xv = tape.value(x);
  Tensor y = kernels::linear(xv, tape.value(w), &tape.value(bias));
  const Var in[] = {x, w, bias};
  return tape.record(std::move(y), in, [x, w, bias](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(w);
    const int N = xv.dim(0), out = wv.dim(0), inf = wv.dim(1);
    if (t.requires_grad(x)) {
      Tensor gx(xv.shape());
      for (int n = 0; n < N; ++n)
        for (int o = 0; o < out; ++o) {
          const real go = g[static_cast<std::size_t>(n) * out + o];
          for (int i = 0; i < inf; ++i)
            gx[static_cast<std::size_t>(n) * inf + i] +=
                go * wv[static_cast<std::size_t>(o) * inf + i];
        }
      t.accumulate(x, gx);
    }
    if (t.requires_grad(w)) {
      Tensor gw(wv.shape());
      for (int n = 0; n < N; ++n)
        for (int o = 0; o < out; ++o) {
          const real go = g[static_cast<std::size_t>(n) * out + o];
          for (int i = 0; i < inf; ++i)
            gw[static_cast<std::size_t>(o) * inf + i] +=
                go * xv[static_cast<std::size_t>(n) * inf + i];
        }
      t.accumulate(w, gw);
    }
    if (t.requires_grad(bias)) {
      Tensor gb(Shape{out});
      for (int n = 0; n < N; ++n)
        for (int o = 0; o < out; ++o)
          gb[static_cast<std::size_t>(o)] += g[static_cast<std::size_t>(n) * out + o];
      t.accumulate(bias, gb);
    }
  });
}

namespace {

template <typename Mask>
Var masked_unary(Tape& tape, Var x, Tensor y, Mask pass) {
  const Var in[] = {x};
  return tape.record(std::move(y), in, [x, pass](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    Tensor gx(xv.shape());
    for (std::size_t i = 0; i < g.size(); ++i)
      gx[i] = pass(xv[i]) ? g[i] : real{0};
    t.accumulate(x, gx);
  });
}

}  // namespace

Var relu(Tape& tape, Var x) {
  return masked_unary(tape, x, kernels::relu(tape.value(x)),
                      [](real v) { return v > 0; });
}

Var hardtanh(Tape& tape, Var x) {
  return masked_unary(tape, x, kernels::hardtanh(tape.value(x)),
                      [](real v) { return v > -1 && v < 1; });
}

Var sign_ste(Tape& tape, Var x) {
  return masked_unary(tape, x, kernels::sign(tape.value(x)),
                      [](real v) { return v > -1 && v < 1; });
}

Var avg_pool(Tape& tape, Var x, int k, int stride, int pad) {
  Tensor y = kernels::avg_pool(tape.value(x), k, stride, pad);
  const Var in[] = {x};
  return tape.record(std::move(y), in, [x, k, stride, pad](Tape& t,
                                                          const Tensor& g) {
    const Tensor& xv = t.value(x);
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const int Ho = g.dim(2), Wo = g.dim(3);
    const real inv = real{1} / (k * k);
    Tensor gx(xv.shape());
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox) {
            const real go = g.at(n, c, oy, ox) * inv;
            for (int ky = 0; ky < k; ++ky) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= W) continue;
                gx.at(n, c, iy, ix) += go;
              }
            }
          }
    t.accumulate(x, gx);
  });
}

Var max_pool(Tape& tape, Var x, int k, int stride, int pad) {
  std::vector<std::size_t> argmax;
  Tensor y = kernels::max_pool(tape.value(x), k, stride, pad, &argmax);
  const Var in[] = {x};
  return tape.record(std::move(y), in,
                     [x, argmax = std::move(argmax)](Tape& t, const Tensor& g) {
                       Tensor gx(t.value(x).shape());
                       for (std::size_t i = 0; i < g.size(); ++i)
                         gx[argmax[i]] += g[i];
                       t.accumulate(x, gx);
                     });
}

Var global_avg_pool(Tape& tape, Var x) {
  Tensor y = kernels::global_avg_pool(tape.value(x));
  const Var in[] = {x};
  return tape.record(std::move(y), in, [x](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    const std::size_t plane = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
    Tensor gx(xv.shape());
    for (std::size_t nc = 0; nc < g.size(); ++nc)
      for (std::size_t i = 0; i < plane; ++i)
        gx[nc * plane + i] = g[nc] / static_cast<real>(plane);
    t.accumulate(x, gx);
  });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (av.shape() != bv.shape())
    throw ContractViolation("add: shape " + av.shape().str() + " vs " +
                            bv.shape().str());
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  const Var in[] = {a, b};
  return tape.record(std::move(y), in, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var scale_channels(Tape& tape, Var x, std::vector<real> scale) {
  Tensor y = kernels::scale_channels(tape.value(x), scale);
  const Var in[] = {x};
  return tape.record(std::move(y), in,
                     [x, scale = std::move(scale)](Tape& t, const Tensor& g) {
                       t.accumulate(x, kernels::scale_channels(g, scale));
                     });
}

Var shortcut_pad(Tape& tape, Var x, int c_out, int stride) {
  Tensor y = kernels::shortcut_pad(tape.value(x), c_out, stride);
  const Var in[] = {x};
  return tape.record(std::move(y), in, [x, c_out, stride](Tape& t,
                                                         const Tensor& g) {
    const Tensor& xv = t.value(x);
    const int N = xv.dim(0), C = xv.dim(1);
    const int Ho = g.dim(2), Wo = g.dim(3);
    const int front = (c_out - C) / 2;
    Tensor gx(xv.shape());
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox)
            gx.at(n, c, oy * stride, ox * stride) = g.at(n, c + front, oy, ox);
    t.accumulate(x, gx);
  });
}

BatchNormState::BatchNormState(int channels, const std::string& name)
    : gamma(name + ".gamma", Tensor(Shape{channels}, real{1}), false),
      beta(name + ".beta", Tensor(Shape{channels}, real{0}), false),
      running_mean(static_cast<std::size_t>(channels), real{0}),
      running_var(static_cast<std::size_t>(channels), real{1}) {}

Var batch_norm(Tape& tape, Var x, BatchNormState& state, bool training) {
  // Register the parameters first: growing the tape moves node values.
  const Var gamma = tape.parameter(state.gamma);
  const Var beta = tape.parameter(state.beta);
  const Tensor& xv = tape.value(x);
  const int N = xv.dim(0), C = xv.dim(1);
  if (C != state.channels())
    throw ContractViolation("batch_norm: channel mismatch");
  const std::size_t plane = xv.size() / (static_cast<std::size_t>(N) * C);

  if (!training) {
    Tensor y = kernels::batch_norm_eval(xv, state.running_mean,
                                        state.running_var,
                                        state.gamma.value.values(),
                                        state.beta.value.values(), state.eps);
    const Var in[] = {x, gamma, beta};
    std::vector<real> inv(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c)
      inv[static_cast<std::size_t>(c)] =
          1 / std::sqrt(state.running_var[static_cast<std::size_t>(c)] +
                        state.eps);
    std::vector<real> mean = state.running_mean;
    return tape.record(std::move(y), in,
                       [x, gamma, beta, inv = std::move(inv),
                        mean = std::move(mean), plane](Tape& t,
                                                       const Tensor& g) {
                         const Tensor& xv = t.value(x);
                         const Tensor& gv = t.value(gamma);
                         const int N = xv.dim(0), C = xv.dim(1);
                         Tensor gx(xv.shape()), gg(Shape{C}), gb(Shape{C});
                         for (int n = 0; n < N; ++n)
                           for (int c = 0; c < C; ++c) {
                             const auto ci = static_cast<std::size_t>(c);
                             const std::size_t base =
                                 (static_cast<std::size_t>(n) * C + c) * plane;
                             for (std::size_t i = 0; i < plane; ++i) {
                               const real xh = (xv[base + i] - mean[ci]) * inv[ci];
                               gg[ci] += g[base + i] * xh;
                               gb[ci] += g[base + i];
                               gx[base + i] = g[base + i] * gv[ci] * inv[ci];
                             }
                           }
                         t.accumulate(x, gx);
                         t.accumulate(gamma, gg);
                         t.accumulate(beta, gb);
                       });
  }

  const real count = static_cast<real>(static_cast<std::size_t>(N) * plane);
  std::vector<real> mean(static_cast<std::size_t>(C)), inv(static_cast<std::size_t>(C));
  Tensor xhat(xv.shape());
  Tensor y(xv.shape());
  for (int c = 0; c < C; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    real s = 0;
    for (int n = 0; n < N; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) s += xv[base + i];
    }
    const real mu = s / count;
    real v = 0;
    for (int n = 0; n < N; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const real d = xv[base + i] - mu;
        v += d * d;
      }
    }
    v /= count;
    mean[ci] = mu;
    inv[ci] = 1 / std::sqrt(v + state.eps);
    state.running_mean[ci] =
        state.momentum * state.running_mean[ci] + (1 - state.momentum) * mu;
    state.running_var[ci] =
        state.momentum * state.running_var[ci] + (1 - state.momentum) * v;
    const real gm = state.gamma.value[ci], bt = state.beta.value[ci];
    for (int n = 0; n < N; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const real xh = (xv[base + i] - mu) * inv[ci];
        xhat[base + i] = xh;
        y[base + i] = xh * gm + bt;
      }
    }
  }

  const Var in[] = {x, gamma, beta};
  return tape.record(
      std::move(y), in,
      [x, gamma, beta, xhat = std::move(xhat), inv = std::move(inv), plane,
       count](Tape& t, const Tensor& g) {
        const Tensor& gv = t.value(gamma);
        const int N = xhat.dim(0), C = xhat.dim(1);
        Tensor gx(xhat.shape()), gg(Shape{C}), gb(Shape{C});
        for (int c = 0; c < C; ++c) {
          const auto ci = static_cast<std::size_t>(c);
          real sum_g = 0, sum_gx = 0;
          for (int n = 0; n < N; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += g[base + i];
              sum_gx += g[base + i] * xhat[base + i];
            }
          }
          gg[ci] = sum_gx;
          gb[ci] = sum_g;
          const real k = gv[ci] * inv[ci] / count;
          for (int n = 0; n < N; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i)
              gx[base + i] = k * (count * g[base + i] - sum_g -
                                  xhat[base + i] * sum_gx);
          }
        }
        t.accumulate(x, gx);
        t.accumulate(gamma, gg);
        t.accumulate(beta, gb);
      });
}

Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels) {
  const Tensor& z = tape.value(logits);
  if (z.rank() != 2 || z.dim(0) != static_cast<int>(labels.size()))
    throw ContractViolation("cross-entropy: logits " + z.shape().str() +
                            " vs " + std::to_string(labels.size()) + " labels");
  const int N = z.dim(0), K = z.dim(1);
  Tensor prob(z.shape());
  real loss = 0;
  for (int n = 0; n < N; ++n) {
    const real* row = z.data() + static_cast<std::size_t>(n) * K;
    const real mx = *std::max_element(row, row + K);
    real sum = 0;
    for (int k = 0; k < K; ++k) sum += std::exp(row[k] - mx);
    const real lse = mx + std::log(sum);
    const int y = labels[static_cast<std::size_t>(n)];
    if (y < 0 || y >= K) throw ContractViolation("label out of range");
    loss += lse - row[y];
    for (int k = 0; k < K; ++k)
      prob[static_cast<std::size_t>(n) * K + k] = std::exp(row[k] - lse);
  }
  loss /= N;
  std::vector<int> lab(labels.begin(), labels.end());
  const Var in[] = {logits};
  return tape.record(Tensor(Shape{1}, loss), in,
                     [logits, prob = std::move(prob), lab = std::move(lab)](
                         Tape& t, const Tensor& g) {
                       const int N = prob.dim(0), K = prob.dim(1);
                       Tensor gz = prob;
                       for (int n = 0; n < N; ++n)
                         gz[static_cast<std::size_t>(n) * K +
                            lab[static_cast<std::size_t>(n)]] -= 1;
                       const real s = g[0] / N;
                       for (std::size_t i = 0; i < gz.size(); ++i) gz[i] *= s;
                       t.accumulate(logits, gz);
                     });
}

}  // namespace ops
}  // namespace sbnn
