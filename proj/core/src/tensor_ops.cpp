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

#include "sbnn/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sbnn::kernels {
namespace {

void require_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank)
    throw ContractViolation(std::string(what) + ": expected rank " +
                            std::to_string(rank) + ", got " +
                            t.shape().str());
}

// Range of output columns ox for which ox*stride - pad + kx lies in [0, W).
struct ColumnRange {
  int lo;
  int hi;
};

ColumnRange valid_columns(int width, int out_width, int stride, int pad,
                          int kx) {
  // ix = ox*stride + (kx - pad) must satisfy 0 <= ix < width.
  const int off = kx - pad;
  int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  int hi = width - off <= 0 ? 0 : (width - off - 1) / stride + 1;
  hi = std::min(hi, out_width);
  lo = std::min(lo, hi);
  return {lo, hi};
}

}  // namespace

int output_extent(int in, int k, int stride, int pad) {
  if (stride < 1) throw ContractViolation("stride must be >= 1");
  const int span = in + 2 * pad - k;
  if (span < 0)
    throw ContractViolation("kernel " + std::to_string(k) +
                            " larger than padded input " + std::to_string(in));
  return span / stride + 1;
}

namespace {

// Column matrix of one image: row r = (c, ky, kx), column p = (oy, ox);
// padded taps are 0.
void im2col(const real* img, int C, int H, int W, int K, int stride, int pad,
            int Ho, int Wo, std::vector<ColumnRange>& cols, real* out) {
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < K; ++ky)
      for (int kx = 0; kx < K; ++kx) {
        real* row = out + ((static_cast<std::size_t>(c) * K + ky) * K + kx) * P;
        const auto [lo, hi] = cols[static_cast<std::size_t>(kx)];
        const int off = kx - pad;
        for (int oy = 0; oy < Ho; ++oy) {
          real* dst = row + static_cast<std::size_t>(oy) * Wo;
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + Wo, real{0});
            continue;
          }
          const real* src = img + (static_cast<std::size_t>(c) * H + iy) * W;
          std::fill(dst, dst + lo, real{0});
          for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * stride + off];
          std::fill(dst + hi, dst + Wo, real{0});
        }
      }
}

void col2im_add(const real* col, int C, int H, int W, int K, int stride,
                int pad, int Ho, int Wo, std::vector<ColumnRange>& cols,
                real* img) {
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo;
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < K; ++ky)
      for (int kx = 0; kx < K; ++kx) {
        const real* row =
            col + ((static_cast<std::size_t>(c) * K + ky) * K + kx) * P;
        const auto [lo, hi] = cols[static_cast<std::size_t>(kx)];
        const int off = kx - pad;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          const real* s = row + static_cast<std::size_t>(oy) * Wo;
          real* dst = img + (static_cast<std::size_t>(c) * H + iy) * W;
          for (int ox = lo; ox < hi; ++ox) dst[ox * stride + off] += s[ox];
        }
      }
}

std::vector<ColumnRange> column_ranges(int W, int Wo, int K, int stride,
                                       int pad) {
  std::vector<ColumnRange> cols(static_cast<std::size_t>(K));
  for (int kx = 0; kx < K; ++kx)
    cols[static_cast<std::size_t>(kx)] = valid_columns(W, Wo, stride, pad, kx);
  return cols;
}

}  // namespace

Tensor conv2d_fp(const Tensor& x, const Tensor& w, const Tensor* bias,
                 int stride, int pad) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), K = w.dim(2);
  if (w.dim(1) != C || w.dim(3) != K)
    throw ContractViolation("conv2d weight " + w.shape().str() +
                            " incompatible with input " + x.shape().str());
  if (bias && static_cast<int>(bias->size()) != O)
    throw ContractViolation("conv2d bias length mismatch");
  const int Ho = output_extent(H, K, stride, pad);
  const int Wo = output_extent(W, K, stride, pad);

  Tensor y(Shape{N, O, Ho, Wo});
  auto cols = column_ranges(W, Wo, K, stride, pad);
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo;
  const std::size_t R = static_cast<std::size_t>(C) * K * K;
  std::vector<real> col(R * P);
  for (int n = 0; n < N; ++n) {
    im2col(x.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, K,
           stride, pad, Ho, Wo, cols, col.data());
    real* out = y.data() + static_cast<std::size_t>(n) * O * P;
    int o = 0;
    // Four output channels at a time share each column row.
    for (; o + 4 <= O; o += 4) {
      real* y0 = out + static_cast<std::size_t>(o) * P;
      real* y1 = y0 + P;
      real* y2 = y1 + P;
      real* y3 = y2 + P;
      const real* w0 = w.data() + static_cast<std::size_t>(o) * R;
      for (std::size_t r = 0; r < R; ++r) {
        const real a = w0[r], b = w0[R + r], c = w0[2 * R + r],
                   d = w0[3 * R + r];
        const real* cr = col.data() + r * P;
        for (std::size_t p = 0; p < P; ++p) {
          const real v = cr[p];
          y0[p] += a * v;
          y1[p] += b * v;
          y2[p] += c * v;
          y3[p] += d * v;
        }
      }
    }
    for (; o < O; ++o) {
      real* yo = out + static_cast<std::size_t>(o) * P;
      const real* wo = w.data() + static_cast<std::size_t>(o) * R;
      for (std::size_t r = 0; r < R; ++r) {
        const real wv = wo[r];
        const real* cr = col.data() + r * P;
        for (std::size_t p = 0; p < P; ++p) yo[p] += wv * cr[p];
      }
    }
    if (bias)
      for (o = 0; o < O; ++o) {
        real* yo = out + static_cast<std::size_t>(o) * P;
        for (std::size_t p = 0; p < P; ++p) yo[p] += (*bias)[o];
      }
  }
  return y;
}

Conv2dGrads conv2d_fp_backward(const Tensor& x, const Tensor& w,
                               const Tensor& grad_out, int stride, int pad,
                               bool want_input, bool want_weight,
                               bool want_bias) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), K = w.dim(2);
  const int Ho = grad_out.dim(2), Wo = grad_out.dim(3);
  Conv2dGrads g;
  if (want_input) g.input = Tensor(x.shape());
  if (want_weight) g.weight = Tensor(w.shape());
  if (want_bias) g.bias = Tensor(Shape{O});

  auto cols = column_ranges(W, Wo, K, stride, pad);
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo;
  const std::size_t R = static_cast<std::size_t>(C) * K * K;
  std::vector<real> col(R * P), gcol;
  if (want_input) gcol.resize(R * P);
  for (int n = 0; n < N; ++n) {
    const real* gy = grad_out.data() + static_cast<std::size_t>(n) * O * P;
    if (want_bias)
      for (int o = 0; o < O; ++o) {
        real acc = 0;
        for (std::size_t p = 0; p < P; ++p) acc += gy[o * P + p];
        g.bias[static_cast<std::size_t>(o)] += acc;
      }
    if (want_weight) {
      im2col(x.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, K,
             stride, pad, Ho, Wo, cols, col.data());
      int o = 0;
      for (; o + 4 <= O; o += 4) {
        const real* g0 = gy + static_cast<std::size_t>(o) * P;
        real* gw = g.weight.data() + static_cast<std::size_t>(o) * R;
        for (std::size_t r = 0; r < R; ++r) {
          const real* cr = col.data() + r * P;
          real a = 0, b = 0, c = 0, d = 0;
          for (std::size_t p = 0; p < P; ++p) {
            const real v = cr[p];
            a += g0[p] * v;
            b += g0[P + p] * v;
            c += g0[2 * P + p] * v;
            d += g0[3 * P + p] * v;
          }
          gw[r] += a;
          gw[R + r] += b;
          gw[2 * R + r] += c;
          gw[3 * R + r] += d;
        }
      }
      for (; o < O; ++o) {
        const real* go = gy + static_cast<std::size_t>(o) * P;
        real* gw = g.weight.data() + static_cast<std::size_t>(o) * R;
        for (std::size_t r = 0; r < R; ++r) {
          const real* cr = col.data() + r * P;
          real acc = 0;
          for (std::size_t p = 0; p < P; ++p) acc += go[p] * cr[p];
          gw[r] += acc;
        }
      }
    }
    if (want_input) {
      std::fill(gcol.begin(), gcol.end(), real{0});
      int o = 0;
      for (; o + 4 <= O; o += 4) {
        const real* g0 = gy + static_cast<std::size_t>(o) * P;
        const real* w0 = w.data() + static_cast<std::size_t>(o) * R;
        for (std::size_t r = 0; r < R; ++r) {
          const real a = w0[r], b = w0[R + r], c = w0[2 * R + r],
                     d = w0[3 * R + r];
          real* gr = gcol.data() + r * P;
          for (std::size_t p = 0; p < P; ++p)
            gr[p] += a * g0[p] + b * g0[P + p] + c * g0[2 * P + p] +
                     d * g0[3 * P + p];
        }
      }
      for (; o < O; ++o) {
        const real* go = gy + static_cast<std::size_t>(o) * P;
        const real* wo = w.data() + static_cast<std::size_t>(o) * R;
        for (std::size_t r = 0; r < R; ++r) {
          const real wv = wo[r];
          real* gr = gcol.data() + r * P;
          for (std::size_t p = 0; p < P; ++p) gr[p] += wv * go[p];
        }
      }
      col2im_add(gcol.data(), C, H, W, K, stride, pad, Ho, Wo, cols,
                 g.input.data() + static_cast<std::size_t>(n) * C * H * W);
    }
  }
  return g;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias) {
  require_rank(w, 2, "linear weight");
  const int N = x.dim(0);
  const int in = static_cast<int>(x.size() / static_cast<std::size_t>(N));
  const int out = w.dim(0);
  if (w.dim(1) != in)
    throw ContractViolation("linear weight " + w.shape().str() +
                            " incompatible with input " + x.shape().str());
  Tensor y(Shape{N, out});
  for (int n = 0; n < N; ++n) {
    const real* xi = x.data() + static_cast<std::size_t>(n) * in;
    for (int o = 0; o < out; ++o) {
      const real* wo = w.data() + static_cast<std::size_t>(o) * in;
      real acc = 0;
      for (int i = 0; i < in; ++i) acc += wo[i] * xi[i];
      if (bias) acc += (*bias)[static_cast<std::size_t>(o)];
      y[static_cast<std::size_t>(n) * out + o] = acc;
    }
  }
  return y;
}

Tensor batch_norm_eval(const Tensor& x, std::span<const real> mean,
                       std::span<const real> var, std::span<const real> gamma,
                       std::span<const real> beta, real eps) {
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t plane = x.size() / (static_cast<std::size_t>(N) * C);
  Tensor y(x.shape());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const real inv = 1 / std::sqrt(var[ci] + eps);
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        y[base + i] = (x[base + i] - mean[ci]) * inv * gamma[ci] + beta[ci];
    }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : real{0};
  return y;
}

Tensor hardtanh(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = std::clamp(x[i], real{-1}, real{1});
  return y;
}

Tensor sign(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= 0 ? real{1} : real{-1};
  return y;
}

Tensor avg_pool(const Tensor& x, int k, int stride, int pad) {
  require_rank(x, 4, "avg_pool input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = output_extent(H, k, stride, pad);
  const int Wo = output_extent(W, k, stride, pad);
  Tensor y(Shape{N, C, Ho, Wo});
  const real inv = real{1} / (k * k);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          real acc = 0;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= W) continue;
              acc += x.at(n, c, iy, ix);
            }
          }
          y.at(n, c, oy, ox) = acc * inv;
        }
  return y;
}

Tensor max_pool(const Tensor& x, int k, int stride, int pad,
                std::vector<std::size_t>* argmax) {
  require_rank(x, 4, "max_pool input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = output_extent(H, k, stride, pad);
  const int Wo = output_extent(W, k, stride, pad);
  Tensor y(Shape{N, C, Ho, Wo});
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t out_i = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox, ++out_i) {
          real best = -std::numeric_limits<real>::infinity();
          std::size_t best_i = 0;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= W) continue;
              const std::size_t idx =
                  ((static_cast<std::size_t>(n) * C + c) * H + iy) * W + ix;
              if (x[idx] > best) {
                best = x[idx];
                best_i = idx;
              }
            }
          }
          y[out_i] = best;
          if (argmax) (*argmax)[out_i] = best_i;
        }
  return y;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool input");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y(Shape{N, C});
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(N) * C; ++nc) {
    real acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += x[nc * plane + i];
    y[nc] = acc / static_cast<real>(plane);
  }
  return y;
}

Tensor scale_channels(const Tensor& x, std::span<const real> scale) {
  const int N = x.dim(0), C = x.dim(1);
  if (static_cast<int>(scale.size()) != C)
    throw ContractViolation("scale_channels: scale length mismatch");
  const std::size_t plane = x.size() / (static_cast<std::size_t>(N) * C);
  Tensor y(x.shape());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        y[base + i] = x[base + i] * scale[static_cast<std::size_t>(c)];
    }
  return y;
}

Tensor shortcut_pad(const Tensor& x, int c_out, int stride) {
  require_rank(x, 4, "shortcut input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (c_out < C) throw ContractViolation("shortcut cannot drop channels");
  const int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  const int front = (c_out - C) / 2;
  Tensor y(Shape{N, c_out, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox)
          y.at(n, c + front, oy, ox) = x.at(n, c, oy * stride, ox * stride);
  return y;
}

}  // namespace sbnn::kernels
