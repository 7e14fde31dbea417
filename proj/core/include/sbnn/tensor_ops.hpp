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

#pragma once

#include <span>
#include <vector>

#include "sbnn/tensor.hpp"

// Forward and backward kernels over NCHW tensors. Training (through the tape)
// and the inference engine call the same forward functions so both sides
// produce bit-identical activations.
namespace sbnn::kernels {

// floor((in + 2*pad - k) / stride) + 1; throws when the window does not fit.
int output_extent(int in, int k, int stride, int pad);

// Cross-correlation of x (N,C,H,W) with w (O,C,K,K) plus optional bias (O).
// Per output element the products are summed over (channel, ky, kx) in
// row-major order.
Tensor conv2d_fp(const Tensor& x, const Tensor& w, const Tensor* bias,
                 int stride, int pad);

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
// Any of want_* may be false to skip that gradient.
Conv2dGrads conv2d_fp_backward(const Tensor& x, const Tensor& w,
                               const Tensor& grad_out, int stride, int pad,
                               bool want_input, bool want_weight,
                               bool want_bias);

// x is (N, in) or any (N, ...) flattened; w is (out, in); bias (out).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias);

// y = (x - mean) / sqrt(var + eps) * gamma + beta, per channel.
Tensor batch_norm_eval(const Tensor& x, std::span<const real> mean,
                       std::span<const real> var, std::span<const real> gamma,
                       std::span<const real> beta, real eps);

Tensor relu(const Tensor& x);
Tensor hardtanh(const Tensor& x);
// Elementwise sign with sign(0) = +1.
Tensor sign(const Tensor& x);

// Average pooling; padded cells count toward the divisor (k*k).
Tensor avg_pool(const Tensor& x, int k, int stride, int pad);
// Max pooling; `argmax` (optional) receives the flat input index per output.
Tensor max_pool(const Tensor& x, int k, int stride, int pad,
                std::vector<std::size_t>* argmax = nullptr);
// (N,C,H,W) -> (N,C).
Tensor global_avg_pool(const Tensor& x);

// y[n,c,...] = x[n,c,...] * scale[c].
Tensor scale_channels(const Tensor& x, std::span<const real> scale);

// Parameter-free shortcut: spatial subsampling by `stride` and zero padding
// of the channel dimension up to c_out (channels centred).
Tensor shortcut_pad(const Tensor& x, int c_out, int stride);

}  // namespace sbnn::kernels
