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

#include <algorithm>
#include <string>

#include "sbnn/inferengine.hpp"
#include "sbnn/packed_model.hpp"
#include "sbnn/tensor_ops.hpp"
#include "test_util.hpp"

namespace sbnn::test {

// A PackedLayer with a random duplicate-free subset and random indices.
inline PackedLayer random_packed_layer(Rng& rng, int c_in, int c_out, int tau,
                                       int k = 3, int stride = 1, int pad = 1,
                                       UnitMode unit = UnitMode::Kernel) {
  PackedLayer p;
  p.unit = unit;
  p.k = k;
  p.tau = tau;
  p.c_in = c_in;
  p.c_out = c_out;
  p.stride = stride;
  p.pad = pad;
  p.binarize_input = true;
  const int n = p.unit_length();
  const KernelSubset s = sample_random_subset(n, tau, rng);
  BitWriter sw;
  for (std::int8_t v : s.m) sw.write(v > 0 ? 1u : 0u, 1);
  p.subset_bits = sw.finish();
  BitWriter iw;
  for (int u = 0; u < p.units(); ++u)
    iw.write(static_cast<std::uint32_t>(uniform_below(rng, 1u << tau)), tau);
  p.index_stream = iw.finish();
  p.lambda.assign(static_cast<std::size_t>(c_out), 1.0f);
  return p;
}

// Exact integer +-1 convolution through the floating-point kernel.
inline IntMaps reference_maps(const Tensor& x, const EngineLayer& layer) {
  const PackedLayer& p = layer.packed;
  const Tensor y = kernels::conv2d_fp(x, layer.weights, nullptr, p.stride, p.pad);
  IntMaps m;
  m.channels = y.dim(1);
  m.height = y.dim(2);
  m.width = y.dim(3);
  for (real v : y.values()) m.values.push_back(static_cast<std::int32_t>(v));
  return m;
}

struct EquivalenceResult {
  int trials = 0;
  int mismatches = 0;        // any of the three paths disagreeing
  int edge_trials = 0;       // c_out in {1, 2^tau - 1, 2^tau, 2^tau + 1}
  int vector_trials = 0;
  std::string first_failure;
};

// Random layers and +-1 inputs; compares the shared path, the direct
// XNOR path and the floating-point convolution of the decoded weights.
inline EquivalenceResult shared_conv_equivalence(std::uint64_t seed, int trials) {
  Rng rng(seed);
  EquivalenceResult r;
  auto pick = [&](int lo, int hi) {
    return lo + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
  };
  for (int t = 0; t < trials; ++t) {
    const bool vec = t % 5 == 4;
    const int k = vec ? 1 : pick(2, 3);
    const int n = vec ? kVectorWidth : k * k;
    const int tau = pick(1, std::min(n - 1, 6));
    const int c_in = vec ? kVectorWidth * pick(1, 2) : pick(1, 4);
    int c_out;
    switch (t % 4) {
      case 0: c_out = 1; break;
      case 1: c_out = (1 << tau) - 1; break;
      case 2: c_out = 1 << tau; break;
      default: c_out = (1 << tau) + 1; break;
    }
    if (t % 8 == 7) c_out = pick(1, 40);
    else ++r.edge_trials;
    c_out = std::max(c_out, 1);
    const int stride = pick(1, 2), pad = vec ? 0 : pick(0, k / 2);
    const int h = pick(std::max(1, k - 2 * pad), 7), w = pick(std::max(1, k - 2 * pad), 7);
    const EngineLayer layer(random_packed_layer(
        rng, c_in, c_out, tau, k, stride, pad,
        vec ? UnitMode::Vector1x1 : UnitMode::Kernel));
    const Tensor x = random_pm1(Shape{1, c_in, h, w}, rng);
    const Bitplanes planes = Bitplanes::pack(x);
    const IntMaps direct = conv_xnor_popcount(planes, layer);
    const IntMaps shared = conv_shared(planes, layer);
    const IntMaps ref = reference_maps(x, layer);
    ++r.trials;
    r.vector_trials += vec;
    if (!(direct == ref) || !(shared == ref)) {
      if (r.mismatches++ == 0)
        r.first_failure = "trial " + std::to_string(t) + " tau " + std::to_string(tau) +
                          " c_in " + std::to_string(c_in) + " c_out " + std::to_string(c_out) +
                          " k " + std::to_string(k);
    }
  }
  return r;
}

}  // namespace sbnn::test
