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

#include <cstdint>
#include <vector>

#include "sbnn/packed_model.hpp"
#include "sbnn/tensor.hpp"

namespace sbnn {

// +-1 activations of one image, one bit per pixel (1 = +1), packed per
// channel: 64 pixels per little-endian word, row-major pixel order, each
// channel starting on a fresh word.
struct Bitplanes {
  int channels = 0, height = 0, width = 0;
  std::size_t words_per_channel = 0;
  std::vector<std::uint64_t> words;

  // sign(x) of sample n of an NCHW tensor, with sign(0) = +1.
  static Bitplanes pack(const Tensor& x, int n = 0);
  bool bit(int c, int y, int x) const;
};

// Integer convolution result, c_out maps in CHW order.
struct IntMaps {
  int channels = 0, height = 0, width = 0;
  std::vector<std::int32_t> values;
  bool operator==(const IntMaps&) const = default;
};

struct EngineCounters {
  std::uint64_t dot_products = 0;  // binary unit dot products evaluated
  std::uint64_t lut_lookups = 0;   // shared path only
};

enum class SharingPolicy {
  Auto,    // shared path when 2^tau < c_out, direct otherwise
  Always,
  Never,
};

// A PackedLayer with its subset and indices unpacked for execution.
struct EngineLayer {
  PackedLayer packed;
  std::vector<std::uint32_t> members;  // pattern bits per member
  std::vector<std::uint32_t> indices;  // member per unit
  Tensor weights;                      // decoded +-1 weights (c_out,c_in,k,k)
  std::vector<real> lambda;

  explicit EngineLayer(PackedLayer p);
  bool shares(SharingPolicy policy) const;
};

// dot = 2 * popcount(~(slice ^ kernel) & valid) - popcount(valid), one
// binary dot product per (output channel, pixel, unit).
IntMaps conv_xnor_popcount(const Bitplanes& in, const EngineLayer& layer,
                           EngineCounters* counters = nullptr);
// Per (unit slot, pixel): 2^tau dot products into a lookup table, then one
// lookup per output channel.
IntMaps conv_shared(const Bitplanes& in, const EngineLayer& layer,
                    EngineCounters* counters = nullptr);

struct RunOptions {
  SharingPolicy sharing = SharingPolicy::Auto;
  // Real-valued activations: use the lookup-table path (real pre-results)
  // instead of the dense +-1 convolution.
  bool share_real = false;
};

// Executes a loaded model. Construction validates the record chain and
// throws CorruptModelError before anything runs. Safe for concurrent run()
// calls.
class Engine {
 public:
  explicit Engine(const PackedModel& model);

  // x is (N, C, H, W); returns logits (N, classes).
  Tensor run(const Tensor& x, const RunOptions& options = {},
             EngineCounters* counters = nullptr) const;

  const PackedModel& model() const { return model_; }

 private:
  PackedModel model_;
  std::vector<std::vector<EngineLayer>> layers_;  // per record: 0..1 layers
};

Tensor run_model(const PackedModel& model, const Tensor& x,
                 const RunOptions& options = {},
                 EngineCounters* counters = nullptr);

// Real-activation shared convolution: per (unit slot, pixel) the 2^tau
// member dot products against the real slice, looked up per output channel.
Tensor conv_shared_real(const Tensor& x, const EngineLayer& layer,
                        EngineCounters* counters = nullptr);

}  // namespace sbnn
