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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbnn/rng.hpp"
#include "sbnn/tensor.hpp"

namespace sbnn {

// Largest supported binary unit: 4x4 kernels (16 entries). Standard units are
// 3x3 kernels (9 entries) and 8-wide 1x1 channel vectors.
inline constexpr int kMaxUnitLength = 16;

// A k x k pattern of +-1 values in row-major order. 1x1 channel vectors reuse
// the same type with side() == 0 and length() == 8.
class BinaryKernel {
 public:
  BinaryKernel() = default;
  // Square kernel with side*side entries.
  BinaryKernel(int side, std::vector<std::int8_t> values);
  // Flat +-1 vector (channel-vector mode).
  static BinaryKernel vector(std::vector<std::int8_t> values);

  int side() const { return side_; }
  int length() const { return static_cast<int>(values_.size()); }
  std::span<const std::int8_t> values() const { return values_; }
  std::int8_t operator[](int i) const {
    return values_[static_cast<std::size_t>(i)];
  }

  bool operator==(const BinaryKernel&) const = default;

 private:
  int side_ = 0;
  std::vector<std::int8_t> values_;
};

// 1-based kernel index: row-major flatten, -1 -> bit 0, +1 -> bit 1, first
// entry is the most significant bit, then +1. The all-(-1) 3x3 kernel is 1,
// the all-(+1) one is 512.
struct KernelCode {
  std::uint32_t value = 0;
  auto operator<=>(const KernelCode&) const = default;
};

// Number of distinct binary units of the given length (2^length).
constexpr std::uint32_t universe_size(int unit_length) {
  return std::uint32_t{1} << unit_length;
}

KernelCode encode_kernel(const BinaryKernel& kernel);
// Encodes a raw +-1 pattern of any supported length.
KernelCode encode_pattern(std::span<const std::int8_t> pattern);
// Throws std::out_of_range when code is outside [1, 2^(side*side)].
BinaryKernel decode_kernel(KernelCode code, int side);
// Flat decode for a unit of `length` entries.
std::vector<std::int8_t> decode_pattern(KernelCode code, int length);

// Bit pattern (code - 1) of a +-1 unit, MSB = first entry.
inline std::uint32_t pattern_bits(KernelCode code) { return code.value - 1; }

// A layer's 2^tau binary units plus the refinement state. Row j of `m` is the
// j-th member; `p` is its real-valued latent copy. m always holds +-1 values
// and the member list is m.
struct KernelSubset {
  int tau = 0;
  int unit_length = 0;
  Tensor p;                     // (2^tau, unit_length)
  std::vector<std::int8_t> m;   // 2^tau * unit_length entries in {-1, +1}

  int size() const { return 1 << tau; }
  std::span<const std::int8_t> member(int j) const {
    return std::span<const std::int8_t>(m).subspan(
        static_cast<std::size_t>(j) * unit_length,
        static_cast<std::size_t>(unit_length));
  }
  KernelCode member_code(int j) const { return encode_pattern(member(j)); }
  std::vector<KernelCode> codes() const;

  // Builds a subset from member codes with p initialised to the +-1 values.
  static KernelSubset from_codes(int unit_length,
                                 std::span<const KernelCode> codes);
};

// One entry per layer passed to sample_subsets.
struct LayerShape {
  int unit_length = 9;   // k*k for kernel mode, 8 for channel-vector mode
  int units = 0;         // c_out * c_in (or c_out * c_in / 8)
  int tau = 0;           // per-layer override; 0 uses the call's tau
};

struct SamplingStrategy {
  enum class Kind {
    RandomLayerSpecific,
    RandomLayerShared,
    UniformInterval,
    FrequencyTopK,
  };
  Kind kind = Kind::RandomLayerSpecific;
  std::uint64_t seed = 0;
};

std::string to_string(SamplingStrategy::Kind kind);
SamplingStrategy::Kind parse_sampling_kind(const std::string& name);

// Per-layer code histogram: counts[layer][code - 1].
struct KernelHistogram {
  std::vector<std::vector<std::uint64_t>> counts;

  std::uint64_t total(std::size_t layer) const;
  // CSV with header "layer_index,code,count"; zero bins are omitted on write.
  void write_csv(std::ostream& out) const;
  // `unit_lengths[i]` sizes layer i; layers absent from the CSV stay empty.
  static KernelHistogram read_csv(std::istream& in,
                                  std::span<const int> unit_lengths);
};

// Samples one subset per layer. Deterministic in (layers, tau, strategy).
// FrequencyTopK requires `freq` with one histogram row per layer.
std::vector<KernelSubset> sample_subsets(std::span<const LayerShape> layers,
                                         int tau,
                                         const SamplingStrategy& strategy,
                                         const KernelHistogram* freq = nullptr);

// Subset for a single layer from its own random stream. Used by trainers that
// keep one stream per layer.
KernelSubset sample_random_subset(int unit_length, int tau, Rng& rng);

// The top-2^tau codes of a histogram row, most frequent first (ties: lower
// code first).
std::vector<KernelCode> top_codes(std::span<const std::uint64_t> counts,
                                  int tau);

// Replaces every repeated member (all but the first occurrence) with a fresh
// kernel drawn uniformly from K minus the current member set. The p row of a
// replaced member is reset to the new +-1 values. Returns the replaced rows.
std::vector<int> repair_duplicates(KernelSubset& subset, Rng& rng);

// Validates 1 <= tau < unit_length (the full set tau == unit_length is
// accepted when allow_full is true).
void validate_tau(int tau, int unit_length, bool allow_full = true);

}  // namespace sbnn
