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
#include <string>
#include <vector>

#include "sbnn/architecture.hpp"
#include "sbnn/quantlayer.hpp"

namespace sbnn {

struct CostOptions {
  QuantMode mode = QuantMode::Bnn;
  int tau = 9;
  int tau_vector = 0;          // 0 means min(tau, 8)
  bool count_subsets = false;  // add unit_length * 2^tau bits per layer
  bool include_first_last = false;
};

struct LayerCost {
  std::string name;
  bool binarized_scope = false;  // quantize flag set in the architecture
  bool first = false, last = false, linear = false;
  UnitMode unit = UnitMode::Kernel;
  int c_in = 0, c_out = 0, k = 1, h_out = 1, w_out = 1;
  int tau = 0;                   // bits per unit in this mode (0: not binary)
  std::uint64_t weight_bits = 0;
  std::uint64_t subset_bits = 0;
  double bitops = 0;             // 1/1 count; 64x for full-precision layers
  double bnn_bitops = 0;         // H*W*c_out*(c_in*k*k + 1)
  bool shared = false;           // counted with the sharing formula
};

struct CostTotals {
  std::uint64_t params_bits = 0;
  double bitops = 0;         // the mode's own count (64x base for fp)
  double bitops_w32 = 0;     // real-valued activations: 32x the 1/1 count
  double bitops_fp = 0;      // the same layers in full precision (64x BNN)
};

struct CostReport {
  std::string architecture;
  CostOptions options;
  std::vector<LayerCost> layers;  // every weight layer
  CostTotals binarized;           // binarized scope only (table convention)
  // Binarized scope plus the full-precision first and last layers.
  std::optional<CostTotals> with_first_last;

  std::string to_json() const;
  void write_csv(std::ostream& out) const;
};

CostReport cost_report(const ResolvedArchitecture& arch,
                       const CostOptions& options);

// Binarized-scope totals.
std::uint64_t params_bits(const ResolvedArchitecture& arch, QuantMode mode,
                          int tau, bool count_subsets = false,
                          int tau_vector = 0);
// 1/1 Bit-OPs of the binarized scope, or the W/32 count (32x) when
// weight_only is set. Full precision returns the 64x count.
double bitops(const ResolvedArchitecture& arch, QuantMode mode, int tau,
              bool weight_only = false, int tau_vector = 0);

struct CostRatios {
  double params = 0;  // reference / candidate
  double bitops = 0;
};
// Throws ConfigError when the reports describe different architectures.
CostRatios ratios(const CostReport& reference, const CostReport& candidate);

}  // namespace sbnn
