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
#include <string>
#include <vector>

#include "sbnn/architecture.hpp"

namespace sbnn {

struct HardwareConfig {
  int pe_count = 64;
  double clock_ghz = 1.0;
  int accumulators_per_pe = 4;
  int line_buffer_width = 128;  // bits written back per PE per cycle
  int accumulator_bits = 32;
  std::uint64_t fill_cycles = 1024;  // per-layer drain, calibrated once

  void validate() const;  // ConfigError on non-positive values
};

struct LayerCycles {
  std::string name;
  int c_in = 0, c_out = 0, h_out = 0, w_out = 0;
  int tau = 0;          // 0 for the plain engine
  bool shared = false;  // ran through the pre-compute / LUT path
  std::uint64_t pre_compute = 0;
  std::uint64_t accumulate = 0;
  std::uint64_t line_buffer = 0;  // write-back lower bound on accumulate
  std::uint64_t stall = 0;        // cycles the faster unit waits
  std::uint64_t fill = 0;
  std::uint64_t pipelined = 0;
  double time_ms = 0;
};

struct CycleReport {
  std::string engine;  // "bnn" or "snn"
  std::string architecture;
  HardwareConfig hardware;
  std::vector<LayerCycles> layers;
  std::uint64_t total_cycles = 0;
  double time_ms = 0;

  std::string to_json() const;
  void write_csv(std::ostream& out) const;
};

// Quantized layers only; the full-precision stem, classifier and projections
// are not part of either engine.
CycleReport simulate_bnn(const ResolvedArchitecture& arch,
                         const HardwareConfig& hw);
// tau_vector applies to 1x1 vector-mode layers (0 means min(tau, 8)).
CycleReport simulate_snn(const ResolvedArchitecture& arch,
                         const HardwareConfig& hw, int tau,
                         int tau_vector = 0);

struct TimelineRow {
  std::string name;
  int c_out = 0;
  double a_ms = 0, b_ms = 0;
  double speedup = 1;  // a / b
};

struct Timeline {
  std::vector<TimelineRow> rows;
  double a_ms = 0, b_ms = 0;
  double speedup = 1;
  bool b_never_slower = true;

  std::string to_json() const;
  void write_csv(std::ostream& out) const;
};

// Merges a baseline (a) and candidate (b) report layer by layer. Throws
// ConfigError on a layer-count or name mismatch.
Timeline timeline(const CycleReport& a, const CycleReport& b);

}  // namespace sbnn
