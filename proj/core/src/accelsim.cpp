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

#include "sbnn/accelsim.hpp"

#include <algorithm>
#include <ostream>

#include "json.hpp"
#include "sbnn/error.hpp"

namespace sbnn {
namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

// Input slots per output channel: c_in kernels, or c_in/8 vectors.
std::uint64_t slots(const WeightLayer& w) {
  return static_cast<std::uint64_t>(w.units()) / w.c_out;
}

LayerCycles base(const WeightLayer& w) {
  LayerCycles l;
  l.name = w.name;
  l.c_in = w.c_in;
  l.c_out = w.c_out;
  l.h_out = w.h_out;
  l.w_out = w.w_out;
  return l;
}

// One unit-wide XNOR dot per PE per cycle.
LayerCycles plain_layer(const WeightLayer& w, const HardwareConfig& hw) {
  LayerCycles l = base(w);
  const std::uint64_t hw_px = static_cast<std::uint64_t>(w.h_out) * w.w_out;
  l.pre_compute = ceil_div(hw_px * w.c_out * slots(w), hw.pe_count);
  l.fill = hw.fill_cycles;
  l.pipelined = l.pre_compute + l.fill;
  return l;
}

void finish(CycleReport& r, const HardwareConfig& hw) {
  for (auto& l : r.layers) {
    l.time_ms = static_cast<double>(l.pipelined) / (hw.clock_ghz * 1e6);
    r.total_cycles += l.pipelined;
  }
  r.time_ms = static_cast<double>(r.total_cycles) / (hw.clock_ghz * 1e6);
}

}  // namespace

void HardwareConfig::validate() const {
  if (pe_count <= 0 || !(clock_ghz > 0) || accumulators_per_pe <= 0 ||
      line_buffer_width <= 0 || accumulator_bits <= 0)
    throw ConfigError("hardware parameters must be positive");
}

CycleReport simulate_bnn(const ResolvedArchitecture& arch,
                         const HardwareConfig& hw) {
  hw.validate();
  CycleReport r;
  r.engine = "bnn";
  r.architecture = arch.spec.name;
  r.hardware = hw;
  for (int i : arch.quantized())
    r.layers.push_back(plain_layer(arch.weights[i], hw));
  finish(r, hw);
  return r;
}

CycleReport simulate_snn(const ResolvedArchitecture& arch,
                         const HardwareConfig& hw, int tau, int tau_vector) {
  hw.validate();
  CycleReport r;
  r.engine = "snn";
  r.architecture = arch.spec.name;
  r.hardware = hw;
  for (int i : arch.quantized()) {
    const auto& w = arch.weights[i];
    const int n = w.unit_length();
    int t = std::min(tau, n);
    if (w.unit == UnitMode::Vector1x1 && tau_vector > 0) t = tau_vector;
    if (t < 1 || t > n)
      throw ConfigError("tau " + std::to_string(t) + " out of range for " +
                        w.name);
    const std::uint64_t members = std::uint64_t{1} << t;
    if (members >= static_cast<std::uint64_t>(w.c_out)) {
      auto l = plain_layer(w, hw);
      l.tau = t;
      r.layers.push_back(l);
      continue;
    }
    LayerCycles l = base(w);
    l.tau = t;
    l.shared = true;
    const std::uint64_t px = static_cast<std::uint64_t>(w.h_out) * w.w_out;
    const std::uint64_t s = slots(w);
    l.pre_compute = ceil_div(px * s * members, hw.pe_count);
    const std::uint64_t acc = ceil_div(
        px * s * w.c_out,
        static_cast<std::uint64_t>(hw.pe_count) * hw.accumulators_per_pe);
    l.line_buffer = ceil_div(
        ceil_div(px * w.c_out * hw.accumulator_bits, hw.line_buffer_width),
        hw.pe_count);
    l.accumulate = std::max(acc, l.line_buffer);
    const std::uint64_t busy = std::max(l.pre_compute, l.accumulate);
    l.stall = busy - std::min(l.pre_compute, l.accumulate);
    // The first traversal of the subset has to finish before the
    // accumulator can start.
    l.fill = members + hw.fill_cycles;
    l.pipelined = busy + l.fill;
    r.layers.push_back(l);
  }
  finish(r, hw);
  return r;
}

Timeline timeline(const CycleReport& a, const CycleReport& b) {
  if (a.layers.size() != b.layers.size())
    throw ConfigError("timeline: layer counts differ (" +
                      std::to_string(a.layers.size()) + " vs " +
                      std::to_string(b.layers.size()) + ")");
  Timeline t;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& la = a.layers[i];
    const auto& lb = b.layers[i];
    if (la.name != lb.name)
      throw ConfigError("timeline: layer " + std::to_string(i) +
                        " differs (" + la.name + " vs " + lb.name + ")");
    TimelineRow row;
    row.name = la.name;
    row.c_out = la.c_out;
    row.a_ms = la.time_ms;
    row.b_ms = lb.time_ms;
    row.speedup = lb.time_ms > 0 ? la.time_ms / lb.time_ms : 1.0;
    if (lb.pipelined > la.pipelined) t.b_never_slower = false;
    t.rows.push_back(row);
  }
  t.a_ms = a.time_ms;
  t.b_ms = b.time_ms;
  t.speedup = b.time_ms > 0 ? a.time_ms / b.time_ms : 1.0;
  return t;
}

std::string CycleReport::to_json() const {
  nlohmann::ordered_json j;
  j["engine"] = engine;
  j["architecture"] = architecture;
  j["hardware"] = {{"pe_count", hardware.pe_count},
                   {"clock_ghz", hardware.clock_ghz},
                   {"accumulators_per_pe", hardware.accumulators_per_pe},
                   {"line_buffer_width", hardware.line_buffer_width},
                   {"accumulator_bits", hardware.accumulator_bits},
                   {"fill_cycles", hardware.fill_cycles}};
  auto arr = nlohmann::ordered_json::array();
  for (const auto& l : layers) {
    nlohmann::ordered_json o;
    o["name"] = l.name;
    o["c_in"] = l.c_in;
    o["c_out"] = l.c_out;
    o["h_out"] = l.h_out;
    o["w_out"] = l.w_out;
    o["tau"] = l.tau;
    o["shared"] = l.shared;
    o["pre_compute_cycles"] = l.pre_compute;
    o["accumulate_cycles"] = l.accumulate;
    o["line_buffer_cycles"] = l.line_buffer;
    o["stall_cycles"] = l.stall;
    o["fill_cycles"] = l.fill;
    o["pipelined_cycles"] = l.pipelined;
    o["time_ms"] = l.time_ms;
    arr.push_back(std::move(o));
  }
  j["layers"] = std::move(arr);
  j["total_cycles"] = total_cycles;
  j["time_ms"] = time_ms;
  return j.dump(2);
}

void CycleReport::write_csv(std::ostream& out) const {
  out << "layer,c_in,c_out,h_out,w_out,tau,shared,pre_compute,accumulate,"
         "line_buffer,stall,fill,pipelined,time_ms\n";
  for (const auto& l : layers)
    out << l.name << ',' << l.c_in << ',' << l.c_out << ',' << l.h_out << ','
        << l.w_out << ',' << l.tau << ',' << l.shared << ',' << l.pre_compute
        << ',' << l.accumulate << ',' << l.line_buffer << ',' << l.stall
        << ',' << l.fill << ',' << l.pipelined << ',' << l.time_ms << '\n';
}

std::string Timeline::to_json() const {
  nlohmann::ordered_json j;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    arr.push_back({{"name", r.name},
                   {"c_out", r.c_out},
                   {"baseline_ms", r.a_ms},
                   {"candidate_ms", r.b_ms},
                   {"speedup", r.speedup}});
  j["layers"] = std::move(arr);
  j["baseline_ms"] = a_ms;
  j["candidate_ms"] = b_ms;
  j["speedup"] = speedup;
  j["candidate_never_slower"] = b_never_slower;
  return j.dump(2);
}

void Timeline::write_csv(std::ostream& out) const {
  out << "layer,c_out,baseline_ms,candidate_ms,speedup\n";
  for (const auto& r : rows)
    out << r.name << ',' << r.c_out << ',' << r.a_ms << ',' << r.b_ms << ','
        << r.speedup << '\n';
}

}  // namespace sbnn
