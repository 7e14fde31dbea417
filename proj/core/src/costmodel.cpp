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

#include "sbnn/costmodel.hpp"

#include <algorithm>
#include <ostream>

#include "json.hpp"
#include "sbnn/error.hpp"
#include "sbnn/kernelspace.hpp"

namespace sbnn {
namespace {

int effective_tau(const CostOptions& o, const WeightLayer& w) {
  const int n = w.unit_length();
  if (w.unit == UnitMode::Vector1x1 && o.tau_vector > 0) return o.tau_vector;
  return std::min(o.tau, n);
}

double plain_ops(const WeightLayer& w) {
  return static_cast<double>(w.h_out) * w.w_out * w.c_out *
         (static_cast<double>(w.c_in) * w.k * w.k + 1);
}

LayerCost layer_cost(const WeightLayer& w, const CostOptions& o) {
  LayerCost c;
  c.name = w.name;
  c.binarized_scope = w.quantized;
  c.first = w.first;
  c.last = w.last;
  c.linear = w.linear;
  c.unit = w.unit;
  c.c_in = w.c_in;
  c.c_out = w.c_out;
  c.k = w.k;
  c.h_out = w.h_out;
  c.w_out = w.w_out;
  c.bnn_bitops = plain_ops(w);
  const auto weights = static_cast<std::uint64_t>(w.weight_count());
  if (!w.quantized || o.mode == QuantMode::FullPrecision) {
    c.weight_bits = 32 * weights;
    c.bitops = 64 * c.bnn_bitops;
    return c;
  }
  const int n = w.unit_length();
  const auto units = static_cast<std::uint64_t>(w.units());
  if (o.mode == QuantMode::Bnn) {
    c.tau = n;
    c.weight_bits = units * static_cast<std::uint64_t>(n);
    c.bitops = c.bnn_bitops;
    return c;
  }
  const int tau = effective_tau(o, w);
  validate_tau(tau, n);
  c.tau = tau;
  c.weight_bits = units * static_cast<std::uint64_t>(tau);
  if (o.count_subsets) c.subset_bits = static_cast<std::uint64_t>(n) << tau;
  const double members = static_cast<double>(std::uint64_t{1} << tau);
  if (members >= c.c_out) {
    c.bitops = c.bnn_bitops;
    return c;
  }
  // One dot product per member and input slot, then the looked-up results
  // are accumulated (counted at half rate).
  const double slots = static_cast<double>(units) / w.c_out;
  const double hw = static_cast<double>(w.h_out) * w.w_out;
  c.shared = true;
  c.bitops = hw * (members * (static_cast<double>(n) * slots + 1) +
                   static_cast<double>(w.c_out) * slots / 2);
  return c;
}

void accumulate(CostTotals& t, const LayerCost& c) {
  t.params_bits += c.weight_bits + c.subset_bits;
  t.bitops += c.bitops;
  // Binary layers run with real activations at 32x; fp layers stay at 64x.
  t.bitops_w32 += c.tau > 0 ? 32 * c.bitops : c.bitops;
  t.bitops_fp += 64 * c.bnn_bitops;
}

const char* unit_name(UnitMode u) {
  return u == UnitMode::Kernel ? "kernel" : "vector";
}

nlohmann::ordered_json totals_json(const CostTotals& t) {
  nlohmann::ordered_json j;
  j["params_bits"] = t.params_bits;
  j["params_mbit"] = static_cast<double>(t.params_bits) / 1e6;
  j["bitops"] = t.bitops;
  j["bitops_w32"] = t.bitops_w32;
  j["bitops_fp"] = t.bitops_fp;
  return j;
}

}  // namespace

CostReport cost_report(const ResolvedArchitecture& arch,
                       const CostOptions& options) {
  CostReport r;
  r.architecture = arch.spec.name;
  r.options = options;
  for (const auto& w : arch.weights) r.layers.push_back(layer_cost(w, options));
  for (const auto& c : r.layers)
    if (c.binarized_scope) accumulate(r.binarized, c);
  if (options.include_first_last) {
    CostTotals t = r.binarized;
    for (const auto& c : r.layers)
      if (!c.binarized_scope && (c.first || c.last)) accumulate(t, c);
    r.with_first_last = t;
  }
  return r;
}

std::uint64_t params_bits(const ResolvedArchitecture& arch, QuantMode mode,
                          int tau, bool count_subsets, int tau_vector) {
  CostOptions o;
  o.mode = mode;
  o.tau = tau;
  o.tau_vector = tau_vector;
  o.count_subsets = count_subsets;
  return cost_report(arch, o).binarized.params_bits;
}

double bitops(const ResolvedArchitecture& arch, QuantMode mode, int tau,
              bool weight_only, int tau_vector) {
  CostOptions o;
  o.mode = mode;
  o.tau = tau;
  o.tau_vector = tau_vector;
  const auto t = cost_report(arch, o).binarized;
  return weight_only ? t.bitops_w32 : t.bitops;
}

CostRatios ratios(const CostReport& reference, const CostReport& candidate) {
  bool same = reference.layers.size() == candidate.layers.size();
  for (std::size_t i = 0; same && i < reference.layers.size(); ++i) {
    const auto& a = reference.layers[i];
    const auto& b = candidate.layers[i];
    same = a.name == b.name && a.c_in == b.c_in && a.c_out == b.c_out &&
           a.k == b.k && a.h_out == b.h_out && a.w_out == b.w_out &&
           a.binarized_scope == b.binarized_scope;
  }
  if (!same)
    throw ConfigError("cost reports describe different architectures: " +
                      reference.architecture + " vs " +
                      candidate.architecture);
  CostRatios out;
  const auto& a = reference.binarized;
  const auto& b = candidate.binarized;
  if (b.params_bits > 0)
    out.params = static_cast<double>(a.params_bits) /
                 static_cast<double>(b.params_bits);
  if (b.bitops > 0) out.bitops = a.bitops / b.bitops;
  return out;
}

std::string CostReport::to_json() const {
  nlohmann::ordered_json j;
  j["architecture"] = architecture;
  j["mode"] = to_string(options.mode);
  j["tau"] = options.tau;
  j["tau_vector"] = options.tau_vector;
  j["count_subsets"] = options.count_subsets;
  j["include_first_last"] = options.include_first_last;
  auto layers_json = nlohmann::ordered_json::array();
  for (const auto& c : layers) {
    nlohmann::ordered_json l;
    l["name"] = c.name;
    l["binarized_scope"] = c.binarized_scope;
    l["first"] = c.first;
    l["last"] = c.last;
    l["linear"] = c.linear;
    l["unit"] = unit_name(c.unit);
    l["c_in"] = c.c_in;
    l["c_out"] = c.c_out;
    l["k"] = c.k;
    l["h_out"] = c.h_out;
    l["w_out"] = c.w_out;
    l["tau"] = c.tau;
    l["weight_bits"] = c.weight_bits;
    l["subset_bits"] = c.subset_bits;
    l["bitops"] = c.bitops;
    l["bnn_bitops"] = c.bnn_bitops;
    l["shared"] = c.shared;
    layers_json.push_back(std::move(l));
  }
  j["layers"] = std::move(layers_json);
  j["binarized"] = totals_json(binarized);
  if (with_first_last) j["with_first_last"] = totals_json(*with_first_last);
  return j.dump(2);
}

void CostReport::write_csv(std::ostream& out) const {
  out << "layer,scope,first,last,unit,c_in,c_out,k,h_out,w_out,tau,"
         "weight_bits,subset_bits,bitops,bnn_bitops,shared\n";
  for (const auto& c : layers) {
    out << c.name << ',' << (c.binarized_scope ? "binary" : "fp") << ','
        << c.first << ',' << c.last << ',' << unit_name(c.unit) << ','
        << c.c_in << ',' << c.c_out << ',' << c.k << ',' << c.h_out << ','
        << c.w_out << ',' << c.tau << ',' << c.weight_bits << ','
        << c.subset_bits << ',' << c.bitops << ',' << c.bnn_bitops << ','
        << c.shared << '\n';
  }
  auto total_row = [&](const char* label, const CostTotals& t) {
    out << label << ",,,,,,,,,,," << t.params_bits << ",," << t.bitops << ','
        << t.bitops_fp / 64 << ",\n";
  };
  total_row("total_binarized", binarized);
  if (with_first_last) total_row("total_with_first_last", *with_first_last);
}

}  // namespace sbnn
