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

#include "sbnn/kernelspace.hpp"

#include <algorithm>
#include <bit>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace sbnn {
namespace {

void check_pm1(std::span<const std::int8_t> values) {
  for (auto v : values)
    if (v != 1 && v != -1)
      throw ContractViolation("binary kernel entry is not +-1");
}

// Full universe ordered from the all-(+1) unit down. Combined with
// lowest-index tie breaking this resolves zero weights to +1.
std::vector<KernelCode> full_universe(int unit_length) {
  const std::uint32_t n = universe_size(unit_length);
  std::vector<KernelCode> codes(n);
  for (std::uint32_t i = 0; i < n; ++i) codes[i] = KernelCode{n - i};
  return codes;
}

std::vector<KernelCode> random_codes(int unit_length, int tau, Rng& rng) {
  const std::uint32_t n = universe_size(unit_length);
  const std::uint32_t want = std::uint32_t{1} << tau;
  if (want == n) return full_universe(unit_length);
  // Partial Fisher-Yates over 1..n: sampling without replacement.
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 1u);
  std::vector<KernelCode> out;
  out.reserve(want);
  for (std::uint32_t i = 0; i < want; ++i) {
    const auto j = i + static_cast<std::uint32_t>(uniform_below(rng, n - i));
    std::swap(pool[i], pool[j]);
    out.push_back(KernelCode{pool[i]});
  }
  return out;
}

}  // namespace

BinaryKernel::BinaryKernel(int side, std::vector<std::int8_t> values)
    : side_(side), values_(std::move(values)) {
  if (side <= 0 || static_cast<std::size_t>(side) * side != values_.size())
    throw ContractViolation("binary kernel must have side*side entries");
  check_pm1(values_);
}

BinaryKernel BinaryKernel::vector(std::vector<std::int8_t> values) {
  check_pm1(values);
  BinaryKernel k;
  k.values_ = std::move(values);
  return k;
}

KernelCode encode_pattern(std::span<const std::int8_t> pattern) {
  if (pattern.empty() || pattern.size() > kMaxUnitLength)
    throw ContractViolation("unsupported binary unit length");
  std::uint32_t bits = 0;
  for (auto v : pattern) bits = (bits << 1) | (v > 0 ? 1u : 0u);
  return KernelCode{bits + 1};
}

KernelCode encode_kernel(const BinaryKernel& kernel) {
  return encode_pattern(kernel.values());
}

std::vector<std::int8_t> decode_pattern(KernelCode code, int length) {
  if (length <= 0 || length > kMaxUnitLength)
    throw std::out_of_range("unsupported binary unit length");
  if (code.value < 1 || code.value > universe_size(length))
    throw std::out_of_range("kernel code " + std::to_string(code.value) +
                            " outside [1, " +
                            std::to_string(universe_size(length)) + "]");
  const std::uint32_t bits = code.value - 1;
  std::vector<std::int8_t> out(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i)
    out[static_cast<std::size_t>(i)] =
        (bits >> (length - 1 - i)) & 1u ? std::int8_t{1} : std::int8_t{-1};
  return out;
}

BinaryKernel decode_kernel(KernelCode code, int side) {
  if (side <= 0 || side * side > kMaxUnitLength)
    throw std::out_of_range("unsupported kernel side");
  return BinaryKernel(side, decode_pattern(code, side * side));
}

std::vector<KernelCode> KernelSubset::codes() const {
  std::vector<KernelCode> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (int j = 0; j < size(); ++j) out.push_back(member_code(j));
  return out;
}

KernelSubset KernelSubset::from_codes(int unit_length,
                                      std::span<const KernelCode> codes) {
  const auto rows = codes.size();
  if (rows == 0 || (rows & (rows - 1)) != 0)
    throw ContractViolation("subset size must be a power of two");
  KernelSubset s;
  s.tau = std::countr_zero(rows);
  s.unit_length = unit_length;
  s.p = Tensor(Shape{static_cast<int>(rows), unit_length});
  s.m.resize(rows * static_cast<std::size_t>(unit_length));
  for (std::size_t j = 0; j < rows; ++j) {
    const auto pat = decode_pattern(codes[j], unit_length);
    for (int l = 0; l < unit_length; ++l) {
      const auto idx = j * static_cast<std::size_t>(unit_length) +
                       static_cast<std::size_t>(l);
      s.m[idx] = pat[static_cast<std::size_t>(l)];
      s.p[idx] = pat[static_cast<std::size_t>(l)];
    }
  }
  return s;
}

std::string to_string(SamplingStrategy::Kind kind) {
  switch (kind) {
    case SamplingStrategy::Kind::RandomLayerSpecific: return "layer-specific";
    case SamplingStrategy::Kind::RandomLayerShared: return "layer-shared";
    case SamplingStrategy::Kind::UniformInterval: return "uniform-interval";
    case SamplingStrategy::Kind::FrequencyTopK: return "frequency-topk";
  }
  return "unknown";
}

SamplingStrategy::Kind parse_sampling_kind(const std::string& name) {
  using K = SamplingStrategy::Kind;
  for (K k : {K::RandomLayerSpecific, K::RandomLayerShared, K::UniformInterval,
              K::FrequencyTopK})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown sampling strategy '" + name +
                    "' (expected layer-specific, layer-shared, "
                    "uniform-interval or frequency-topk)");
}

std::uint64_t KernelHistogram::total(std::size_t layer) const {
  return std::accumulate(counts.at(layer).begin(), counts.at(layer).end(),
                         std::uint64_t{0});
}

void KernelHistogram::write_csv(std::ostream& out) const {
  out << "layer_index,code,count\n";
  for (std::size_t l = 0; l < counts.size(); ++l)
    for (std::size_t c = 0; c < counts[l].size(); ++c)
      if (counts[l][c] != 0)
        out << l << ',' << (c + 1) << ',' << counts[l][c] << '\n';
}

KernelHistogram KernelHistogram::read_csv(std::istream& in,
                                          std::span<const int> unit_lengths) {
  KernelHistogram h;
  h.counts.resize(unit_lengths.size());
  for (std::size_t i = 0; i < unit_lengths.size(); ++i)
    h.counts[i].assign(universe_size(unit_lengths[i]), 0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "layer_index,code,count") continue;
    std::istringstream row(line);
    std::uint64_t layer = 0, code = 0, count = 0;
    char c1 = 0, c2 = 0;
    if (!(row >> layer >> c1 >> code >> c2 >> count) || c1 != ',' || c2 != ',')
      throw DataError("histogram CSV line " + std::to_string(line_no) +
                      ": expected layer_index,code,count");
    if (layer >= h.counts.size() || code < 1 || code > h.counts[layer].size())
      throw DataError("histogram CSV line " + std::to_string(line_no) +
                      ": layer or code out of range");
    h.counts[layer][code - 1] += count;
  }
  return h;
}

void validate_tau(int tau, int unit_length, bool allow_full) {
  const int hi = allow_full ? unit_length : unit_length - 1;
  if (tau < 1 || tau > hi)
    throw ConfigError("tau=" + std::to_string(tau) + " violates 1 <= tau < " +
                      std::to_string(unit_length) +
                      (allow_full ? " (tau == unit length selects the full set)"
                                  : ""));
}

std::vector<KernelCode> top_codes(std::span<const std::uint64_t> counts,
                                  int tau) {
  const std::size_t want = std::size_t{1} << tau;
  if (want > counts.size())
    throw ConfigError("subset larger than the histogram universe");
  std::vector<std::uint32_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return counts[a] > counts[b];
                   });
  std::vector<KernelCode> out;
  out.reserve(want);
  for (std::size_t i = 0; i < want; ++i) out.push_back(KernelCode{order[i] + 1});
  return out;
}

KernelSubset sample_random_subset(int unit_length, int tau, Rng& rng) {
  validate_tau(tau, unit_length);
  return KernelSubset::from_codes(unit_length,
                                  random_codes(unit_length, tau, rng));
}

std::vector<KernelSubset> sample_subsets(std::span<const LayerShape> layers,
                                         int tau,
                                         const SamplingStrategy& strategy,
                                         const KernelHistogram* freq) {
  using K = SamplingStrategy::Kind;
  auto tau_of = [tau](const LayerShape& l) { return l.tau ? l.tau : tau; };
  for (const auto& l : layers) validate_tau(tau_of(l), l.unit_length);
  if (strategy.kind == K::FrequencyTopK &&
      (freq == nullptr || freq->counts.size() < layers.size()))
    throw ConfigError("frequency-topk sampling needs a kernel histogram for "
                      "every layer");

  std::vector<KernelSubset> out;
  out.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const int n = layers[i].unit_length;
    const int t = tau_of(layers[i]);
    const std::uint32_t universe = universe_size(n);
    const std::uint32_t want = std::uint32_t{1} << t;
    std::vector<KernelCode> codes;
    if (want == universe) {
      codes = full_universe(n);
    } else {
      switch (strategy.kind) {
        case K::RandomLayerSpecific: {
          Rng rng(derive_seed(strategy.seed, "subset", i));
          codes = random_codes(n, t, rng);
          break;
        }
        case K::RandomLayerShared: {
          // Every layer with the same unit length draws from the same stream.
          Rng rng(derive_seed(strategy.seed, "subset-shared",
                              static_cast<std::uint64_t>(n)));
          codes = random_codes(n, t, rng);
          break;
        }
        case K::UniformInterval: {
          const std::uint32_t stride = universe / want;
          for (std::uint32_t j = 0; j < want; ++j)
            codes.push_back(KernelCode{1 + j * stride});
          break;
        }
        case K::FrequencyTopK: {
          const auto& row = freq->counts[i];
          if (row.size() != universe)
            throw ConfigError("histogram row " + std::to_string(i) +
                              " does not match the layer's kernel universe");
          codes = top_codes(row, t);
          break;
        }
      }
    }
    out.push_back(KernelSubset::from_codes(n, codes));
  }
  return out;
}

std::vector<int> repair_duplicates(KernelSubset& subset, Rng& rng) {
  const int n = subset.unit_length;
  const std::uint32_t universe = universe_size(n);
  if (static_cast<std::uint32_t>(subset.size()) > universe)
    throw ConfigError("subset of 2^" + std::to_string(subset.tau) +
                      " kernels cannot be filled from a universe of " +
                      std::to_string(universe));

  std::vector<std::uint32_t> codes(static_cast<std::size_t>(subset.size()));
  for (int j = 0; j < subset.size(); ++j)
    codes[static_cast<std::size_t>(j)] = subset.member_code(j).value;

  std::unordered_set<std::uint32_t> present(codes.begin(), codes.end());
  std::unordered_set<std::uint32_t> seen;
  std::vector<int> replaced;
  for (int j = 0; j < subset.size(); ++j) {
    if (seen.insert(codes[static_cast<std::size_t>(j)]).second) continue;
    // Rejection-sample from K \ present; the complement is non-empty because
    // this row duplicates an earlier one.
    std::uint32_t fresh;
    do {
      fresh = 1 + static_cast<std::uint32_t>(uniform_below(rng, universe));
    } while (present.contains(fresh));
    present.insert(fresh);
    seen.insert(fresh);
    codes[static_cast<std::size_t>(j)] = fresh;
    const auto pat = decode_pattern(KernelCode{fresh}, n);
    for (int l = 0; l < n; ++l) {
      const auto idx = static_cast<std::size_t>(j) * n + l;
      subset.m[idx] = pat[static_cast<std::size_t>(l)];
      subset.p[idx] = pat[static_cast<std::size_t>(l)];
    }
    replaced.push_back(j);
  }
  return replaced;
}

}  // namespace sbnn
