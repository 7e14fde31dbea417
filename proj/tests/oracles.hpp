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

#include <limits>
#include <set>
#include <span>
#include <vector>

#include "sbnn/kernelspace.hpp"
#include "sbnn/quantlayer.hpp"

namespace sbnn::test {

// argmin_j |w - m_j|^2 by direct evaluation; first minimum wins.
inline int exhaustive_member(const KernelSubset& s, std::span<const real> w) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < s.size(); ++j) {
    double d = 0;
    const auto m = s.member(j);
    for (std::size_t l = 0; l < w.size(); ++l) {
      const double e = w[l] - m[l];
      d += e * e;
    }
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

// Nearest of all 2^n binary units.
inline std::vector<std::int8_t> exhaustive_binary(std::span<const real> w) {
  const int n = static_cast<int>(w.size());
  std::vector<std::int8_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t c = 1; c <= universe_size(n); ++c) {
    const auto pat = decode_pattern(KernelCode{c}, n);
    double d = 0;
    for (int l = 0; l < n; ++l) {
      const double e = w[static_cast<std::size_t>(l)] - pat[static_cast<std::size_t>(l)];
      d += e * e;
    }
    if (d < best_d) {
      best_d = d;
      best = pat;
    }
  }
  return best;
}

struct RefineFuzzResult {
  int iterations = 0;
  int threshold_violations = 0;   // m disagrees with the thresholded p rule
  int unselected_grad_rows = 0;   // nonzero pGrad on a row nobody selected
  int duplicate_subsets = 0;      // subsets with repeated members after repair
  int flips = 0;
  int repairs = 0;
};

// Random weights and gradients drive refinement; every few iterations p is
// perturbed adversarially (rows copied onto each other, values pinned at
// +-theta, signs forced to match another row) to provoke duplicates.
inline RefineFuzzResult refine_fuzz(std::uint64_t seed, int iterations,
                                    int unit_length = 9, int tau = 3,
                                    real theta = 1e-3) {
  Rng rng(seed);
  KernelSubset s = sample_random_subset(unit_length, tau, rng);
  const int units = 40;
  RefineFuzzResult out;
  for (int it = 0; it < iterations; ++it, ++out.iterations) {
    const auto n = static_cast<std::size_t>(unit_length);
    const int action = static_cast<int>(uniform_below(rng, 5));
    const int a = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(s.size())));
    const int b = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(s.size())));
    if (action == 0) {
      for (std::size_t l = 0; l < n; ++l) s.p[a * n + l] = s.p[b * n + l] * 1.5;
    } else if (action == 1) {
      for (std::size_t l = 0; l < n; ++l)
        s.p[a * n + l] = (rng() & 1) ? theta : -theta;
    } else if (action == 2) {
      for (std::size_t l = 0; l < n; ++l)
        s.p[a * n + l] = s.m[b * n + l] * uniform(rng, 0.0, 3 * theta);
    }

    const std::vector<std::int8_t> before = s.m;
    out.flips += refine_update_m(s, theta);
    for (std::size_t i = 0; i < s.m.size(); ++i) {
      const real p = s.p[i];
      const std::int8_t want = std::abs(p) > theta ? (p > 0 ? 1 : -1) : before[i];
      if (s.m[i] != want) ++out.threshold_violations;
    }

    Tensor w(Shape{units, unit_length});
    for (real& v : w.values()) v = uniform(rng, -1, 1);
    const auto bin = binarize_snn_forward(w, s);
    Tensor g(w.shape());
    for (real& v : g.values()) v = uniform(rng, -1, 1);
    const Tensor pg = accumulate_p_grad(s, bin.codes, g);
    std::set<int> used(bin.codes.begin(), bin.codes.end());
    for (int j = 0; j < s.size(); ++j) {
      if (used.count(j)) continue;
      for (std::size_t l = 0; l < n; ++l)
        if (pg[static_cast<std::size_t>(j) * n + l] != 0) {
          ++out.unselected_grad_rows;
          break;
        }
    }
    for (std::size_t i = 0; i < pg.size(); ++i) s.p[i] -= 0.05 * pg[i];

    out.repairs += static_cast<int>(repair_duplicates(s, rng).size());
    const auto codes = s.codes();
    if (std::set<KernelCode>(codes.begin(), codes.end()).size() != codes.size())
      ++out.duplicate_subsets;
  }
  return out;
}

}  // namespace sbnn::test
