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

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sbnn/kernelspace.hpp"

namespace sbnn {
namespace {

BinaryKernel filled(int side, std::int8_t v) {
  return BinaryKernel(side, std::vector<std::int8_t>(side * side, v));
}

// Independent oracle: code = 1 + sum over +1 entries of 2^(n-1-i).
std::uint32_t code_by_powers(std::span<const std::int8_t> v) {
  std::uint32_t c = 1;
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i)
    if (v[static_cast<std::size_t>(i)] > 0) c += 1u << (n - 1 - i);
  return c;
}

TEST(KernelCode, AllMinusIsOne) {
  EXPECT_EQ(encode_kernel(filled(3, -1)).value, 1u);
}

TEST(KernelCode, AllPlusIs512) {
  EXPECT_EQ(encode_kernel(filled(3, 1)).value, 512u);
}

TEST(KernelCode, BottomRightOnlyIsTwo) {
  std::vector<std::int8_t> v(9, -1);
  v[8] = 1;
  EXPECT_EQ(encode_kernel(BinaryKernel(3, v)).value, 2u);
}

TEST(KernelCode, TopLeftIsMostSignificant) {
  std::vector<std::int8_t> v(9, -1);
  v[0] = 1;
  EXPECT_EQ(encode_kernel(BinaryKernel(3, v)).value, 257u);
}

TEST(KernelCode, MatchesPowerSumForAll512) {
  for (std::uint32_t c = 1; c <= 512; ++c) {
    const BinaryKernel k = decode_kernel(KernelCode{c}, 3);
    EXPECT_EQ(code_by_powers(k.values()), c);
    EXPECT_EQ(encode_kernel(k).value, c);
  }
}

TEST(KernelCode, DecodeEndpoints) {
  EXPECT_EQ(decode_kernel(KernelCode{1}, 3), filled(3, -1));
  EXPECT_EQ(decode_kernel(KernelCode{512}, 3), filled(3, 1));
}

TEST(KernelCode, TwoByTwoRoundTrip) {
  std::set<std::vector<std::int8_t>> seen;
  for (std::uint32_t c = 1; c <= 16; ++c) {
    const BinaryKernel k = decode_kernel(KernelCode{c}, 2);
    EXPECT_EQ(encode_kernel(k).value, c);
    seen.insert({k.values().begin(), k.values().end()});
  }
  EXPECT_EQ(seen.size(), 16u);
}

TEST(KernelCode, OutOfRangeThrows) {
  EXPECT_THROW(decode_kernel(KernelCode{0}, 3), std::out_of_range);
  EXPECT_THROW(decode_kernel(KernelCode{513}, 3), std::out_of_range);
  EXPECT_THROW(decode_pattern(KernelCode{257}, 8), std::out_of_range);
}

TEST(KernelCode, RejectsNonBinaryEntries) {
  EXPECT_THROW(BinaryKernel(3, std::vector<std::int8_t>(9, 0)), ContractViolation);
  EXPECT_THROW(BinaryKernel(3, std::vector<std::int8_t>(8, 1)), ContractViolation);
}

TEST(KernelCode, VectorUnits) {
  const auto v = decode_pattern(KernelCode{256}, 8);
  EXPECT_TRUE(std::all_of(v.begin(), v.end(), [](auto x) { return x == 1; }));
  EXPECT_EQ(encode_kernel(BinaryKernel::vector(v)).value, 256u);
}

std::vector<LayerShape> two_layers() {
  return {LayerShape{9, 16 * 16, 0}, LayerShape{9, 32 * 16, 0}};
}

bool duplicate_free(const KernelSubset& s) {
  const auto codes = s.codes();
  return std::set<KernelCode>(codes.begin(), codes.end()).size() == codes.size();
}

TEST(Sampling, FullSetForTauNine) {
  using K = SamplingStrategy::Kind;
  KernelHistogram h;
  h.counts.assign(2, std::vector<std::uint64_t>(512, 1));
  for (K k : {K::RandomLayerSpecific, K::RandomLayerShared, K::UniformInterval,
              K::FrequencyTopK}) {
    const auto subsets = sample_subsets(two_layers(), 9, {k, 3}, &h);
    for (const auto& s : subsets) {
      ASSERT_EQ(s.size(), 512);
      auto codes = s.codes();
      std::sort(codes.begin(), codes.end());
      for (std::uint32_t c = 1; c <= 512; ++c) EXPECT_EQ(codes[c - 1].value, c);
    }
  }
}

TEST(Sampling, UniformIntervalTauFour) {
  const auto s = sample_subsets(two_layers(), 4,
                                {SamplingStrategy::Kind::UniformInterval, 0});
  // every 32nd code of the enumerated universe, starting at 1
  std::vector<std::uint32_t> want;
  for (std::uint32_t c = 1; c <= 512; ++c)
    if ((c - 1) % 32 == 0) want.push_back(c);
  for (const auto& sub : s) {
    std::vector<std::uint32_t> got;
    for (auto c : sub.codes()) got.push_back(c.value);
    EXPECT_EQ(got, want);
  }
}

TEST(Sampling, LayerSpecificIsDeterministicAndDistinct) {
  const SamplingStrategy st{SamplingStrategy::Kind::RandomLayerSpecific, 42};
  const auto a = sample_subsets(two_layers(), 5, st);
  const auto b = sample_subsets(two_layers(), 5, st);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a[i].size(), 32);
    EXPECT_TRUE(duplicate_free(a[i]));
    EXPECT_EQ(a[i].codes(), b[i].codes());
  }
  EXPECT_NE(a[0].codes(), a[1].codes());
}

TEST(Sampling, LayerSharedRepeatsSubset) {
  const auto s = sample_subsets(two_layers(), 5,
                                {SamplingStrategy::Kind::RandomLayerShared, 42});
  EXPECT_EQ(s[0].codes(), s[1].codes());
  EXPECT_TRUE(duplicate_free(s[0]));
}

TEST(Sampling, FrequencyTopKTakesMostFrequent) {
  KernelHistogram h;
  h.counts.assign(1, std::vector<std::uint64_t>(512, 0));
  h.counts[0][99] = 50;   // code 100
  h.counts[0][4] = 40;    // code 5
  h.counts[0][300] = 40;  // code 301
  const std::vector<LayerShape> one{LayerShape{9, 10, 0}};
  const auto s =
      sample_subsets(one, 1, {SamplingStrategy::Kind::FrequencyTopK, 0}, &h);
  ASSERT_EQ(s[0].size(), 2);
  EXPECT_EQ(s[0].member_code(0).value, 100u);
  EXPECT_EQ(s[0].member_code(1).value, 5u);  // tie goes to the lower code
  EXPECT_THROW(
      sample_subsets(one, 1, {SamplingStrategy::Kind::FrequencyTopK, 0}),
      ConfigError);
}

TEST(Sampling, PerLayerTauOverride) {
  std::vector<LayerShape> layers{{9, 10, 0}, {8, 10, 3}};
  const auto s = sample_subsets(layers, 5, {});
  EXPECT_EQ(s[0].size(), 32);
  EXPECT_EQ(s[1].size(), 8);
  EXPECT_EQ(s[1].unit_length, 8);
}

TEST(Sampling, RejectsBadTau) {
  EXPECT_THROW(sample_subsets(two_layers(), 0, {}), ConfigError);
  EXPECT_THROW(sample_subsets(two_layers(), 10, {}), ConfigError);
  EXPECT_THROW(validate_tau(9, 9, false), ConfigError);
  EXPECT_NO_THROW(validate_tau(9, 9, true));
}

TEST(Sampling, StrategyNames) {
  using K = SamplingStrategy::Kind;
  for (K k : {K::RandomLayerSpecific, K::RandomLayerShared, K::UniformInterval,
              K::FrequencyTopK})
    EXPECT_EQ(parse_sampling_kind(to_string(k)), k);
  EXPECT_THROW(parse_sampling_kind("nope"), ConfigError);
}

TEST(Subset, FromCodesKeepsOrderAndSigns) {
  const std::vector<KernelCode> codes{{7}, {512}, {1}, {300}};
  const auto s = KernelSubset::from_codes(9, codes);
  EXPECT_EQ(s.tau, 2);
  EXPECT_EQ(s.codes(), codes);
  for (std::size_t i = 0; i < s.m.size(); ++i) EXPECT_EQ(s.p[i], s.m[i]);
  EXPECT_THROW(KernelSubset::from_codes(9, std::vector<KernelCode>{{1}, {2}, {3}}),
               ContractViolation);
}

TEST(Repair, DistinctSubsetUntouched) {
  auto s = KernelSubset::from_codes(
      9, std::vector<KernelCode>{{1}, {2}, {3}, {4}});
  Rng rng(1);
  EXPECT_TRUE(repair_duplicates(s, rng).empty());
  EXPECT_EQ(s.codes(), (std::vector<KernelCode>{{1}, {2}, {3}, {4}}));
}

TEST(Repair, ReplacesSecondOccurrence) {
  auto s = KernelSubset::from_codes(
      9, std::vector<KernelCode>{{10}, {10}, {20}, {30}});
  Rng rng(5);
  const auto rows = repair_duplicates(s, rng);
  ASSERT_EQ(rows, std::vector<int>{1});
  const auto c = s.codes();
  EXPECT_EQ(c[0].value, 10u);
  EXPECT_NE(c[1].value, 10u);
  EXPECT_NE(c[1].value, 20u);
  EXPECT_NE(c[1].value, 30u);
  for (int l = 0; l < 9; ++l) EXPECT_EQ(s.p[9 + l], s.m[9 + static_cast<std::size_t>(l)]);
}

TEST(Repair, RandomCorruptedSubsetsBecomeUnique) {
  Rng rng(123);
  for (int trial = 0; trial < 1000; ++trial) {
    const int tau = 1 + static_cast<int>(uniform_below(rng, 8));
    const int size = 1 << tau;
    // draw from a small pool so duplicates are common
    const std::uint32_t pool = 1 + static_cast<std::uint32_t>(uniform_below(rng, size));
    std::vector<KernelCode> codes;
    for (int j = 0; j < size; ++j)
      codes.push_back(KernelCode{1 + static_cast<std::uint32_t>(uniform_below(rng, pool))});
    auto s = KernelSubset::from_codes(9, codes);
    repair_duplicates(s, rng);
    ASSERT_TRUE(duplicate_free(s)) << "trial " << trial;
  }
}

TEST(Repair, FullUniverseOfTwoByTwo) {
  std::vector<KernelCode> codes(16, KernelCode{3});
  auto s = KernelSubset::from_codes(4, codes);
  Rng rng(9);
  EXPECT_EQ(repair_duplicates(s, rng).size(), 15u);
  EXPECT_TRUE(duplicate_free(s));
}

TEST(Histogram, CsvRoundTrip) {
  KernelHistogram h;
  h.counts = {std::vector<std::uint64_t>(512, 0), std::vector<std::uint64_t>(256, 0)};
  h.counts[0][0] = 3;
  h.counts[0][511] = 9;
  h.counts[1][17] = 4;
  std::stringstream ss;
  h.write_csv(ss);
  const std::vector<int> lengths{9, 8};
  const auto back = KernelHistogram::read_csv(ss, lengths);
  EXPECT_EQ(back.counts, h.counts);
  EXPECT_EQ(back.total(0), 12u);
}

TEST(Histogram, CsvRejectsGarbage) {
  const std::vector<int> lengths{9};
  std::stringstream bad("layer_index,code,count\n0;5;1\n");
  EXPECT_THROW(KernelHistogram::read_csv(bad, lengths), DataError);
  std::stringstream range("0,513,1\n");
  EXPECT_THROW(KernelHistogram::read_csv(range, lengths), DataError);
}

TEST(Histogram, TopCodes) {
  std::vector<std::uint64_t> counts(16, 1);
  counts[15] = 7;
  counts[2] = 7;
  const auto top = top_codes(counts, 1);
  EXPECT_EQ(top[0].value, 3u);
  EXPECT_EQ(top[1].value, 16u);
  EXPECT_THROW(top_codes(counts, 5), ConfigError);
}

}  // namespace
}  // namespace sbnn
