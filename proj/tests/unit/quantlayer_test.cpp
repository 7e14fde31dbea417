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

#include <cmath>

#include "oracles.hpp"
#include "sbnn/quantlayer.hpp"
#include "sbnn/tensor_ops.hpp"
#include "test_util.hpp"

namespace sbnn {
namespace {

using test::random_tensor;

KernelSubset full_set(int n) {
  std::vector<KernelCode> codes;
  for (std::uint32_t c = universe_size(n); c >= 1; --c) codes.push_back(KernelCode{c});
  return KernelSubset::from_codes(n, codes);
}

TEST(BinarizeBnn, ZeroGoesToPlus) {
  const std::vector<real> w{-0.3, 0.7, 0.0};
  EXPECT_EQ(binarize_bnn(w), (std::vector<std::int8_t>{-1, 1, 1}));
}

TEST(BinarizeBnn, AlreadyBinaryUnchanged) {
  const std::vector<real> w{1, -1, -1, 1};
  EXPECT_EQ(binarize_bnn(w), (std::vector<std::int8_t>{1, -1, -1, 1}));
}

TEST(BinarizeBnn, MatchesExhaustiveSearch) {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    std::vector<real> w(9);
    for (real& v : w) v = uniform(rng, -1, 1);
    EXPECT_EQ(binarize_bnn(w), test::exhaustive_binary(w));
  }
}

TEST(SelectMember, ExactMemberHasZeroCost) {
  Rng rng(4);
  const auto s = sample_random_subset(9, 4, rng);
  for (int j = 0; j < s.size(); ++j) {
    std::vector<real> w(s.member(j).begin(), s.member(j).end());
    EXPECT_EQ(select_member(s, w), j);
  }
}

TEST(SelectMember, MatchesExhaustiveL2) {
  Rng rng(21);
  for (int tau = 1; tau <= 8; ++tau) {
    const auto s = sample_random_subset(9, tau, rng);
    for (int t = 0; t < 300; ++t) {
      std::vector<real> w(9);
      for (real& v : w) v = uniform(rng, -1, 1);
      ASSERT_EQ(select_member(s, w), test::exhaustive_member(s, w)) << "tau " << tau;
    }
  }
}

TEST(SelectMember, TiesGoToLowestIndex) {
  const auto s = KernelSubset::from_codes(
      9, std::vector<KernelCode>{{512}, {1}});
  EXPECT_EQ(select_member(s, std::vector<real>(9, 0.0)), 0);
}

TEST(BinarizeSnn, FullSetEqualsBnn) {
  Rng rng(5);
  const Tensor w = random_tensor(Shape{4, 3, 3, 3}, rng);
  const auto bin = binarize_snn_forward(w, full_set(9));
  EXPECT_EQ(bin.weights, binarize_bnn(w));
  Tensor z(Shape{1, 1, 3, 3});
  EXPECT_EQ(binarize_snn_forward(z, full_set(9)).weights, Tensor(z.shape(), 1.0));
}

TEST(BinarizeSnn, CodesIndexMembers) {
  Rng rng(6);
  const auto s = sample_random_subset(9, 3, rng);
  const Tensor w = random_tensor(Shape{5, 2, 3, 3}, rng);
  const auto bin = binarize_snn_forward(w, s);
  ASSERT_EQ(bin.codes.size(), 10u);
  for (std::size_t u = 0; u < 10; ++u) {
    const auto m = s.member(bin.codes[u]);
    for (std::size_t l = 0; l < 9; ++l) EXPECT_EQ(bin.weights[u * 9 + l], m[l]);
  }
}

TEST(Ste, ClippedToOpenInterval) {
  const Tensor w(Shape{5}, std::vector<real>{0.5, 1.5, 1.0, -1.0, -0.99});
  const Tensor g(Shape{5}, 2.0);
  const Tensor out = ste_backward_w(g, w);
  EXPECT_EQ(out, Tensor(Shape{5}, std::vector<real>{2, 0, 0, 0, 2}));
}

TEST(Refine, BelowThresholdKeepsSign) {
  auto s = KernelSubset::from_codes(9, std::vector<KernelCode>{{1}, {2}});
  s.p[0] = 0.0005;
  EXPECT_EQ(refine_update_m(s, 1e-3), 0);
  EXPECT_EQ(s.m[0], -1);
}

TEST(Refine, AboveThresholdFlips) {
  auto s = KernelSubset::from_codes(9, std::vector<KernelCode>{{1}, {2}});
  s.p[0] = 0.002;
  EXPECT_EQ(refine_update_m(s, 1e-3), 1);
  EXPECT_EQ(s.m[0], 1);
}

TEST(Refine, ZeroPLeavesEverything) {
  auto s = KernelSubset::from_codes(9, std::vector<KernelCode>{{77}, {300}});
  const auto before = s.m;
  s.p.fill(0);
  EXPECT_EQ(refine_update_m(s, 1e-3), 0);
  EXPECT_EQ(s.m, before);
  EXPECT_THROW(refine_update_m(s, -1), ConfigError);
}

TEST(PGrad, UnassignedRowIsZero) {
  const auto s = KernelSubset::from_codes(9, std::vector<KernelCode>{{1}, {2}});
  const std::vector<std::uint16_t> codes{0, 0};
  const Tensor g(Shape{2, 9}, 1.0);
  const Tensor pg = accumulate_p_grad(s, codes, g);
  for (int l = 0; l < 9; ++l) {
    EXPECT_EQ(pg[static_cast<std::size_t>(l)], 2.0);
    EXPECT_EQ(pg[static_cast<std::size_t>(9 + l)], 0.0);
  }
}

TEST(PGrad, MatchesScatterAddOracle) {
  Rng rng(8);
  const auto s = sample_random_subset(9, 4, rng);
  const Tensor w = random_tensor(Shape{8, 6, 3, 3}, rng);
  const auto bin = binarize_snn_forward(w, s);
  const Tensor g = random_tensor(w.shape(), rng);
  const Tensor pg = accumulate_p_grad(s, bin.codes, g);
  for (int j = 0; j < s.size(); ++j)
    for (int l = 0; l < 9; ++l) {
      double want = 0;
      for (std::size_t u = 0; u < bin.codes.size(); ++u)
        if (bin.codes[u] == j) want += g[u * 9 + static_cast<std::size_t>(l)];
      EXPECT_NEAR(pg[static_cast<std::size_t>(j * 9 + l)], want, 1e-12);
    }
}

TEST(PGrad, RejectsStaleAssignment) {
  const auto s = KernelSubset::from_codes(9, std::vector<KernelCode>{{1}, {2}});
  const std::vector<std::uint16_t> codes{0};
  EXPECT_THROW(accumulate_p_grad(s, codes, Tensor(Shape{2, 9})), ContractViolation);
  const std::vector<std::uint16_t> bad{5};
  EXPECT_THROW(accumulate_p_grad(s, bad, Tensor(Shape{1, 9})), ContractViolation);
}

TEST(RefineFuzz, InvariantsHold) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto r = test::refine_fuzz(seed, 500);
    EXPECT_EQ(r.threshold_violations, 0);
    EXPECT_EQ(r.unselected_grad_rows, 0);
    EXPECT_EQ(r.duplicate_subsets, 0);
    EXPECT_GT(r.repairs, 0);
    EXPECT_GT(r.flips, 0);
  }
}

TEST(Scaling, MeanAbsRoundedToFloat) {
  const Tensor w(Shape{2, 1, 1, 3}, std::vector<real>{0.1, -0.2, 0.3, 1, 1, -1});
  const auto l = channel_scaling(w);
  EXPECT_EQ(l[0], static_cast<real>(static_cast<float>(0.6 / 3)));
  EXPECT_EQ(l[1], 1.0);
}

TEST(VectorMode, UnitGeometry) {
  EXPECT_EQ(unit_length(UnitMode::Vector1x1, 1), 8);
  EXPECT_EQ(unit_count(UnitMode::Vector1x1, 256, 64, 1), 256 * 8);
  EXPECT_THROW(unit_count(UnitMode::Vector1x1, 4, 12, 1), ConfigError);
  EXPECT_THROW(unit_count(UnitMode::Vector1x1, 4, 16, 3), ConfigError);
}

TEST(VectorMode, SelectionsMatchExhaustiveSearch) {
  Rng rng(31);
  for (int tau = 1; tau <= 7; ++tau) {
    const auto s = sample_random_subset(8, tau, rng);
    const Tensor w = random_tensor(Shape{16, 32, 1, 1}, rng);
    const auto bin = binarize_snn_forward(w, s);
    for (std::size_t u = 0; u < bin.codes.size(); ++u)
      ASSERT_EQ(bin.codes[u], test::exhaustive_member(s, w.values().subspan(u * 8, 8)));
  }
}

TEST(VectorMode, FullSetIsElementwiseSign) {
  Rng rng(2);
  const Tensor w = random_tensor(Shape{4, 16, 1, 1}, rng);
  EXPECT_EQ(binarize_snn_forward(w, full_set(8)).weights, binarize_bnn(w));
}

class QuantLayerTest : public ::testing::Test {
 protected:
  QuantConvSpec spec() const {
    QuantConvSpec s;
    s.c_in = 2;
    s.c_out = 3;
    return s;
  }
};

TEST_F(QuantLayerTest, ForwardIsScaledBinaryConv) {
  Rng rng(3);
  QuantConvLayer layer("q", spec(), QuantMode::Bnn, std::nullopt, 1e-3, rng);
  const Tensor x = random_tensor(Shape{1, 2, 5, 5}, rng);
  Tape t;
  const Var y = layer.forward(t, t.constant(x), false);
  Tensor want = kernels::conv2d_fp(x, binarize_bnn(layer.weight().value), nullptr, 1, 1);
  want = kernels::scale_channels(want, channel_scaling(layer.weight().value));
  EXPECT_EQ(t.value(y), want);
}

TEST_F(QuantLayerTest, UnitScalingMatchesPlainConvOnBinaryData) {
  Rng rng(9);
  QuantConvLayer layer("q", spec(), QuantMode::Bnn, std::nullopt, 1e-3, rng);
  layer.weight().value = test::random_pm1(layer.weight().value.shape(), rng);
  const Tensor x = test::random_pm1(Shape{1, 2, 4, 4}, rng);
  Tape t;
  const Var y = layer.forward(t, t.constant(x), false);
  EXPECT_EQ(t.value(y), kernels::conv2d_fp(x, layer.weight().value, nullptr, 1, 1));
}

TEST_F(QuantLayerTest, GradientsReachLatentAndSubset) {
  Rng rng(12);
  auto subset = sample_random_subset(9, 2, rng);
  QuantConvLayer layer("q", spec(), QuantMode::Snn, subset, 1e-3, rng);
  layer.zero_grad();
  Tape t;
  const Tensor x = random_tensor(Shape{2, 2, 4, 4}, rng);
  const Var y = layer.forward(t, t.constant(x), true);
  t.backward(test::weighted_sum(t, y, random_tensor(t.value(y).shape(), rng)));
  double wg = 0, pg = 0;
  for (real v : layer.weight().grad.values()) wg += std::abs(v);
  for (real v : layer.p_grad().values()) pg += std::abs(v);
  EXPECT_GT(wg, 0);
  EXPECT_GT(pg, 0);
  std::vector<ParamView> views;
  layer.collect_parameters(views);
  EXPECT_EQ(views.size(), 2u);
}

TEST_F(QuantLayerTest, StaleBackwardIsRejected) {
  Rng rng(12);
  QuantConvLayer layer("q", spec(), QuantMode::Snn, sample_random_subset(9, 2, rng),
                       0.0, rng);
  Tape t;
  const Var y = layer.forward(t, t.constant(random_tensor(Shape{1, 2, 3, 3}, rng)), true);
  // a new forward pass invalidates the first tape's assignment
  Tape t2;
  layer.forward(t2, t2.constant(Tensor(Shape{1, 2, 3, 3})), true);
  EXPECT_THROW(t.backward(test::weighted_sum(t, y, Tensor(t.value(y).shape(), 1.0))),
               ContractViolation);
}

TEST_F(QuantLayerTest, FullSetLayerDoesNotRefine) {
  Rng rng(1);
  QuantConvLayer layer("q", spec(), QuantMode::Snn, full_set(9), 1e-3, rng);
  EXPECT_FALSE(layer.refines());
  std::vector<ParamView> views;
  layer.collect_parameters(views);
  EXPECT_EQ(views.size(), 1u);
}

TEST_F(QuantLayerTest, ConstructionErrors) {
  Rng rng(1);
  EXPECT_THROW(QuantConvLayer("q", spec(), QuantMode::Snn, std::nullopt, 1e-3, rng),
               ConfigError);
  EXPECT_THROW(QuantConvLayer("q", spec(), QuantMode::FullPrecision, std::nullopt, 0, rng),
               ConfigError);
  EXPECT_THROW(QuantConvLayer("q", spec(), QuantMode::VanillaSnn,
                              sample_random_subset(8, 2, rng), 0, rng),
               ConfigError);
}

TEST_F(QuantLayerTest, ClampLatent) {
  Rng rng(1);
  QuantConvLayer layer("q", spec(), QuantMode::Bnn, std::nullopt, 0, rng);
  layer.weight().value[0] = 3;
  layer.weight().value[1] = -2;
  layer.clamp_latent();
  EXPECT_EQ(layer.weight().value[0], 1);
  EXPECT_EQ(layer.weight().value[1], -1);
}

TEST(QuantModeNames, RoundTrip) {
  for (QuantMode m : {QuantMode::FullPrecision, QuantMode::Bnn, QuantMode::VanillaSnn,
                      QuantMode::Snn})
    EXPECT_EQ(parse_quant_mode(to_string(m)), m);
  EXPECT_THROW(parse_quant_mode("ternary"), ConfigError);
}

}  // namespace
}  // namespace sbnn
