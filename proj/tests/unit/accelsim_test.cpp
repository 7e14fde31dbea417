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
#include <map>
#include <sstream>

#include "sbnn/accelsim.hpp"

namespace sbnn {
namespace {

ResolvedArchitecture single_conv(int c_in, int c_out, int hw = 1) {
  const std::string text = "name = one\ninput = " + std::to_string(c_in) + "x" +
                           std::to_string(hw) + "x" + std::to_string(hw) +
                           "\nclasses = 2\n[layers]\nconv name=q c_out=" +
                           std::to_string(c_out) + " quantize=true\ngap\nfc\n";
  return resolve(parse_architecture(text));
}

ResolvedArchitecture arch_of(const std::string& name, const std::string& geo) {
  return resolve(preset(name, geo));
}

double speedup(const ResolvedArchitecture& a, int tau) {
  const HardwareConfig hw;
  return timeline(simulate_bnn(a, hw), simulate_snn(a, hw, tau)).speedup;
}

TEST(AccelSim, SinglePixelBnnLayer) {
  const HardwareConfig hw;
  const auto r = simulate_bnn(single_conv(64, 64), hw);
  ASSERT_EQ(r.layers.size(), 1u);
  EXPECT_EQ(r.layers[0].pre_compute, 64u);
  EXPECT_EQ(r.total_cycles, 64u + hw.fill_cycles);
  EXPECT_DOUBLE_EQ(r.time_ms, (64.0 + hw.fill_cycles) / 1e6);
}

TEST(AccelSim, SharedLayerSinglePe) {
  HardwareConfig hw;
  hw.pe_count = 1;
  const auto r = simulate_snn(single_conv(1, 64), hw, 5);
  ASSERT_EQ(r.layers.size(), 1u);
  const auto& l = r.layers[0];
  EXPECT_TRUE(l.shared);
  EXPECT_EQ(l.pre_compute, 32u);
  EXPECT_EQ(l.accumulate, 16u);  // 64 lookups over 4 accumulators
  EXPECT_EQ(l.line_buffer, 16u);  // 64 x 32 bits over 128 bits per cycle
  EXPECT_EQ(l.stall, 16u);
  EXPECT_EQ(l.pipelined, 32u + 32u + hw.fill_cycles);
}

TEST(AccelSim, SubsetAsLargeAsOutputFallsBack) {
  const HardwareConfig hw;
  const auto a = single_conv(16, 32, 4);
  const auto b = simulate_bnn(a, hw);
  const auto s = simulate_snn(a, hw, 5);
  EXPECT_FALSE(s.layers[0].shared);
  EXPECT_EQ(s.total_cycles, b.total_cycles);
  EXPECT_TRUE(simulate_snn(single_conv(16, 33, 4), hw, 5).layers[0].shared);
}

TEST(AccelSim, DoublingPesHalvesCompute) {
  HardwareConfig hw;
  hw.fill_cycles = 0;
  HardwareConfig wide = hw;
  wide.pe_count = 128;
  const auto a = arch_of("resnet18", "imagenet");
  const double bnn = static_cast<double>(simulate_bnn(a, hw).total_cycles) /
                     static_cast<double>(simulate_bnn(a, wide).total_cycles);
  EXPECT_NEAR(bnn, 2.0, 1e-3);
  const auto s1 = simulate_snn(a, hw, 5);
  const auto s2 = simulate_snn(a, wide, 5);
  for (std::size_t i = 0; i < s1.layers.size(); ++i)
    EXPECT_NEAR(static_cast<double>(s1.layers[i].pipelined - s1.layers[i].fill) /
                    static_cast<double>(s2.layers[i].pipelined - s2.layers[i].fill),
                2.0, 0.01)
        << s1.layers[i].name;
}

TEST(AccelSim, ResNet18ImageNetBnnTime) {
  const auto r = simulate_bnn(arch_of("resnet18", "imagenet"), HardwareConfig{});
  EXPECT_GE(r.time_ms, 3.626 * 0.75);
  EXPECT_LE(r.time_ms, 3.626 * 1.25);
}

TEST(AccelSim, ImageNetSpeedups) {
  const double r18 = speedup(arch_of("resnet18", "imagenet"), 5);
  const double r34 = speedup(arch_of("resnet34", "imagenet"), 5);
  EXPECT_GE(r18, 2.5);
  EXPECT_LE(r18, 3.9);
  EXPECT_GE(r34, 2.7);
  EXPECT_LE(r34, 4.2);
  EXPECT_GE(r34, r18);
}

TEST(AccelSim, SnnNeverSlowerPerLayer) {
  const HardwareConfig hw;
  for (const auto& [name, geo] : std::vector<std::pair<std::string, std::string>>{
           {"resnet18", "imagenet"}, {"resnet34", "imagenet"}, {"resnet20", "cifar"},
           {"resnet50", "cifar"}, {"vgg-small", "cifar"}}) {
    const auto a = arch_of(name, geo);
    for (int tau : {1, 3, 5, 7, 9}) {
      const auto t = timeline(simulate_bnn(a, hw), simulate_snn(a, hw, tau));
      EXPECT_TRUE(t.b_never_slower) << name << " tau " << tau;
      for (const auto& row : t.rows) EXPECT_LE(row.b_ms, row.a_ms) << row.name;
    }
  }
}

TEST(AccelSim, FullSetMatchesBnn) {
  const HardwareConfig hw;
  const auto a = arch_of("resnet18", "imagenet");
  EXPECT_EQ(simulate_snn(a, hw, 9).total_cycles, simulate_bnn(a, hw).total_cycles);
  EXPECT_DOUBLE_EQ(speedup(a, 9), 1.0);
}

TEST(AccelSim, SmallerSubsetsRunFaster) {
  const auto a = arch_of("resnet18", "imagenet");
  double prev = 0;
  for (int tau = 9; tau >= 3; --tau) {
    const double s = speedup(a, tau);
    EXPECT_GE(s, prev) << "tau " << tau;
    prev = s;
  }
}

// Best speedup of each stage, stages ordered by output width. Wide stages
// saturate at the accumulator count, so the order is non-strict past 128.
TEST(AccelSim, StageSpeedupGrowsWithWidth) {
  const HardwareConfig hw;
  for (const char* name : {"resnet18", "resnet34"}) {
    const auto a = arch_of(name, "imagenet");
    const auto t = timeline(simulate_bnn(a, hw), simulate_snn(a, hw, 5));
    std::map<int, double> stage;
    for (const auto& row : t.rows) stage[row.c_out] = std::max(stage[row.c_out], row.speedup);
    ASSERT_EQ(stage.size(), 4u);
    double prev = 0;
    for (const auto& [c_out, best] : stage) {
      EXPECT_GE(best, prev * (1 - 1e-12)) << name << " c_out " << c_out;
      prev = best;
    }
    EXPECT_GT(stage.at(128), 1.5 * stage.at(64));
    EXPECT_LE(stage.at(512), 4.0);
  }
}

TEST(AccelSim, EmptyArchitecture) {
  const auto a = resolve(parse_architecture(
      "name = flat\ninput = 3x4x4\nclasses = 2\n[layers]\ngap\nfc\n"));
  const HardwareConfig hw;
  const auto t = timeline(simulate_bnn(a, hw), simulate_snn(a, hw, 5));
  EXPECT_TRUE(t.rows.empty());
  EXPECT_DOUBLE_EQ(t.speedup, 1.0);
  EXPECT_TRUE(t.b_never_slower);
}

TEST(AccelSim, TimelineMismatch) {
  const HardwareConfig hw;
  EXPECT_THROW(timeline(simulate_bnn(arch_of("resnet18", "imagenet"), hw),
                        simulate_bnn(arch_of("resnet20", "cifar"), hw)),
               ConfigError);
}

TEST(AccelSim, DeterministicOutput) {
  const HardwareConfig hw;
  const auto a = arch_of("resnet20", "cifar");
  EXPECT_EQ(simulate_snn(a, hw, 4).to_json(), simulate_snn(a, hw, 4).to_json());
  std::ostringstream x, y;
  timeline(simulate_bnn(a, hw), simulate_snn(a, hw, 4)).write_csv(x);
  timeline(simulate_bnn(a, hw), simulate_snn(a, hw, 4)).write_csv(y);
  EXPECT_EQ(x.str(), y.str());
  EXPECT_FALSE(x.str().empty());
}

TEST(AccelSim, HardwareValidation) {
  const auto a = single_conv(8, 8);
  HardwareConfig hw;
  hw.pe_count = 0;
  EXPECT_THROW(simulate_bnn(a, hw), ConfigError);
  hw = {};
  hw.clock_ghz = 0;
  EXPECT_THROW(simulate_snn(a, hw, 2), ConfigError);
  hw = {};
  hw.accumulators_per_pe = -1;
  EXPECT_THROW(hw.validate(), ConfigError);
  EXPECT_THROW(simulate_snn(a, HardwareConfig{}, 0), ConfigError);
}

TEST(AccelSim, ClockScalesTime) {
  const auto a = arch_of("resnet20", "cifar");
  HardwareConfig fast;
  fast.clock_ghz = 2.0;
  const auto s = simulate_bnn(a, HardwareConfig{});
  const auto f = simulate_bnn(a, fast);
  EXPECT_EQ(s.total_cycles, f.total_cycles);
  EXPECT_DOUBLE_EQ(s.time_ms, 2 * f.time_ms);
}

}  // namespace
}  // namespace sbnn
