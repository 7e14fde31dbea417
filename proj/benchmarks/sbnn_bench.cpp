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

#include <benchmark/benchmark.h>

#include "engine_util.hpp"
#include "sbnn/accelsim.hpp"
#include "sbnn/costmodel.hpp"
#include "sbnn/tensor_ops.hpp"

namespace {

using namespace sbnn;

// args: c_in, c_out, tau, spatial size
struct LayerFixture {
  EngineLayer layer;
  Bitplanes in;
  LayerFixture(int c_in, int c_out, int tau, int hw)
      : layer([&] {
          Rng rng(1);
          return EngineLayer(test::random_packed_layer(rng, c_in, c_out, tau));
        }()),
        in([&] {
          Rng rng(2);
          return Bitplanes::pack(test::random_pm1(Shape{1, c_in, hw, hw}, rng));
        }()) {}
};

void BM_ConvXnor(benchmark::State& state) {
  LayerFixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                 static_cast<int>(state.range(2)), static_cast<int>(state.range(3)));
  for (auto _ : state) benchmark::DoNotOptimize(conv_xnor_popcount(f.in, f.layer));
}

void BM_ConvShared(benchmark::State& state) {
  LayerFixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                 static_cast<int>(state.range(2)), static_cast<int>(state.range(3)));
  for (auto _ : state) benchmark::DoNotOptimize(conv_shared(f.in, f.layer));
}

#define LAYER_ARGS                     \
  Args({64, 64, 5, 16})                \
      ->Args({128, 128, 5, 8})         \
      ->Args({256, 256, 5, 8})         \
      ->Args({256, 256, 3, 8})         \
      ->Args({128, 128, 9, 8})

BENCHMARK(BM_ConvXnor)->LAYER_ARGS;
BENCHMARK(BM_ConvShared)->LAYER_ARGS;

void BM_Conv2dFp(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(3);
  const Tensor x = test::random_tensor(Shape{8, c, 16, 16}, rng);
  const Tensor w = test::random_tensor(Shape{c, c, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_fp(x, w, nullptr, 1, 1));
}
BENCHMARK(BM_Conv2dFp)->Arg(16)->Arg(32)->Arg(64);

void BM_CostReport(benchmark::State& state) {
  const auto arch = resolve(preset("resnet50", "imagenet"));
  CostOptions o;
  o.mode = QuantMode::Snn;
  o.tau = 5;
  for (auto _ : state) benchmark::DoNotOptimize(cost_report(arch, o));
}
BENCHMARK(BM_CostReport);

void BM_Simulate(benchmark::State& state) {
  const auto arch = resolve(preset("resnet34", "imagenet"));
  const HardwareConfig hw;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_snn(arch, hw, 5));
}
BENCHMARK(BM_Simulate);

}  // namespace

BENCHMARK_MAIN();
