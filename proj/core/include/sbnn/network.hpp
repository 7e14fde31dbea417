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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sbnn/architecture.hpp"
#include "sbnn/autodiff.hpp"
#include "sbnn/kernelspace.hpp"
#include "sbnn/optim.hpp"
#include "sbnn/quantlayer.hpp"

namespace sbnn {

struct NetworkOptions {
  QuantMode mode = QuantMode::Bnn;
  int tau = 5;              // bits per k x k kernel
  int tau_vector = 0;       // bits per 8-wide vector; 0 means min(tau, 8)
  real theta = 1e-3;
  SamplingStrategy strategy;
  const KernelHistogram* histogram = nullptr;  // FrequencyTopK only
  std::uint64_t seed = 0;   // weight initialisation and repair streams

  int tau_for(int unit_length) const;
};

// A convolution that is either full precision or binarized.
struct ConvUnit {
  WeightLayer geometry;
  Parameter weight;                        // full-precision path
  std::unique_ptr<QuantConvLayer> quant;   // binarized path

  bool quantized() const { return quant != nullptr; }
  Var forward(Tape& tape, Var x, bool training);
};

struct NetworkNode {
  ResolvedLayer layer;
  std::optional<ConvUnit> conv;        // Conv
  std::optional<ops::BatchNormState> bn;
  Parameter fc_weight, fc_bias;        // Linear
  std::optional<ConvUnit> proj;        // Add with a conv shortcut
  std::optional<ops::BatchNormState> proj_bn;
};

class Network {
 public:
  Network(const ResolvedArchitecture& arch, NetworkOptions options);

  const ResolvedArchitecture& architecture() const { return arch_; }
  const NetworkOptions& options() const { return options_; }
  std::vector<NetworkNode>& nodes() { return nodes_; }
  const std::vector<NetworkNode>& nodes() const { return nodes_; }

  // Records the forward pass; x is (N, C, H, W).
  Var forward(Tape& tape, const Tensor& x, bool training);
  // Eval-mode logits (N, classes).
  Tensor predict(const Tensor& x);

  // Binarized layers in architecture order (ResolvedArchitecture::quantized).
  std::vector<QuantConvLayer*> quant_layers();
  std::vector<const QuantConvLayer*> quant_layers() const;

  void collect_parameters(std::vector<ParamView>& out);
  std::vector<ParamView> parameters();
  std::vector<ops::BatchNormState*> batch_norms();
  void zero_grad();

  // Per-iteration refinement hooks over all binarized layers.
  int refine();
  int repair();
  void clamp_latent();

 private:
  ResolvedArchitecture arch_;
  NetworkOptions options_;
  std::vector<NetworkNode> nodes_;
  std::vector<Rng> repair_rngs_;
};

}  // namespace sbnn
