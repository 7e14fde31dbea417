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
#include <span>
#include <string_view>
#include <vector>

#include "sbnn/autodiff.hpp"

namespace sbnn {

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 256;
  int epochs = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

// 0.5 * lr0 * (1 + cos(pi * epoch / epochs)).
double cosine_learning_rate(const TrainConfig& config, int epoch);

// Mutable view of one trainable buffer and its optimizer state. Lets the
// optimizer update tensors that live inside other structures (the refinement
// tensor of a kernel subset).
struct ParamView {
  std::string_view name;
  std::span<real> value;
  std::span<const real> grad;
  std::span<real> momentum;
  bool decay = true;

  static ParamView of(Parameter& p) {
    return {p.name, p.value.values(), p.grad.values(), p.momentum.values(),
            p.decay};
  }
};

// One SGD step with momentum:
//   v = momentum * v + (g + decay * w);  w -= lr * v
// where decay is config.weight_decay for views with decay == true.
void sgd_step(std::span<const ParamView> params, const TrainConfig& config,
              int epoch);

}  // namespace sbnn
