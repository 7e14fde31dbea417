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

#include "sbnn/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sbnn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0))
    throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (momentum < 0 || momentum >= 1)
    throw ConfigError("momentum must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigError("weight decay must be >= 0");
}

double cosine_learning_rate(const TrainConfig& config, int epoch) {
  return 0.5 * config.learning_rate *
         (1 + std::cos(std::numbers::pi * epoch / config.epochs));
}

void sgd_step(std::span<const ParamView> params, const TrainConfig& config,
              int epoch) {
  const double lr = cosine_learning_rate(config, epoch);
  for (const ParamView& p : params) {
    if (p.grad.size() != p.value.size() || p.momentum.size() != p.value.size())
      throw ContractViolation("parameter '" + std::string(p.name) +
                              "' has mismatched gradient or momentum buffer");
    const double decay = p.decay ? config.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const real g = p.grad[i] + decay * p.value[i];
      p.momentum[i] = config.momentum * p.momentum[i] + g;
      p.value[i] -= lr * p.momentum[i];
    }
  }
}

}  // namespace sbnn
