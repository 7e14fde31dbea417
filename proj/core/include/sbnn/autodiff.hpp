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

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sbnn/tensor.hpp"

namespace sbnn {

// A trainable tensor with its gradient and optimizer state. Owned by layers;
// the tape only keeps pointers for the duration of one step.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor momentum;
  bool decay = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool apply_decay = true)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.shape()),
        momentum(value.shape()),
        decay(apply_decay) {}

  void zero_grad() { grad.fill(0); }
};

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  std::size_t id() const { return id_; }
  bool valid() const { return id_ != kInvalid; }

 private:
  friend class Tape;
  explicit Var(std::size_t id) : id_(id) {}
  static constexpr std::size_t kInvalid = static_cast<std::size_t>(-1);
  std::size_t id_ = kInvalid;
};

// Records a forward computation and replays it in reverse. A tape is single
// use: backward() consumes it; record a new forward pass on a fresh tape (or
// after clear()) before the next backward().
class Tape {
 public:
  // Called with the node's accumulated output gradient.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Var constant(Tensor value);
  // Leaf bound to a parameter; its gradient is added into param.grad.
  Var parameter(Parameter& param);
  // Generic node. `inputs` are only used to decide whether the node needs a
  // gradient at all.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  // Leaf with a custom gradient sink (used for straight-through weights).
  Var leaf_with_sink(Tensor value, std::function<void(const Tensor&)> sink);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  // Adds g into the gradient buffer of v (no-op for constants).
  void accumulate(Var v, const Tensor& g);

  // Reverse pass from a scalar node. Throws ContractViolation when called a
  // second time without a new forward pass.
  void backward(Var loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Differentiable operations. Each records one node on the tape.
namespace ops {

Var conv2d(Tape& tape, Var x, Var w, int stride, int pad);
Var conv2d(Tape& tape, Var x, Var w, Var bias, int stride, int pad);
Var linear(Tape& tape, Var x, Var w, Var bias);
Var relu(Tape& tape, Var x);
Var hardtanh(Tape& tape, Var x);
// sign(x) forward (sign(0) = +1); straight-through gradient clipped to |x| < 1.
Var sign_ste(Tape& tape, Var x);
Var avg_pool(Tape& tape, Var x, int k, int stride, int pad);
Var max_pool(Tape& tape, Var x, int k, int stride, int pad);
Var global_avg_pool(Tape& tape, Var x);
Var add(Tape& tape, Var a, Var b);
// Per-channel constant scale (no gradient w.r.t. the scale).
Var scale_channels(Tape& tape, Var x, std::vector<real> scale);
Var shortcut_pad(Tape& tape, Var x, int c_out, int stride);

// Running statistics and affine parameters of a batch-norm layer.
struct BatchNormState {
  Parameter gamma;
  Parameter beta;
  std::vector<real> running_mean;
  std::vector<real> running_var;
  real momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  real eps = 1e-5;

  explicit BatchNormState(int channels = 0, const std::string& name = "bn");
  int channels() const { return static_cast<int>(running_mean.size()); }
};

// Training mode normalises with batch statistics (biased variance) and
// updates the running statistics; eval mode uses the running statistics.
Var batch_norm(Tape& tape, Var x, BatchNormState& state, bool training);

// Mean softmax cross-entropy over the batch; logits are (N, classes).
Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels);

}  // namespace ops
}  // namespace sbnn
