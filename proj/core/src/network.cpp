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

#include "sbnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sbnn/error.hpp"

namespace sbnn {
namespace {

Tensor kaiming(Shape shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const real std_dev = std::sqrt(2.0 / fan_in);
  for (auto& v : t.values()) v = normal(rng) * std_dev;
  return t;
}

}  // namespace

int NetworkOptions::tau_for(int unit_length) const {
  if (unit_length == kVectorWidth && tau_vector > 0) return tau_vector;
  return std::min(tau, unit_length);
}

Var ConvUnit::forward(Tape& tape, Var x, bool training) {
  if (quant) return quant->forward(tape, x, training);
  const Var w = training ? tape.parameter(weight) : tape.constant(weight.value);
  return ops::conv2d(tape, x, w, geometry.stride, geometry.pad);
}

Network::Network(const ResolvedArchitecture& arch, NetworkOptions options)
    : arch_(arch), options_(std::move(options)) {
  const bool binarized = options_.mode != QuantMode::FullPrecision;
  const bool with_subsets = options_.mode == QuantMode::VanillaSnn ||
                            options_.mode == QuantMode::Snn;
  if (!(options_.theta >= 0)) throw ConfigError("theta must be >= 0");

  std::vector<KernelSubset> subsets;
  if (with_subsets) {
    auto shapes = arch_.quantized_shapes();
    for (auto& s : shapes) {
      s.tau = options_.tau_for(s.unit_length);
      validate_tau(s.tau, s.unit_length);
    }
    subsets = sample_subsets(shapes, options_.tau, options_.strategy,
                             options_.histogram);
  }
  options_.histogram = nullptr;  // only needed while sampling

  Rng init(derive_seed(options_.seed, "init"));
  std::size_t next_subset = 0;
  auto make_conv = [&](const WeightLayer& g) {
    ConvUnit u;
    u.geometry = g;
    if (binarized && g.quantized) {
      std::optional<KernelSubset> subset;
      if (with_subsets) subset = std::move(subsets.at(next_subset));
      ++next_subset;
      u.quant = std::make_unique<QuantConvLayer>(
          g.name, g.conv_spec(), options_.mode, std::move(subset),
          options_.theta, init);
      repair_rngs_.emplace_back(derive_seed(
          options_.seed, "repair", static_cast<std::uint64_t>(repair_rngs_.size())));
    } else {
      if (g.quantized) ++next_subset;
      const int fan_in = g.c_in * g.k * g.k;
      u.weight = Parameter(g.name + ".weight",
                           kaiming(Shape{g.c_out, g.c_in, g.k, g.k}, fan_in, init));
    }
    return u;
  };

  for (const auto& layer : arch_.layers) {
    NetworkNode node;
    node.layer = layer;
    const auto& spec = layer.spec;
    switch (spec.kind) {
      case LayerKind::Conv:
        node.conv = make_conv(arch_.weights[static_cast<std::size_t>(layer.weight_index)]);
        break;
      case LayerKind::BatchNorm:
        node.bn.emplace(layer.in.c, spec.name);
        break;
      case LayerKind::Linear: {
        const auto& g = arch_.weights[static_cast<std::size_t>(layer.weight_index)];
        node.fc_weight = Parameter(spec.name + ".weight",
                                   kaiming(Shape{g.c_out, g.c_in}, g.c_in, init));
        node.fc_bias = Parameter(spec.name + ".bias", Tensor(Shape{g.c_out}), false);
        break;
      }
      case LayerKind::Add:
        if (layer.shortcut_weight >= 0) {
          node.proj = make_conv(arch_.weights[static_cast<std::size_t>(layer.shortcut_weight)]);
          node.proj_bn.emplace(layer.out.c, spec.name + ".proj_bn");
        }
        break;
      default:
        break;
    }
    nodes_.push_back(std::move(node));
  }
}

Var Network::forward(Tape& tape, const Tensor& x, bool training) {
  const Dims in = arch_.spec.input;
  if (x.rank() != 4 || x.dim(1) != in.c || x.dim(2) != in.h || x.dim(3) != in.w)
    throw ContractViolation("network input " + x.shape().str() +
                            " does not match " + in.str());
  std::map<std::string, Var> saved;
  Var cur = tape.constant(x);
  for (auto& node : nodes_) {
    const auto& spec = node.layer.spec;
    switch (spec.kind) {
      case LayerKind::Conv:
        cur = node.conv->forward(tape, cur, training);
        break;
      case LayerKind::BatchNorm:
        cur = ops::batch_norm(tape, cur, *node.bn, training);
        break;
      case LayerKind::Relu:
        cur = ops::relu(tape, cur);
        break;
      case LayerKind::Hardtanh:
        cur = ops::hardtanh(tape, cur);
        break;
      case LayerKind::AvgPool:
        cur = ops::avg_pool(tape, cur, spec.k, spec.stride, spec.pad);
        break;
      case LayerKind::MaxPool:
        cur = ops::max_pool(tape, cur, spec.k, spec.stride, spec.pad);
        break;
      case LayerKind::GlobalAvgPool:
        cur = ops::global_avg_pool(tape, cur);
        break;
      case LayerKind::Linear: {
        const Var w = training ? tape.parameter(node.fc_weight)
                               : tape.constant(node.fc_weight.value);
        const Var b = training ? tape.parameter(node.fc_bias)
                               : tape.constant(node.fc_bias.value);
        cur = ops::linear(tape, cur, w, b);
        break;
      }
      case LayerKind::Save:
        saved[spec.name] = cur;
        break;
      case LayerKind::Add: {
        Var sc = saved.at(spec.from);
        switch (spec.shortcut) {
          case Shortcut::Identity:
            break;
          case Shortcut::Pad:
            sc = ops::shortcut_pad(tape, sc, node.layer.out.c,
                                   node.layer.shortcut_stride);
            break;
          case Shortcut::Conv:
            sc = node.proj->forward(tape, sc, training);
            sc = ops::batch_norm(tape, sc, *node.proj_bn, training);
            break;
        }
        cur = ops::add(tape, cur, sc);
        break;
      }
    }
  }
  return cur;
}

Tensor Network::predict(const Tensor& x) {
  Tape tape;
  return tape.value(forward(tape, x, false));
}

std::vector<QuantConvLayer*> Network::quant_layers() {
  // Node order matches ResolvedArchitecture::weights: a projection conv is
  // listed at its Add.
  std::vector<QuantConvLayer*> out;
  for (auto& node : nodes_)
    for (auto* u : {node.conv ? &*node.conv : nullptr,
                    node.proj ? &*node.proj : nullptr})
      if (u && u->quant) out.push_back(u->quant.get());
  return out;
}

std::vector<const QuantConvLayer*> Network::quant_layers() const {
  std::vector<const QuantConvLayer*> out;
  for (auto* q : const_cast<Network*>(this)->quant_layers()) out.push_back(q);
  return out;
}

void Network::collect_parameters(std::vector<ParamView>& out) {
  for (auto& node : nodes_) {
    for (auto* u : {node.conv ? &*node.conv : nullptr,
                    node.proj ? &*node.proj : nullptr}) {
      if (!u) continue;
      if (u->quant)
        u->quant->collect_parameters(out);
      else
        out.push_back(ParamView::of(u->weight));
    }
    for (auto* bn : {node.bn ? &*node.bn : nullptr,
                     node.proj_bn ? &*node.proj_bn : nullptr})
      if (bn) {
        out.push_back(ParamView::of(bn->gamma));
        out.push_back(ParamView::of(bn->beta));
      }
    if (node.layer.spec.kind == LayerKind::Linear) {
      out.push_back(ParamView::of(node.fc_weight));
      out.push_back(ParamView::of(node.fc_bias));
    }
  }
}

std::vector<ParamView> Network::parameters() {
  std::vector<ParamView> out;
  collect_parameters(out);
  return out;
}

std::vector<ops::BatchNormState*> Network::batch_norms() {
  std::vector<ops::BatchNormState*> out;
  for (auto& node : nodes_) {
    if (node.bn) out.push_back(&*node.bn);
    if (node.proj_bn) out.push_back(&*node.proj_bn);
  }
  return out;
}

void Network::zero_grad() {
  for (auto& node : nodes_) {
    for (auto* u : {node.conv ? &*node.conv : nullptr,
                    node.proj ? &*node.proj : nullptr}) {
      if (!u) continue;
      if (u->quant)
        u->quant->zero_grad();
      else
        u->weight.zero_grad();
    }
    for (auto* bn : {node.bn ? &*node.bn : nullptr,
                     node.proj_bn ? &*node.proj_bn : nullptr})
      if (bn) {
        bn->gamma.zero_grad();
        bn->beta.zero_grad();
      }
    node.fc_weight.zero_grad();
    node.fc_bias.zero_grad();
  }
}

int Network::refine() {
  int flips = 0;
  for (auto* q : quant_layers()) flips += q->refine();
  return flips;
}

int Network::repair() {
  int replaced = 0;
  auto layers = quant_layers();
  for (std::size_t i = 0; i < layers.size(); ++i)
    replaced += static_cast<int>(layers[i]->repair(repair_rngs_[i]).size());
  return replaced;
}

void Network::clamp_latent() {
  for (auto* q : quant_layers()) q->clamp_latent();
}

}  // namespace sbnn
