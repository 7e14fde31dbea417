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

#include <optional>
#include <string>
#include <vector>

#include "sbnn/config_text.hpp"
#include "sbnn/kernelspace.hpp"
#include "sbnn/quantlayer.hpp"

namespace sbnn {

enum class LayerKind {
  Conv,
  BatchNorm,
  Relu,
  Hardtanh,
  AvgPool,
  MaxPool,
  GlobalAvgPool,
  Linear,   // flattens its input
  Save,     // remembers the current activation under `name`
  Add,      // current + shortcut(saved activation `from`)
};

enum class Shortcut {
  Identity,
  Pad,   // strided subsample, zero channels padded on both sides
  Conv,  // 1x1 strided convolution followed by batch norm
};

std::string to_string(LayerKind kind);
std::string to_string(Shortcut shortcut);

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::string name;
  int c_out = 0;    // conv / fc (fc defaults to the class count)
  int k = 3;        // conv / pool
  int stride = 1;
  int pad = -1;     // -1: k/2 for conv, 0 for pool
  std::optional<bool> quantize;
  std::optional<bool> binarize_input;
  std::optional<UnitMode> unit;
  // Add only.
  std::string from;
  Shortcut shortcut = Shortcut::Identity;
  std::optional<bool> shortcut_quantize;

  bool operator==(const LayerSpec&) const = default;
};

struct Dims {
  int c = 0, h = 0, w = 0;
  bool operator==(const Dims&) const = default;
  std::string str() const;
};

struct ArchitectureSpec {
  int schema = 1;
  std::string name;
  Dims input;
  int classes = 0;
  std::vector<LayerSpec> layers;

  bool operator==(const ArchitectureSpec&) const = default;
};

// A layer that owns weights: a conv, an fc, or the projection of an Add.
struct WeightLayer {
  std::string name;
  int layer_index = 0;       // position in ArchitectureSpec::layers
  bool shortcut = false;     // projection conv of an Add
  bool linear = false;
  int c_in = 0, c_out = 0, k = 1, stride = 1, pad = 0;
  int h_out = 1, w_out = 1;
  bool quantized = false;
  bool binarize_input = false;
  UnitMode unit = UnitMode::Kernel;
  bool first = false;        // first weight layer of the network
  bool last = false;         // last weight layer (the classifier)

  std::size_t weight_count() const {
    return static_cast<std::size_t>(c_out) * c_in * k * k;
  }
  int unit_length() const { return sbnn::unit_length(unit, k); }
  int units() const { return unit_count(unit, c_out, c_in, k); }
  QuantConvSpec conv_spec() const;
};

struct ResolvedLayer {
  LayerSpec spec;  // defaults filled in (pad, quantize, unit)
  Dims in, out;
  int weight_index = -1;    // into ResolvedArchitecture::weights
  int shortcut_weight = -1; // projection conv of an Add
  Dims shortcut_in;
  int shortcut_stride = 1;
};

struct ResolvedArchitecture {
  ArchitectureSpec spec;
  std::vector<ResolvedLayer> layers;
  std::vector<WeightLayer> weights;

  // Indices into `weights` of the quantized layers, in network order. This is
  // the layer order of subsets, histograms and packed records.
  std::vector<int> quantized() const;
  std::vector<LayerShape> quantized_shapes() const;
};

// Validates the layer list, fills defaults and propagates shapes. Defaults:
// the first conv and every fc stay full precision, other convs are
// quantized, shortcut projections are full precision, quantized 1x1 convs
// use 8-wide vector units.
ResolvedArchitecture resolve(const ArchitectureSpec& spec);

// Reads the header keys (schema, name, input, classes, preset, geometry) and
// the [layers] section. When `preset` is set the layer list comes from the
// built-in builder instead; `geometry_override` replaces the file's geometry.
ArchitectureSpec architecture_from_document(
    ConfigDocument& doc, const std::string& geometry_override = "");
ArchitectureSpec parse_architecture(const std::string& text);
// Canonical text form; parse_architecture(format_architecture(a)) == a.
std::string format_architecture(const ArchitectureSpec& spec);

// Built-in networks. Geometry "cifar" (32x32 input, 3x3 stem) or "imagenet"
// (224x224 input, 7x7/2 stem and 3x3/2 max pool).
std::vector<std::string> preset_names();
ArchitectureSpec preset(const std::string& name,
                        const std::string& geometry = "cifar");

// Accepts a preset name, a preset name with "-cifar"/"-imagenet" suffix, or
// a config file path.
ArchitectureSpec load_architecture(const std::string& name_or_path,
                                   const std::string& geometry = "");

}  // namespace sbnn
