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

#include "sbnn/architecture.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "sbnn/error.hpp"

namespace sbnn {
namespace {

int extent(int in, int k, int stride, int pad, const std::string& what) {
  if (k < 1 || stride < 1 || pad < 0)
    throw ConfigError(what + ": k and stride must be >= 1, pad >= 0");
  const int span = in + 2 * pad - k;
  if (span < 0)
    throw ConfigError(what + ": window " + std::to_string(k) +
                      " does not fit input extent " + std::to_string(in));
  return span / stride + 1;
}

std::string layer_label(const LayerSpec& l, std::size_t i) {
  return l.name.empty() ? to_string(l.kind) + std::to_string(i) : l.name;
}

const std::map<std::string, LayerKind>& kind_names() {
  static const std::map<std::string, LayerKind> m = {
      {"conv", LayerKind::Conv},         {"bn", LayerKind::BatchNorm},
      {"relu", LayerKind::Relu},         {"hardtanh", LayerKind::Hardtanh},
      {"avgpool", LayerKind::AvgPool},   {"maxpool", LayerKind::MaxPool},
      {"gap", LayerKind::GlobalAvgPool}, {"fc", LayerKind::Linear},
      {"save", LayerKind::Save},         {"add", LayerKind::Add}};
  return m;
}

const std::set<std::string>& allowed_options(LayerKind kind) {
  static const std::map<LayerKind, std::set<std::string>> m = {
      {LayerKind::Conv,
       {"name", "c_out", "k", "stride", "pad", "quantize", "binarize_input",
        "unit"}},
      {LayerKind::BatchNorm, {"name"}},
      {LayerKind::Relu, {"name"}},
      {LayerKind::Hardtanh, {"name"}},
      {LayerKind::AvgPool, {"name", "k", "stride", "pad"}},
      {LayerKind::MaxPool, {"name", "k", "stride", "pad"}},
      {LayerKind::GlobalAvgPool, {"name"}},
      {LayerKind::Linear, {"name", "c_out", "quantize"}},
      {LayerKind::Save, {"name"}},
      {LayerKind::Add, {"name", "from", "shortcut", "shortcut_quantize"}}};
  return m.at(kind);
}

int parse_int(const std::string& v, const std::string& where) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size())
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected true or false, got '" + v + "'");
}

Dims parse_dims(const std::string& v) {
  Dims d;
  char x1 = 0, x2 = 0;
  std::istringstream in(v);
  if (!(in >> d.c >> x1 >> d.h >> x2 >> d.w) || x1 != 'x' || x2 != 'x' ||
      !in.eof() || d.c < 1 || d.h < 1 || d.w < 1)
    throw ConfigError("input must look like 3x32x32, got '" + v + "'");
  return d;
}

LayerSpec parse_layer(const ConfigDocument::Line& line) {
  const LayerLine parts = split_layer_line(line.text, line.number);
  const std::string at = "line " + std::to_string(line.number);
  const auto kit = kind_names().find(parts.kind);
  if (kit == kind_names().end())
    throw ConfigError(at + ": unknown layer kind '" + parts.kind + "'");
  LayerSpec l;
  l.kind = kit->second;
  const auto& allowed = allowed_options(l.kind);
  std::set<std::string> seen;
  for (const auto& [key, value] : parts.options) {
    const std::string where = at + " option '" + key + "'";
    if (!allowed.count(key))
      throw ConfigError(at + ": option '" + key + "' is not valid for " +
                        parts.kind);
    if (!seen.insert(key).second)
      throw ConfigError(where + " given twice");
    if (key == "name") l.name = value;
    else if (key == "c_out") l.c_out = parse_int(value, where);
    else if (key == "k") l.k = parse_int(value, where);
    else if (key == "stride") l.stride = parse_int(value, where);
    else if (key == "pad") l.pad = parse_int(value, where);
    else if (key == "quantize") l.quantize = parse_bool(value, where);
    else if (key == "binarize_input") l.binarize_input = parse_bool(value, where);
    else if (key == "shortcut_quantize") l.shortcut_quantize = parse_bool(value, where);
    else if (key == "from") l.from = value;
    else if (key == "unit") {
      if (value == "kernel") l.unit = UnitMode::Kernel;
      else if (value == "vector") l.unit = UnitMode::Vector1x1;
      else throw ConfigError(where + ": expected kernel or vector");
    } else if (key == "shortcut") {
      if (value == "identity") l.shortcut = Shortcut::Identity;
      else if (value == "pad") l.shortcut = Shortcut::Pad;
      else if (value == "conv") l.shortcut = Shortcut::Conv;
      else throw ConfigError(where + ": expected identity, pad or conv");
    }
  }
  return l;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string to_string(LayerKind kind) {
  for (const auto& [name, k] : kind_names())
    if (k == kind) return name;
  return "unknown";
}

std::string to_string(Shortcut shortcut) {
  switch (shortcut) {
    case Shortcut::Identity: return "identity";
    case Shortcut::Pad: return "pad";
    case Shortcut::Conv: return "conv";
  }
  return "unknown";
}

std::string Dims::str() const {
  return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

QuantConvSpec WeightLayer::conv_spec() const {
  QuantConvSpec s;
  s.c_in = c_in;
  s.c_out = c_out;
  s.k = k;
  s.stride = stride;
  s.pad = pad;
  s.unit = unit;
  s.binarize_activations = binarize_input;
  return s;
}

std::vector<int> ResolvedArchitecture::quantized() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i].quantized) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<LayerShape> ResolvedArchitecture::quantized_shapes() const {
  std::vector<LayerShape> out;
  for (int i : quantized()) {
    const auto& w = weights[static_cast<std::size_t>(i)];
    out.push_back(LayerShape{w.unit_length(), w.units()});
  }
  return out;
}

ResolvedArchitecture resolve(const ArchitectureSpec& spec) {
  if (spec.schema != 1)
    throw ConfigError("unsupported config schema " +
                      std::to_string(spec.schema));
  if (spec.input.c < 1 || spec.input.h < 1 || spec.input.w < 1)
    throw ConfigError("input dimensions must be positive");
  if (spec.classes < 1) throw ConfigError("classes must be >= 1");
  if (spec.layers.empty()) throw ConfigError("architecture has no layers");

  ResolvedArchitecture out;
  out.spec = spec;
  std::map<std::string, Dims> saved;
  std::set<std::string> names;
  Dims cur = spec.input;
  bool flat = false;

  auto add_weight = [&](WeightLayer w) {
    if (!names.insert(w.name).second)
      throw ConfigError("duplicate layer name '" + w.name + "'");
    if (w.quantized) {
      if (w.unit == UnitMode::Kernel && w.k * w.k > kMaxUnitLength)
        throw ConfigError(w.name + ": quantized kernels must have k <= 4");
      if (w.unit == UnitMode::Kernel && w.k < 2)
        throw ConfigError(w.name + ": quantized 1x1 convs need unit=vector");
      if (w.unit == UnitMode::Vector1x1 && w.k != 1)
        throw ConfigError(w.name + ": unit=vector needs k=1");
      try {
        unit_count(w.unit, w.c_out, w.c_in, w.k);
      } catch (const ConfigError& e) {
        throw ConfigError(w.name + ": " + e.what());
      }
    }
    out.weights.push_back(std::move(w));
    return static_cast<int>(out.weights.size()) - 1;
  };

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    ResolvedLayer r;
    r.spec = spec.layers[i];
    LayerSpec& l = r.spec;
    const std::string label = layer_label(l, i);
    if (l.name.empty()) l.name = label;
    r.in = cur;
    if (flat && l.kind != LayerKind::Linear && l.kind != LayerKind::Relu &&
        l.kind != LayerKind::Hardtanh && l.kind != LayerKind::BatchNorm)
      throw ConfigError(label + ": spatial layer after flattening");

    switch (l.kind) {
      case LayerKind::Conv: {
        if (l.c_out < 1) throw ConfigError(label + ": c_out must be >= 1");
        if (l.pad < 0) l.pad = l.k / 2;
        r.out = {l.c_out, extent(cur.h, l.k, l.stride, l.pad, label),
                 extent(cur.w, l.k, l.stride, l.pad, label)};
        if (!l.quantize) l.quantize = !out.weights.empty();
        if (!l.unit)
          l.unit = (l.k == 1 && *l.quantize) ? UnitMode::Vector1x1
                                             : UnitMode::Kernel;
        if (!l.binarize_input) l.binarize_input = false;
        if (*l.binarize_input && !*l.quantize)
          throw ConfigError(label +
                            ": binarize_input needs a quantized conv");
        WeightLayer w;
        w.name = l.name;
        w.layer_index = static_cast<int>(i);
        w.c_in = cur.c;
        w.c_out = l.c_out;
        w.k = l.k;
        w.stride = l.stride;
        w.pad = l.pad;
        w.h_out = r.out.h;
        w.w_out = r.out.w;
        w.quantized = *l.quantize;
        w.binarize_input = *l.binarize_input;
        w.unit = *l.unit;
        r.weight_index = add_weight(std::move(w));
        break;
      }
      case LayerKind::BatchNorm:
      case LayerKind::Relu:
      case LayerKind::Hardtanh:
        r.out = cur;
        break;
      case LayerKind::AvgPool:
      case LayerKind::MaxPool:
        if (l.pad < 0) l.pad = 0;
        if (2 * l.pad > l.k)
          throw ConfigError(label + ": pool padding above k/2");
        r.out = {cur.c, extent(cur.h, l.k, l.stride, l.pad, label),
                 extent(cur.w, l.k, l.stride, l.pad, label)};
        break;
      case LayerKind::GlobalAvgPool:
        r.out = {cur.c, 1, 1};
        break;
      case LayerKind::Linear: {
        if (l.c_out == 0) l.c_out = spec.classes;
        if (l.c_out < 1) throw ConfigError(label + ": c_out must be >= 1");
        if (l.quantize.value_or(false))
          throw ConfigError(label + ": fc layers stay full precision");
        l.quantize = false;
        WeightLayer w;
        w.name = l.name;
        w.layer_index = static_cast<int>(i);
        w.linear = true;
        w.c_in = cur.c * cur.h * cur.w;
        w.c_out = l.c_out;
        w.k = 1;
        r.out = {l.c_out, 1, 1};
        r.weight_index = add_weight(std::move(w));
        flat = true;
        break;
      }
      case LayerKind::Save:
        if (spec.layers[i].name.empty())
          throw ConfigError(label + ": save needs name=");
        saved[l.name] = cur;
        r.out = cur;
        break;
      case LayerKind::Add: {
        const auto it = saved.find(l.from);
        if (l.from.empty() || it == saved.end())
          throw ConfigError(label + ": add from='" + l.from +
                            "' names no earlier save");
        const Dims src = it->second;
        r.out = cur;
        r.shortcut_in = src;
        if (l.shortcut == Shortcut::Identity) {
          if (!(src == cur))
            throw ConfigError(label + ": identity shortcut joins " +
                              src.str() + " with " + cur.str());
          if (l.shortcut_quantize)
            throw ConfigError(label +
                              ": shortcut_quantize needs shortcut=conv");
          break;
        }
        int s = 1;
        while ((src.h + s - 1) / s > cur.h) ++s;
        if ((src.h + s - 1) / s != cur.h || (src.w + s - 1) / s != cur.w)
          throw ConfigError(label + ": cannot subsample " + src.str() +
                            " to " + cur.str());
        r.shortcut_stride = s;
        if (l.shortcut == Shortcut::Pad) {
          if (cur.c < src.c)
            throw ConfigError(label + ": pad shortcut cannot drop channels");
          if (l.shortcut_quantize)
            throw ConfigError(label +
                              ": shortcut_quantize needs shortcut=conv");
          break;
        }
        if (!l.shortcut_quantize) l.shortcut_quantize = false;
        WeightLayer w;
        w.name = l.name + ".proj";
        w.layer_index = static_cast<int>(i);
        w.shortcut = true;
        w.c_in = src.c;
        w.c_out = cur.c;
        w.k = 1;
        w.stride = s;
        w.pad = 0;
        w.h_out = cur.h;
        w.w_out = cur.w;
        w.quantized = *l.shortcut_quantize;
        w.unit = UnitMode::Vector1x1;
        r.shortcut_weight = add_weight(std::move(w));
        break;
      }
    }
    if (l.kind != LayerKind::Conv && l.kind != LayerKind::Linear &&
        !names.insert(l.name).second)
      throw ConfigError("duplicate layer name '" + l.name + "'");
    cur = r.out;
    out.layers.push_back(std::move(r));
  }

  if (out.layers.back().spec.kind != LayerKind::Linear)
    throw ConfigError("the last layer must be fc");
  if (cur.c != spec.classes)
    throw ConfigError("the last fc produces " + std::to_string(cur.c) +
                      " outputs for " + std::to_string(spec.classes) +
                      " classes");
  out.weights.front().first = true;
  out.weights.back().last = true;
  return out;
}

ArchitectureSpec architecture_from_document(ConfigDocument& doc,
                                            const std::string& geometry_override) {
  ConfigSection& head = doc.section("");
  const auto schema = head.get_int("schema");
  if (schema && *schema != 1)
    throw ConfigError("unsupported config schema " + std::to_string(*schema));
  const auto name = head.get_string("name");
  const auto preset_name = head.get_string("preset");
  const auto geometry = head.get_string("geometry");
  const auto input = head.get_string("input");
  const auto classes = head.get_int("classes");
  head.finish();

  ArchitectureSpec spec;
  if (preset_name) {
    if (doc.has_layers)
      throw ConfigError("'preset' and a [layers] section are exclusive");
    if (input || classes)
      throw ConfigError("'input' and 'classes' come from the preset");
    std::string geo = geometry_override;
    if (geo.empty()) geo = geometry.value_or("");
    spec = geo.empty() ? preset(*preset_name) : preset(*preset_name, geo);
    if (name) spec.name = *name;
    return spec;
  }
  if (geometry || !geometry_override.empty())
    throw ConfigError("geometry applies only to preset architectures");
  if (!doc.has_layers) throw ConfigError("missing [layers] section");
  if (!input) throw ConfigError("missing 'input' (e.g. input = 3x32x32)");
  if (!classes) throw ConfigError("missing 'classes'");
  spec.name = name.value_or("unnamed");
  spec.input = parse_dims(*input);
  if (*classes < 1) throw ConfigError("classes must be >= 1");
  spec.classes = static_cast<int>(*classes);
  for (const auto& line : doc.layer_lines) spec.layers.push_back(parse_layer(line));
  resolve(spec);
  return spec;
}

ArchitectureSpec parse_architecture(const std::string& text) {
  ConfigDocument doc = parse_config_text(text);
  doc.require_known_sections({});
  return architecture_from_document(doc);
}

std::string format_architecture(const ArchitectureSpec& spec) {
  std::ostringstream o;
  o << "schema = " << spec.schema << "\n"
    << "name = " << spec.name << "\n"
    << "input = " << spec.input.str() << "\n"
    << "classes = " << spec.classes << "\n\n[layers]\n";
  for (const auto& l : spec.layers) {
    o << to_string(l.kind);
    if (!l.name.empty()) o << " name=" << l.name;
    switch (l.kind) {
      case LayerKind::Conv:
        o << " c_out=" << l.c_out;
        if (l.k != 3) o << " k=" << l.k;
        if (l.stride != 1) o << " stride=" << l.stride;
        if (l.pad >= 0) o << " pad=" << l.pad;
        if (l.quantize) o << " quantize=" << bool_str(*l.quantize);
        if (l.binarize_input)
          o << " binarize_input=" << bool_str(*l.binarize_input);
        if (l.unit)
          o << " unit=" << (*l.unit == UnitMode::Kernel ? "kernel" : "vector");
        break;
      case LayerKind::AvgPool:
      case LayerKind::MaxPool:
        o << " k=" << l.k;
        if (l.stride != 1) o << " stride=" << l.stride;
        if (l.pad >= 0) o << " pad=" << l.pad;
        break;
      case LayerKind::Linear:
        if (l.c_out) o << " c_out=" << l.c_out;
        if (l.quantize) o << " quantize=" << bool_str(*l.quantize);
        break;
      case LayerKind::Add:
        o << " from=" << l.from;
        if (l.shortcut != Shortcut::Identity)
          o << " shortcut=" << to_string(l.shortcut);
        if (l.shortcut_quantize)
          o << " shortcut_quantize=" << bool_str(*l.shortcut_quantize);
        break;
      default:
        break;
    }
    o << "\n";
  }
  return o.str();
}

namespace {

struct Builder {
  ArchitectureSpec spec;

  LayerSpec& push(LayerKind kind) {
    spec.layers.push_back(LayerSpec{});
    spec.layers.back().kind = kind;
    return spec.layers.back();
  }
  void conv(const std::string& name, int c_out, int k = 3, int stride = 1,
            int pad = -1) {
    LayerSpec& l = push(LayerKind::Conv);
    l.name = name;
    l.c_out = c_out;
    l.k = k;
    l.stride = stride;
    l.pad = pad;
  }
  void simple(LayerKind kind) { push(kind); }
  void pool(LayerKind kind, int k, int stride, int pad = -1) {
    LayerSpec& l = push(kind);
    l.k = k;
    l.stride = stride;
    l.pad = pad;
  }
  void save(const std::string& name) { push(LayerKind::Save).name = name; }
  void add(const std::string& from, Shortcut sc,
           std::optional<bool> quantize = std::nullopt) {
    LayerSpec& l = push(LayerKind::Add);
    l.from = from;
    l.shortcut = sc;
    l.shortcut_quantize = quantize;
  }
  void fc(const std::string& name) { push(LayerKind::Linear).name = name; }
};

Builder start(const std::string& name, const std::string& geometry, int stem) {
  Builder b;
  b.spec.name = name + "-" + geometry;
  if (geometry == "cifar") {
    b.spec.input = {3, 32, 32};
    b.spec.classes = 10;
    b.conv("stem", stem);
    b.simple(LayerKind::BatchNorm);
    b.simple(LayerKind::Relu);
  } else if (geometry == "imagenet") {
    b.spec.input = {3, 224, 224};
    b.spec.classes = 1000;
    b.conv("stem", stem, 7, 2, 3);
    b.simple(LayerKind::BatchNorm);
    b.simple(LayerKind::Relu);
    b.pool(LayerKind::MaxPool, 3, 2, 1);
  } else {
    throw ConfigError("unknown geometry '" + geometry +
                      "' (expected cifar or imagenet)");
  }
  return b;
}

ArchitectureSpec resnet_basic(const std::string& name,
                              const std::string& geometry,
                              std::vector<int> widths, std::vector<int> blocks,
                              Shortcut downsample) {
  Builder b = start(name, geometry, widths.front());
  int c_in = widths.front();
  for (std::size_t s = 0; s < widths.size(); ++s) {
    for (int j = 0; j < blocks[s]; ++j) {
      const int stride = (s > 0 && j == 0) ? 2 : 1;
      const std::string id = "s" + std::to_string(s + 1) + "b" +
                             std::to_string(j + 1);
      b.save(id + ".in");
      b.conv(id + ".conv1", widths[s], 3, stride);
      b.simple(LayerKind::BatchNorm);
      b.simple(LayerKind::Relu);
      b.conv(id + ".conv2", widths[s]);
      b.simple(LayerKind::BatchNorm);
      const bool project = stride != 1 || c_in != widths[s];
      b.add(id + ".in", project ? downsample : Shortcut::Identity);
      b.simple(LayerKind::Relu);
      c_in = widths[s];
    }
  }
  b.simple(LayerKind::GlobalAvgPool);
  b.fc("fc");
  return b.spec;
}

ArchitectureSpec resnet50(const std::string& geometry) {
  Builder b = start("resnet50", geometry, 64);
  const std::vector<int> widths = {64, 128, 256, 512}, blocks = {3, 4, 6, 3};
  int c_in = 64;
  for (std::size_t s = 0; s < widths.size(); ++s) {
    for (int j = 0; j < blocks[s]; ++j) {
      const int stride = (s > 0 && j == 0) ? 2 : 1;
      const std::string id = "s" + std::to_string(s + 1) + "b" +
                             std::to_string(j + 1);
      b.save(id + ".in");
      b.conv(id + ".conv1", widths[s], 1, stride);
      b.simple(LayerKind::BatchNorm);
      b.simple(LayerKind::Relu);
      b.conv(id + ".conv2", widths[s]);
      b.simple(LayerKind::BatchNorm);
      b.simple(LayerKind::Relu);
      b.conv(id + ".conv3", 4 * widths[s], 1);
      b.simple(LayerKind::BatchNorm);
      if (j == 0)
        b.add(id + ".in", Shortcut::Conv, true);
      else
        b.add(id + ".in", Shortcut::Identity);
      b.simple(LayerKind::Relu);
      c_in = 4 * widths[s];
    }
  }
  (void)c_in;
  b.simple(LayerKind::GlobalAvgPool);
  b.fc("fc");
  return b.spec;
}

ArchitectureSpec vgg_small(const std::string& geometry) {
  Builder b;
  b.spec.name = "vgg-small-" + geometry;
  if (geometry == "cifar") {
    b.spec.input = {3, 32, 32};
    b.spec.classes = 10;
  } else if (geometry == "imagenet") {
    b.spec.input = {3, 224, 224};
    b.spec.classes = 1000;
  } else {
    throw ConfigError("unknown geometry '" + geometry +
                      "' (expected cifar or imagenet)");
  }
  const int widths[] = {128, 128, 256, 256, 512, 512};
  for (int i = 0; i < 6; ++i) {
    b.conv(i == 0 ? "stem" : "conv" + std::to_string(i), widths[i]);
    if (i % 2 == 1) b.pool(LayerKind::MaxPool, 2, 2);
    b.simple(LayerKind::BatchNorm);
    b.simple(LayerKind::Relu);
  }
  if (geometry == "imagenet") b.simple(LayerKind::GlobalAvgPool);
  b.fc("fc");
  return b.spec;
}

ArchitectureSpec tiny() {
  Builder b;
  b.spec.name = "tiny";
  b.spec.input = {1, 16, 16};
  b.spec.classes = 10;
  b.conv("stem", 16);
  b.simple(LayerKind::BatchNorm);
  b.simple(LayerKind::Relu);
  b.conv("q1", 32, 3, 2);
  b.simple(LayerKind::BatchNorm);
  b.simple(LayerKind::Relu);
  b.conv("q2", 32);
  b.simple(LayerKind::BatchNorm);
  b.simple(LayerKind::Relu);
  b.conv("q3", 64, 3, 2);
  b.simple(LayerKind::BatchNorm);
  b.simple(LayerKind::Relu);
  b.simple(LayerKind::GlobalAvgPool);
  b.fc("fc");
  return b.spec;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"resnet18", "resnet20", "resnet34", "resnet50", "vgg-small", "tiny"};
}

ArchitectureSpec preset(const std::string& name, const std::string& geometry) {
  if (name == "resnet18")
    return resnet_basic(name, geometry, {64, 128, 256, 512}, {2, 2, 2, 2},
                        Shortcut::Conv);
  if (name == "resnet34")
    return resnet_basic(name, geometry, {64, 128, 256, 512}, {3, 4, 6, 3},
                        Shortcut::Conv);
  if (name == "resnet20")
    return resnet_basic(name, geometry, {16, 32, 64}, {3, 3, 3},
                        Shortcut::Pad);
  if (name == "resnet50") return resnet50(geometry);
  if (name == "vgg-small") return vgg_small(geometry);
  if (name == "tiny") {
    if (geometry != "cifar" && geometry != "desk")
      throw ConfigError("preset 'tiny' has a fixed 1x16x16 geometry");
    return tiny();
  }
  std::string known;
  for (const auto& n : preset_names()) known += " " + n;
  throw ConfigError("unknown preset '" + name + "' (known:" + known + ")");
}

ArchitectureSpec load_architecture(const std::string& name_or_path,
                                   const std::string& geometry) {
  for (const auto& n : preset_names()) {
    if (name_or_path == n) return preset(n, geometry.empty() ? "cifar" : geometry);
    for (const std::string g : {"cifar", "imagenet"})
      if (name_or_path == n + "-" + g) {
        if (!geometry.empty() && geometry != g)
          throw ConfigError("'" + name_or_path + "' conflicts with geometry '" +
                            geometry + "'");
        return preset(n, g);
      }
  }
  if (!std::filesystem::exists(name_or_path))
    throw ConfigError("'" + name_or_path +
                      "' is neither a preset nor an existing config file");
  ConfigDocument doc = load_config_file(name_or_path);
  ArchitectureSpec spec = architecture_from_document(doc, geometry);
  return spec;
}

}  // namespace sbnn
