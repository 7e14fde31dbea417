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

#include "sbnn/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "sbnn/error.hpp"

namespace sbnn {
namespace {

constexpr char kMagic[4] = {'S', 'B', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

using Writer = detail::ByteWriter;
using Reader = detail::ByteReader<DataError>;

void put_values(Writer& w, std::span<const real> v) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
  for (real x : v) w.put<double>(x);
}

void get_values(Reader& r, std::span<real> v, const std::string& what) {
  const auto n = r.get<std::uint32_t>();
  if (n != v.size())
    throw DataError("checkpoint tensor '" + what + "' has " +
                    std::to_string(n) + " values, expected " +
                    std::to_string(v.size()));
  for (real& x : v) x = r.get<double>();
}

void put_param(Writer& w, const Parameter& p) {
  put_values(w, p.value.values());
  put_values(w, p.momentum.values());
}

void get_param(Reader& r, Parameter& p) {
  get_values(r, p.value.values(), p.name);
  get_values(r, p.momentum.values(), p.name + " momentum");
}

// `quant` is non-const only on the read path.
void put_unit(Writer& w, const ConvUnit& u) {
  if (!u.quant) {
    put_param(w, u.weight);
    return;
  }
  const QuantConvLayer& q = *u.quant;
  put_param(w, q.weight());
  if (!q.has_subset()) return;
  const KernelSubset& s = q.subset();
  w.put<std::int32_t>(s.tau);
  w.put<std::int32_t>(s.unit_length);
  put_values(w, s.p.values());
  w.put_bytes(s.m.data(), s.m.size());
  put_values(w, q.p_momentum().values());
}

void get_unit(Reader& r, ConvUnit& u) {
  if (!u.quant) {
    get_param(r, u.weight);
    return;
  }
  QuantConvLayer& q = *u.quant;
  get_param(r, q.weight());
  if (!q.has_subset()) return;
  KernelSubset& s = q.subset();
  const auto tau = r.get<std::int32_t>();
  const auto n = r.get<std::int32_t>();
  if (tau != s.tau || n != s.unit_length)
    throw DataError("checkpoint subset of '" + q.name() + "' does not match");
  get_values(r, s.p.values(), q.name() + ".p");
  r.get_bytes(s.m.data(), s.m.size());
  for (auto v : s.m)
    if (v != 1 && v != -1)
      throw DataError("checkpoint subset of '" + q.name() +
                      "' holds a non-binary entry");
  get_values(r, q.p_momentum().values(), q.name() + ".p momentum");
}

void put_bn(Writer& w, const ops::BatchNormState& bn) {
  put_param(w, bn.gamma);
  put_param(w, bn.beta);
  put_values(w, bn.running_mean);
  put_values(w, bn.running_var);
}

void get_bn(Reader& r, ops::BatchNormState& bn) {
  get_param(r, bn.gamma);
  get_param(r, bn.beta);
  get_values(r, bn.running_mean, bn.gamma.name + " running mean");
  get_values(r, bn.running_var, bn.gamma.name + " running var");
}

}  // namespace

std::vector<unsigned char> serialize_checkpoint(const Network& net) {
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint16_t>(kVersion);
  w.put_string(format_architecture(net.architecture().spec));
  const NetworkOptions& o = net.options();
  w.put<std::uint8_t>(static_cast<std::uint8_t>(o.mode));
  w.put<std::int32_t>(o.tau);
  w.put<std::int32_t>(o.tau_vector);
  w.put<double>(o.theta);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(o.strategy.kind));
  w.put<std::uint64_t>(o.strategy.seed);
  w.put<std::uint64_t>(o.seed);
  for (const auto& node : net.nodes()) {
    if (node.conv) put_unit(w, *node.conv);
    if (node.bn) put_bn(w, *node.bn);
    if (node.layer.spec.kind == LayerKind::Linear) {
      put_param(w, node.fc_weight);
      put_param(w, node.fc_bias);
    }
    if (node.proj) put_unit(w, *node.proj);
    if (node.proj_bn) put_bn(w, *node.proj_bn);
  }
  return std::move(w.bytes());
}

std::unique_ptr<Network> parse_checkpoint(const std::vector<unsigned char>& bytes) {
  Reader r(bytes.data(), bytes.size());
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  ArchitectureSpec spec;
  try {
    spec = parse_architecture(r.get_string());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint architecture: ") + e.what());
  }
  const ResolvedArchitecture arch = resolve(spec);

  NetworkOptions o;
  const auto mode = r.get<std::uint8_t>();
  if (mode > static_cast<std::uint8_t>(QuantMode::Snn))
    throw DataError("checkpoint: bad quantization mode");
  o.mode = static_cast<QuantMode>(mode);
  o.tau = r.get<std::int32_t>();
  o.tau_vector = r.get<std::int32_t>();
  o.theta = r.get<double>();
  const auto kind = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(SamplingStrategy::Kind::FrequencyTopK))
    throw DataError("checkpoint: bad sampling strategy");
  o.strategy.kind = static_cast<SamplingStrategy::Kind>(kind);
  o.strategy.seed = r.get<std::uint64_t>();
  o.seed = r.get<std::uint64_t>();

  // Subsets are overwritten below; a flat histogram lets frequency-based
  // networks be rebuilt without the original one.
  KernelHistogram flat;
  for (const auto& s : arch.quantized_shapes())
    flat.counts.emplace_back(universe_size(s.unit_length), 0);
  o.histogram = &flat;

  std::unique_ptr<Network> net;
  try {
    net = std::make_unique<Network>(arch, o);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint options: ") + e.what());
  }
  for (auto& node : net->nodes()) {
    if (node.conv) get_unit(r, *node.conv);
    if (node.bn) get_bn(r, *node.bn);
    if (node.layer.spec.kind == LayerKind::Linear) {
      get_param(r, node.fc_weight);
      get_param(r, node.fc_bias);
    }
    if (node.proj) get_unit(r, *node.proj);
    if (node.proj_bn) get_bn(r, *node.proj_bn);
  }
  if (r.remaining() != 0)
    throw DataError("checkpoint has " + std::to_string(r.remaining()) +
                    " trailing bytes");
  return net;
}

void save_checkpoint(const Network& net, const std::string& path) {
  const auto bytes = serialize_checkpoint(net);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
}

std::unique_ptr<Network> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  const std::vector<unsigned char> bytes(std::istreambuf_iterator<char>(in), {});
  return parse_checkpoint(bytes);
}

}  // namespace sbnn
