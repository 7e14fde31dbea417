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

#include "sbnn/packed_model.hpp"

#include <fstream>
#include <iterator>
#include <map>

#include "binary_io.hpp"
#include "sbnn/error.hpp"

namespace sbnn {
namespace {

constexpr char kMagic[4] = {'S', 'B', 'N', 'N'};

enum class Kind : std::uint8_t {
  QuantConv = 1,
  FpConv = 2,
  BatchNorm = 3,
  Activation = 4,
  Pool = 5,
  GlobalPool = 6,
  Linear = 7,
  Save = 8,
  Add = 9,
};

using Writer = detail::ByteWriter;
using Reader = detail::ByteReader<CorruptModelError>;

std::uint64_t ceil_bytes(std::uint64_t bits) { return (bits + 7) / 8; }

// ---- export ---------------------------------------------------------------

PackedLayer pack(const QuantConvLayer& q) {
  PackedLayer p;
  const auto& s = q.spec();
  p.unit = s.unit;
  p.k = s.k;
  p.c_in = s.c_in;
  p.c_out = s.c_out;
  p.stride = s.stride;
  p.pad = s.pad;
  p.binarize_input = s.binarize_activations;
  const SnnBinarization bin = q.binarize();
  const int n = p.unit_length();
  if (!q.has_subset()) {
    p.full_set = true;
    p.tau = n;
  } else {
    p.tau = q.subset().tau;
    BitWriter sw;
    for (std::int8_t v : q.subset().m) sw.write(v > 0 ? 1u : 0u, 1);
    p.subset_bits = sw.finish();
  }
  BitWriter iw;
  for (std::uint16_t code : bin.codes) iw.write(code, p.tau);
  p.index_stream = iw.finish();
  for (real l : channel_scaling(q.weight().value))
    p.lambda.push_back(static_cast<float>(l));
  return p;
}

FpConvRecord pack_fp(const ConvUnit& u) {
  FpConvRecord r;
  r.c_in = u.geometry.c_in;
  r.c_out = u.geometry.c_out;
  r.k = u.geometry.k;
  r.stride = u.geometry.stride;
  r.pad = u.geometry.pad;
  r.weight.assign(u.weight.value.values().begin(), u.weight.value.values().end());
  return r;
}

BatchNormRecord pack_bn(const ops::BatchNormState& bn) {
  BatchNormRecord r;
  r.gamma.assign(bn.gamma.value.values().begin(), bn.gamma.value.values().end());
  r.beta.assign(bn.beta.value.values().begin(), bn.beta.value.values().end());
  r.mean = bn.running_mean;
  r.var = bn.running_var;
  r.eps = bn.eps;
  return r;
}

// ---- serialization ----------------------------------------------------------

void put_doubles(Writer& w, const std::vector<double>& v) {
  for (double x : v) w.put<double>(x);
}

std::vector<double> get_doubles(Reader& r, std::uint64_t n) {
  if (r.remaining() / 8 < n) throw CorruptModelError("truncated model data");
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = r.get<double>();
  return v;
}

std::vector<std::uint8_t> get_blob(Reader& r, std::uint64_t expected,
                                   const char* what) {
  const auto n = r.get<std::uint32_t>();
  if (n != expected)
    throw CorruptModelError(std::string(what) + " holds " + std::to_string(n) +
                            " bytes, expected " + std::to_string(expected));
  if (r.remaining() < n) throw CorruptModelError("truncated model data");
  std::vector<std::uint8_t> b(n);
  r.get_bytes(b.data(), n);
  return b;
}

int get_dim(Reader& r, const char* what, std::uint32_t limit = 1u << 20) {
  const auto v = r.get<std::uint32_t>();
  if (v == 0 || v > limit)
    throw CorruptModelError(std::string("bad ") + what + " " + std::to_string(v));
  return static_cast<int>(v);
}

int get_small(Reader& r, const char* what, int lo, int hi) {
  const int v = r.get<std::uint8_t>();
  if (v < lo || v > hi)
    throw CorruptModelError(std::string("bad ") + what + " " + std::to_string(v));
  return v;
}

void put_quant(Writer& w, const PackedLayer& p) {
  w.put<std::uint8_t>(p.unit == UnitMode::Kernel ? 0 : 1);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.k));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.tau));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.c_in));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.c_out));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.stride));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.pad));
  w.put<std::uint8_t>(static_cast<std::uint8_t>((p.binarize_input ? 1 : 0) |
                                                (p.full_set ? 2 : 0)));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.subset_bits.size()));
  w.put_bytes(p.subset_bits.data(), p.subset_bits.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.index_stream.size()));
  w.put_bytes(p.index_stream.data(), p.index_stream.size());
  for (float l : p.lambda) w.put<float>(l);
}

PackedLayer get_quant(Reader& r) {
  PackedLayer p;
  p.unit = get_small(r, "unit mode", 0, 1) == 0 ? UnitMode::Kernel
                                                : UnitMode::Vector1x1;
  p.k = get_small(r, "kernel size", 1, 4);
  p.tau = get_small(r, "tau", 1, kMaxUnitLength);
  p.c_in = get_dim(r, "c_in");
  p.c_out = get_dim(r, "c_out");
  p.stride = get_small(r, "stride", 1, 255);
  p.pad = get_small(r, "pad", 0, 255);
  const int flags = get_small(r, "flags", 0, 3);
  p.binarize_input = flags & 1;
  p.full_set = flags & 2;
  int n = 0;
  std::uint64_t units = 0;
  try {
    n = p.unit_length();
    units = static_cast<std::uint64_t>(p.units());
  } catch (const Error& e) {
    throw CorruptModelError(std::string("bad layer shape: ") + e.what());
  }
  if (p.tau > n) throw CorruptModelError("tau exceeds the unit length");
  p.subset_bits = get_blob(
      r, p.full_set ? 0 : ceil_bytes(static_cast<std::uint64_t>(n) << p.tau),
      "subset table");
  p.index_stream = get_blob(r, ceil_bytes(units * static_cast<std::uint64_t>(p.tau)),
                            "index stream");
  if (r.remaining() / 4 < static_cast<std::size_t>(p.c_out))
    throw CorruptModelError("truncated model data");
  for (int c = 0; c < p.c_out; ++c) p.lambda.push_back(r.get<float>());
  p.validate();
  return p;
}

void put_fp(Writer& w, const FpConvRecord& f) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.c_in));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.c_out));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(f.k));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(f.stride));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(f.pad));
  put_doubles(w, f.weight);
}

FpConvRecord get_fp(Reader& r) {
  FpConvRecord f;
  f.c_in = get_dim(r, "c_in");
  f.c_out = get_dim(r, "c_out");
  f.k = get_small(r, "kernel size", 1, 255);
  f.stride = get_small(r, "stride", 1, 255);
  f.pad = get_small(r, "pad", 0, 255);
  f.weight = get_doubles(r, static_cast<std::uint64_t>(f.c_in) * f.c_out * f.k * f.k);
  return f;
}

void put_bn(Writer& w, const BatchNormRecord& b) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(b.gamma.size()));
  w.put<double>(b.eps);
  put_doubles(w, b.gamma);
  put_doubles(w, b.beta);
  put_doubles(w, b.mean);
  put_doubles(w, b.var);
}

BatchNormRecord get_bn(Reader& r) {
  BatchNormRecord b;
  const auto c = static_cast<std::uint64_t>(get_dim(r, "channel count"));
  b.eps = r.get<double>();
  b.gamma = get_doubles(r, c);
  b.beta = get_doubles(r, c);
  b.mean = get_doubles(r, c);
  b.var = get_doubles(r, c);
  return b;
}

struct RecordWriter {
  Writer& w;
  void operator()(const PackedLayer& p) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Kind::QuantConv));
    put_quant(w, p);
  }
  void operator()(const FpConvRecord& f) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Kind::FpConv));
    put_fp(w, f);
  }
  void operator()(const BatchNormRecord& b) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Kind::BatchNorm));
    put_bn(w, b);
  }
  void operator()(const ActivationRecord& a) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Kind::Activation));
    w.put<std::uint8_t>(a.hardtanh ? 1 : 0);
  }
  void operator()(const PoolRecord& p) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Kind::Pool));
    w.put<std::uint8_t>(p.max ? 1 : 0);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.k));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.stride));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.pad));
  }
  void operator()(const GlobalPoolRecord&) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Kind::GlobalPool));
  }
  void operator()(const LinearRecord& l) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Kind::Linear));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.in));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.out));
    put_doubles(w, l.weight);
    put_doubles(w, l.bias);
  }
  void operator()(const SaveRecord& s) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Kind::Save));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(s.slot));
  }
  void operator()(const AddRecord& a) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(Kind::Add));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(a.slot));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(a.shortcut));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(a.stride));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.c_out));
    if (a.shortcut != Shortcut::Conv) return;
    if (a.proj_quant) {
      w.put<std::uint8_t>(1);
      put_quant(w, *a.proj_quant);
    } else {
      w.put<std::uint8_t>(2);
      put_fp(w, *a.proj_fp);
    }
    put_bn(w, *a.proj_bn);
  }
};

PackedRecord get_record(Reader& r, int slots) {
  const int kind = get_small(r, "record kind", 1, 9);
  switch (static_cast<Kind>(kind)) {
    case Kind::QuantConv:
      return get_quant(r);
    case Kind::FpConv:
      return get_fp(r);
    case Kind::BatchNorm:
      return get_bn(r);
    case Kind::Activation:
      return ActivationRecord{get_small(r, "activation", 0, 1) == 1};
    case Kind::Pool: {
      PoolRecord p;
      p.max = get_small(r, "pool kind", 0, 1) == 1;
      p.k = get_small(r, "pool size", 1, 255);
      p.stride = get_small(r, "pool stride", 1, 255);
      p.pad = get_small(r, "pool pad", 0, 255);
      return p;
    }
    case Kind::GlobalPool:
      return GlobalPoolRecord{};
    case Kind::Linear: {
      LinearRecord l;
      l.in = get_dim(r, "fc inputs", 1u << 26);
      l.out = get_dim(r, "fc outputs");
      l.weight = get_doubles(r, static_cast<std::uint64_t>(l.in) * l.out);
      l.bias = get_doubles(r, static_cast<std::uint64_t>(l.out));
      return l;
    }
    case Kind::Save:
      return SaveRecord{r.get<std::uint16_t>()};
    case Kind::Add: {
      AddRecord a;
      a.slot = r.get<std::uint16_t>();
      if (a.slot >= slots) throw CorruptModelError("add reads an unsaved slot");
      a.shortcut = static_cast<Shortcut>(get_small(r, "shortcut", 0, 2));
      a.stride = get_small(r, "shortcut stride", 1, 255);
      a.c_out = get_dim(r, "shortcut channels");
      if (a.shortcut == Shortcut::Conv) {
        const int proj = get_small(r, "projection kind", 1, 2);
        if (proj == 1)
          a.proj_quant = get_quant(r);
        else
          a.proj_fp = get_fp(r);
        a.proj_bn = get_bn(r);
      }
      return a;
    }
  }
  throw CorruptModelError("unknown record kind");
}

}  // namespace

void BitWriter::write(std::uint32_t value, int bits) {
  for (int b = bits - 1; b >= 0; --b) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if ((value >> b) & 1u)
      bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
    ++bits_;
  }
}

std::uint32_t BitReader::read(int bits) {
  if (pos_ + static_cast<std::uint64_t>(bits) > bytes_.size() * 8)
    throw CorruptModelError("bit stream exhausted");
  std::uint32_t v = 0;
  for (int b = 0; b < bits; ++b, ++pos_)
    v = (v << 1) | ((bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u);
  return v;
}

std::vector<std::uint32_t> PackedLayer::member_patterns() const {
  std::vector<std::uint32_t> out(static_cast<std::size_t>(subset_size()));
  if (full_set) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<std::uint32_t>(j);
    return out;
  }
  BitReader r(subset_bits);
  for (auto& p : out) p = r.read(unit_length());
  return out;
}

std::vector<std::uint32_t> PackedLayer::indices() const {
  std::vector<std::uint32_t> out(static_cast<std::size_t>(units()));
  BitReader r(index_stream);
  for (auto& i : out) i = r.read(tau);
  return out;
}

std::uint64_t PackedLayer::payload_bits() const {
  const auto u = static_cast<std::uint64_t>(units());
  const std::uint64_t table =
      full_set ? 0 : static_cast<std::uint64_t>(unit_length()) << tau;
  return u * static_cast<std::uint64_t>(tau) + table;
}

void PackedLayer::validate() const {
  const int n = unit_length();
  if (tau < 1 || tau > n) throw CorruptModelError("tau out of range");
  if (full_set && tau != n)
    throw CorruptModelError("implicit full set needs tau == unit length");
  if (static_cast<int>(lambda.size()) != c_out)
    throw CorruptModelError("scaling factor count differs from c_out");
  const auto u = static_cast<std::uint64_t>(units());
  if (index_stream.size() != ceil_bytes(u * static_cast<std::uint64_t>(tau)))
    throw CorruptModelError("index stream length mismatch");
  if (!full_set &&
      subset_bits.size() != ceil_bytes(static_cast<std::uint64_t>(n) << tau))
    throw CorruptModelError("subset table length mismatch");
  // tau-bit indices can never exceed 2^tau - 1; checked for completeness.
  for (auto i : indices())
    if (i >= static_cast<std::uint32_t>(subset_size()))
      throw CorruptModelError("member index out of range");
}

std::vector<const PackedLayer*> PackedModel::quantized_layers() const {
  std::vector<const PackedLayer*> out;
  for (const auto& rec : records) {
    if (const auto* p = std::get_if<PackedLayer>(&rec)) out.push_back(p);
    if (const auto* a = std::get_if<AddRecord>(&rec))
      if (a->proj_quant) out.push_back(&*a->proj_quant);
  }
  return out;
}

std::uint64_t PackedModel::payload_bits() const {
  std::uint64_t bits = 0;
  for (const auto* p : quantized_layers()) bits += p->payload_bits();
  return bits;
}

PackedModel compile(const Network& net) {
  PackedModel m;
  m.input = net.architecture().spec.input;
  m.classes = net.architecture().spec.classes;
  std::map<std::string, int> slots;
  for (const auto& node : net.nodes()) {
    const auto& spec = node.layer.spec;
    switch (spec.kind) {
      case LayerKind::Conv:
        if (node.conv->quant)
          m.records.emplace_back(pack(*node.conv->quant));
        else
          m.records.emplace_back(pack_fp(*node.conv));
        break;
      case LayerKind::BatchNorm:
        m.records.emplace_back(pack_bn(*node.bn));
        break;
      case LayerKind::Relu:
        m.records.emplace_back(ActivationRecord{false});
        break;
      case LayerKind::Hardtanh:
        m.records.emplace_back(ActivationRecord{true});
        break;
      case LayerKind::AvgPool:
      case LayerKind::MaxPool:
        m.records.emplace_back(PoolRecord{spec.kind == LayerKind::MaxPool,
                                          spec.k, spec.stride, spec.pad});
        break;
      case LayerKind::GlobalAvgPool:
        m.records.emplace_back(GlobalPoolRecord{});
        break;
      case LayerKind::Linear: {
        LinearRecord l;
        l.in = node.fc_weight.value.dim(1);
        l.out = node.fc_weight.value.dim(0);
        l.weight.assign(node.fc_weight.value.values().begin(),
                        node.fc_weight.value.values().end());
        l.bias.assign(node.fc_bias.value.values().begin(),
                      node.fc_bias.value.values().end());
        m.records.emplace_back(std::move(l));
        break;
      }
      case LayerKind::Save: {
        const auto it = slots.find(spec.name);
        const int slot = it != slots.end() ? it->second
                                           : static_cast<int>(slots.size());
        slots[spec.name] = slot;
        m.records.emplace_back(SaveRecord{slot});
        break;
      }
      case LayerKind::Add: {
        AddRecord a;
        a.slot = slots.at(spec.from);
        a.shortcut = spec.shortcut;
        a.stride = node.layer.shortcut_stride;
        a.c_out = node.layer.out.c;
        if (node.proj) {
          if (node.proj->quant)
            a.proj_quant = pack(*node.proj->quant);
          else
            a.proj_fp = pack_fp(*node.proj);
          a.proj_bn = pack_bn(*node.proj_bn);
        }
        m.records.emplace_back(std::move(a));
        break;
      }
    }
  }
  return m;
}

std::vector<std::uint8_t> serialize_model(const PackedModel& model) {
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint16_t>(PackedModel::kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.input.c));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.input.h));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.input.w));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.classes));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.records.size()));
  RecordWriter rw{w};
  for (const auto& rec : model.records) std::visit(rw, rec);
  auto& b = w.bytes();
  return std::vector<std::uint8_t>(b.begin(), b.end());
}

PackedModel parse_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes.data(), bytes.size());
  char magic[4];
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw CorruptModelError("not an .sbnn model (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != PackedModel::kVersion)
    throw CorruptModelError("unsupported .sbnn version " + std::to_string(version));
  PackedModel m;
  m.input.c = get_dim(r, "input channels");
  m.input.h = get_dim(r, "input height");
  m.input.w = get_dim(r, "input width");
  m.classes = get_dim(r, "class count");
  const auto count = r.get<std::uint32_t>();
  if (count > r.remaining()) throw CorruptModelError("record count too large");
  int slots = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    m.records.push_back(get_record(r, slots));
    if (const auto* s = std::get_if<SaveRecord>(&m.records.back()))
      slots = std::max(slots, s->slot + 1);
  }
  if (r.remaining() != 0)
    throw CorruptModelError(std::to_string(r.remaining()) + " trailing bytes");
  return m;
}

void save_model(const PackedModel& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write model '" + path + "'");
}

PackedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model '" + path + "'");
  const std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
  return parse_model(bytes);
}

}  // namespace sbnn
