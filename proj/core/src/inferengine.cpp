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

#include "sbnn/inferengine.hpp"

#include <bit>
#include <optional>

#include "sbnn/error.hpp"
#include "sbnn/tensor_ops.hpp"

namespace sbnn {
namespace {

// Receptive-field slices of one unit slot: pattern and validity bits per
// output pixel, MSB = first entry.
struct Slices {
  std::vector<std::uint32_t> pattern, valid;
};

int slots_of(const PackedLayer& p) { return p.units() / p.c_out; }

Slices extract(const Bitplanes& in, const PackedLayer& p, int slot, int ho,
               int wo) {
  const int n = p.unit_length();
  Slices s;
  s.pattern.assign(static_cast<std::size_t>(ho) * wo, 0);
  s.valid.assign(s.pattern.size(), 0);
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox) {
      std::uint32_t pat = 0, val = 0;
      const int by = oy * p.stride - p.pad, bx = ox * p.stride - p.pad;
      if (p.unit == UnitMode::Kernel) {
        for (int ky = 0; ky < p.k; ++ky)
          for (int kx = 0; kx < p.k; ++kx) {
            const int iy = by + ky, ix = bx + kx;
            const std::uint32_t bit = 1u << (n - 1 - (ky * p.k + kx));
            if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
            val |= bit;
            if (in.bit(slot, iy, ix)) pat |= bit;
          }
      } else if (by >= 0 && by < in.height && bx >= 0 && bx < in.width) {
        for (int l = 0; l < n; ++l) {
          const std::uint32_t bit = 1u << (n - 1 - l);
          val |= bit;
          if (in.bit(slot * kVectorWidth + l, by, bx)) pat |= bit;
        }
      }
      const auto i = static_cast<std::size_t>(oy) * wo + ox;
      s.pattern[i] = pat;
      s.valid[i] = val;
    }
  return s;
}

inline std::int32_t xnor_dot(std::uint32_t slice, std::uint32_t kernel,
                             std::uint32_t valid) {
  return 2 * std::popcount(~(slice ^ kernel) & valid) - std::popcount(valid);
}

IntMaps empty_maps(const Bitplanes& in, const PackedLayer& p) {
  if (in.channels != p.c_in)
    throw ContractViolation("bitplanes have " + std::to_string(in.channels) +
                            " channels, layer expects " + std::to_string(p.c_in));
  IntMaps m;
  m.channels = p.c_out;
  m.height = kernels::output_extent(in.height, p.k, p.stride, p.pad);
  m.width = kernels::output_extent(in.width, p.k, p.stride, p.pad);
  m.values.assign(static_cast<std::size_t>(m.channels) * m.height * m.width, 0);
  return m;
}

Tensor decode_weights(const PackedLayer& p,
                      const std::vector<std::uint32_t>& members,
                      const std::vector<std::uint32_t>& indices) {
  const int n = p.unit_length();
  Tensor w(Shape{p.c_out, p.c_in, p.k, p.k});
  for (std::size_t u = 0; u < indices.size(); ++u) {
    const std::uint32_t pat = members[indices[u]];
    for (int l = 0; l < n; ++l)
      w[u * static_cast<std::size_t>(n) + static_cast<std::size_t>(l)] =
          ((pat >> (n - 1 - l)) & 1u) ? 1.0 : -1.0;
  }
  return w;
}

Tensor to_tensor(const FpConvRecord& f) {
  return Tensor(Shape{f.c_out, f.c_in, f.k, f.k}, f.weight);
}

}  // namespace

Bitplanes Bitplanes::pack(const Tensor& x, int n) {
  if (x.rank() != 4) throw ContractViolation("bitplanes need an NCHW tensor");
  Bitplanes b;
  b.channels = x.dim(1);
  b.height = x.dim(2);
  b.width = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(b.height) * b.width;
  b.words_per_channel = (plane + 63) / 64;
  b.words.assign(b.words_per_channel * static_cast<std::size_t>(b.channels), 0);
  for (int c = 0; c < b.channels; ++c) {
    const real* src = &x.at(n, c, 0, 0);
    std::uint64_t* dst = b.words.data() + static_cast<std::size_t>(c) * b.words_per_channel;
    for (std::size_t i = 0; i < plane; ++i)
      if (src[i] >= 0) dst[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return b;
}

bool Bitplanes::bit(int c, int y, int x) const {
  const std::size_t i = static_cast<std::size_t>(y) * width + x;
  return (words[static_cast<std::size_t>(c) * words_per_channel + i / 64] >>
          (i % 64)) & 1u;
}

EngineLayer::EngineLayer(PackedLayer p) : packed(std::move(p)) {
  packed.validate();
  members = packed.member_patterns();
  indices = packed.indices();
  weights = decode_weights(packed, members, indices);
  lambda.assign(packed.lambda.begin(), packed.lambda.end());
}

bool EngineLayer::shares(SharingPolicy policy) const {
  switch (policy) {
    case SharingPolicy::Always: return true;
    case SharingPolicy::Never: return false;
    case SharingPolicy::Auto: break;
  }
  return packed.subset_size() < packed.c_out;
}

IntMaps conv_xnor_popcount(const Bitplanes& in, const EngineLayer& layer,
                           EngineCounters* counters) {
  const PackedLayer& p = layer.packed;
  IntMaps out = empty_maps(in, p);
  const int slots = slots_of(p);
  const std::size_t pixels = static_cast<std::size_t>(out.height) * out.width;
  for (int t = 0; t < slots; ++t) {
    const Slices s = extract(in, p, t, out.height, out.width);
    for (int oc = 0; oc < p.c_out; ++oc) {
      const std::uint32_t kernel =
          layer.members[layer.indices[static_cast<std::size_t>(oc) * slots + t]];
      std::int32_t* acc = out.values.data() + static_cast<std::size_t>(oc) * pixels;
      for (std::size_t i = 0; i < pixels; ++i)
        acc[i] += xnor_dot(s.pattern[i], kernel, s.valid[i]);
    }
  }
  if (counters)
    counters->dot_products += static_cast<std::uint64_t>(p.c_out) * slots * pixels;
  return out;
}

IntMaps conv_shared(const Bitplanes& in, const EngineLayer& layer,
                    EngineCounters* counters) {
  const PackedLayer& p = layer.packed;
  IntMaps out = empty_maps(in, p);
  const int slots = slots_of(p);
  const std::size_t pixels = static_cast<std::size_t>(out.height) * out.width;
  const std::size_t members = layer.members.size();
  std::vector<std::int32_t> lut(members);
  for (int t = 0; t < slots; ++t) {
    const Slices s = extract(in, p, t, out.height, out.width);
    for (std::size_t i = 0; i < pixels; ++i) {
      for (std::size_t j = 0; j < members; ++j)
        lut[j] = xnor_dot(s.pattern[i], layer.members[j], s.valid[i]);
      for (int oc = 0; oc < p.c_out; ++oc)
        out.values[static_cast<std::size_t>(oc) * pixels + i] +=
            lut[layer.indices[static_cast<std::size_t>(oc) * slots + t]];
    }
  }
  if (counters) {
    counters->dot_products += static_cast<std::uint64_t>(slots) * pixels * members;
    counters->lut_lookups += static_cast<std::uint64_t>(slots) * pixels * p.c_out;
  }
  return out;
}

Tensor conv_shared_real(const Tensor& x, const EngineLayer& layer,
                        EngineCounters* counters) {
  const PackedLayer& p = layer.packed;
  if (x.rank() != 4 || x.dim(1) != p.c_in)
    throw ContractViolation("conv_shared_real: input " + x.shape().str());
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int ho = kernels::output_extent(H, p.k, p.stride, p.pad);
  const int wo = kernels::output_extent(W, p.k, p.stride, p.pad);
  const int n = p.unit_length(), slots = slots_of(p);
  const std::size_t members = layer.members.size();
  Tensor y(Shape{N, p.c_out, ho, wo});
  std::vector<real> slice(static_cast<std::size_t>(n)), lut(members);
  for (int b = 0; b < N; ++b)
    for (int t = 0; t < slots; ++t)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const int by = oy * p.stride - p.pad, bx = ox * p.stride - p.pad;
          for (int l = 0; l < n; ++l) {
            int c = t, iy = by, ix = bx;
            if (p.unit == UnitMode::Kernel) {
              iy += l / p.k;
              ix += l % p.k;
            } else {
              c = t * kVectorWidth + l;
            }
            slice[static_cast<std::size_t>(l)] =
                (iy < 0 || iy >= H || ix < 0 || ix >= W) ? 0.0 : x.at(b, c, iy, ix);
          }
          for (std::size_t j = 0; j < members; ++j) {
            real acc = 0;
            for (int l = 0; l < n; ++l)
              acc += ((layer.members[j] >> (n - 1 - l)) & 1u)
                         ? slice[static_cast<std::size_t>(l)]
                         : -slice[static_cast<std::size_t>(l)];
            lut[j] = acc;
          }
          for (int oc = 0; oc < p.c_out; ++oc)
            y.at(b, oc, oy, ox) +=
                lut[layer.indices[static_cast<std::size_t>(oc) * slots + t]];
        }
  if (counters) {
    const auto pix = static_cast<std::uint64_t>(N) * ho * wo * slots;
    counters->dot_products += pix * members;
    counters->lut_lookups += pix * p.c_out;
  }
  return y;
}

Engine::Engine(const PackedModel& model) : model_(model) {
  // Walk the records once with symbolic shapes so a corrupt model fails
  // here rather than halfway through a batch.
  Dims cur = model_.input;
  bool flat = false;
  std::vector<std::optional<Dims>> slots;
  auto fail = [](std::size_t i, const std::string& what) {
    throw CorruptModelError("record " + std::to_string(i) + ": " + what);
  };
  auto conv_out = [&](std::size_t i, Dims in, int c_in, int c_out, int k,
                      int stride, int pad) {
    if (flat || in.c != c_in) fail(i, "convolution input mismatch");
    if (in.h + 2 * pad < k || in.w + 2 * pad < k) fail(i, "kernel larger than input");
    return Dims{c_out, (in.h + 2 * pad - k) / stride + 1,
                (in.w + 2 * pad - k) / stride + 1};
  };
  auto check_bn = [&](std::size_t i, const BatchNormRecord& b, int c) {
    if (static_cast<int>(b.gamma.size()) != c) fail(i, "batch norm channel mismatch");
  };

  for (std::size_t i = 0; i < model_.records.size(); ++i) {
    std::vector<EngineLayer> el;
    const auto& rec = model_.records[i];
    if (const auto* p = std::get_if<PackedLayer>(&rec)) {
      cur = conv_out(i, cur, p->c_in, p->c_out, p->k, p->stride, p->pad);
      el.emplace_back(*p);
    } else if (const auto* f = std::get_if<FpConvRecord>(&rec)) {
      cur = conv_out(i, cur, f->c_in, f->c_out, f->k, f->stride, f->pad);
    } else if (const auto* b = std::get_if<BatchNormRecord>(&rec)) {
      check_bn(i, *b, cur.c);
    } else if (const auto* pl = std::get_if<PoolRecord>(&rec)) {
      if (flat || cur.h + 2 * pl->pad < pl->k || cur.w + 2 * pl->pad < pl->k)
        fail(i, "pool window larger than input");
      cur = {cur.c, (cur.h + 2 * pl->pad - pl->k) / pl->stride + 1,
             (cur.w + 2 * pl->pad - pl->k) / pl->stride + 1};
    } else if (std::holds_alternative<GlobalPoolRecord>(rec)) {
      cur = {cur.c, 1, 1};
    } else if (const auto* l = std::get_if<LinearRecord>(&rec)) {
      if (l->in != cur.c * cur.h * cur.w) fail(i, "fc input mismatch");
      cur = {l->out, 1, 1};
      flat = true;
    } else if (const auto* s = std::get_if<SaveRecord>(&rec)) {
      if (slots.size() <= static_cast<std::size_t>(s->slot))
        slots.resize(static_cast<std::size_t>(s->slot) + 1);
      slots[static_cast<std::size_t>(s->slot)] = cur;
    } else if (const auto* a = std::get_if<AddRecord>(&rec)) {
      if (static_cast<std::size_t>(a->slot) >= slots.size() ||
          !slots[static_cast<std::size_t>(a->slot)])
        fail(i, "add reads an unsaved slot");
      Dims src = *slots[static_cast<std::size_t>(a->slot)];
      if (a->shortcut == Shortcut::Pad) {
        if (a->c_out < src.c) fail(i, "pad shortcut drops channels");
        src = {a->c_out, (src.h + a->stride - 1) / a->stride,
               (src.w + a->stride - 1) / a->stride};
      } else if (a->shortcut == Shortcut::Conv) {
        if (a->proj_quant) {
          src = conv_out(i, src, a->proj_quant->c_in, a->proj_quant->c_out,
                         a->proj_quant->k, a->proj_quant->stride,
                         a->proj_quant->pad);
          el.emplace_back(*a->proj_quant);
        } else if (a->proj_fp) {
          src = conv_out(i, src, a->proj_fp->c_in, a->proj_fp->c_out,
                         a->proj_fp->k, a->proj_fp->stride, a->proj_fp->pad);
        } else {
          fail(i, "conv shortcut without a projection");
        }
        if (!a->proj_bn) fail(i, "conv shortcut without batch norm");
        check_bn(i, *a->proj_bn, src.c);
      }
      if (!(src == cur)) fail(i, "add joins " + src.str() + " with " + cur.str());
    }
    layers_.push_back(std::move(el));
  }
  if (!flat || cur.c != model_.classes)
    throw CorruptModelError("model does not end in a " +
                            std::to_string(model_.classes) + "-way classifier");
}

namespace {

Tensor run_quant(const Tensor& x, const EngineLayer& el, const RunOptions& o,
                 EngineCounters* counters) {
  const PackedLayer& p = el.packed;
  Tensor y;
  if (p.binarize_input) {
    const int N = x.dim(0);
    for (int b = 0; b < N; ++b) {
      const Bitplanes planes = Bitplanes::pack(x, b);
      const IntMaps m = el.shares(o.sharing) ? conv_shared(planes, el, counters)
                                             : conv_xnor_popcount(planes, el, counters);
      if (b == 0) y = Tensor(Shape{N, m.channels, m.height, m.width});
      const std::size_t per = m.values.size();
      for (std::size_t i = 0; i < per; ++i)
        y[static_cast<std::size_t>(b) * per + i] = static_cast<real>(m.values[i]);
    }
  } else if (o.share_real) {
    y = conv_shared_real(x, el, counters);
  } else {
    y = kernels::conv2d_fp(x, el.weights, nullptr, p.stride, p.pad);
    if (counters)
      counters->dot_products += static_cast<std::uint64_t>(y.size()) *
                                static_cast<std::uint64_t>(slots_of(p));
  }
  return kernels::scale_channels(y, el.lambda);
}

Tensor run_bn(const Tensor& x, const BatchNormRecord& b) {
  return kernels::batch_norm_eval(x, b.mean, b.var, b.gamma, b.beta, b.eps);
}

}  // namespace

Tensor Engine::run(const Tensor& x, const RunOptions& options,
                   EngineCounters* counters) const {
  const Dims in = model_.input;
  if (x.rank() != 4 || x.dim(1) != in.c || x.dim(2) != in.h || x.dim(3) != in.w)
    throw DataError("input " + x.shape().str() + " does not match the model's " +
                    in.str());
  Tensor cur = x;
  std::vector<Tensor> slots;
  for (std::size_t i = 0; i < model_.records.size(); ++i) {
    const auto& rec = model_.records[i];
    if (std::holds_alternative<PackedLayer>(rec)) {
      cur = run_quant(cur, layers_[i][0], options, counters);
    } else if (const auto* f = std::get_if<FpConvRecord>(&rec)) {
      cur = kernels::conv2d_fp(cur, to_tensor(*f), nullptr, f->stride, f->pad);
    } else if (const auto* b = std::get_if<BatchNormRecord>(&rec)) {
      cur = run_bn(cur, *b);
    } else if (const auto* a = std::get_if<ActivationRecord>(&rec)) {
      cur = a->hardtanh ? kernels::hardtanh(cur) : kernels::relu(cur);
    } else if (const auto* pl = std::get_if<PoolRecord>(&rec)) {
      cur = pl->max ? kernels::max_pool(cur, pl->k, pl->stride, pl->pad)
                    : kernels::avg_pool(cur, pl->k, pl->stride, pl->pad);
    } else if (std::holds_alternative<GlobalPoolRecord>(rec)) {
      cur = kernels::global_avg_pool(cur);
    } else if (const auto* l = std::get_if<LinearRecord>(&rec)) {
      const Tensor w(Shape{l->out, l->in}, l->weight);
      const Tensor bias(Shape{l->out}, l->bias);
      cur = kernels::linear(cur, w, &bias);
    } else if (const auto* s = std::get_if<SaveRecord>(&rec)) {
      if (slots.size() <= static_cast<std::size_t>(s->slot))
        slots.resize(static_cast<std::size_t>(s->slot) + 1);
      slots[static_cast<std::size_t>(s->slot)] = cur;
    } else if (const auto* a = std::get_if<AddRecord>(&rec)) {
      Tensor sc = slots[static_cast<std::size_t>(a->slot)];
      if (a->shortcut == Shortcut::Pad) {
        sc = kernels::shortcut_pad(sc, a->c_out, a->stride);
      } else if (a->shortcut == Shortcut::Conv) {
        if (a->proj_quant)
          sc = run_quant(sc, layers_[i][0], options, counters);
        else
          sc = kernels::conv2d_fp(sc, to_tensor(*a->proj_fp), nullptr,
                                  a->proj_fp->stride, a->proj_fp->pad);
        sc = run_bn(sc, *a->proj_bn);
      }
      for (std::size_t j = 0; j < cur.size(); ++j) cur[j] = cur[j] + sc[j];
    }
  }
  return cur;
}

Tensor run_model(const PackedModel& model, const Tensor& x,
                 const RunOptions& options, EngineCounters* counters) {
  return Engine(model).run(x, options, counters);
}

}  // namespace sbnn
