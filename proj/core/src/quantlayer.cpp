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

#include "sbnn/quantlayer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sbnn/tensor_ops.hpp"

namespace sbnn {

std::string to_string(QuantMode mode) {
  switch (mode) {
    case QuantMode::FullPrecision: return "fp";
    case QuantMode::Bnn: return "bnn";
    case QuantMode::VanillaSnn: return "vanilla";
    case QuantMode::Snn: return "snn";
  }
  return "unknown";
}

QuantMode parse_quant_mode(const std::string& name) {
  for (QuantMode m : {QuantMode::FullPrecision, QuantMode::Bnn,
                      QuantMode::VanillaSnn, QuantMode::Snn})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown quantization mode '" + name +
                    "' (expected fp, bnn, vanilla or snn)");
}

int unit_length(UnitMode mode, int k) {
  return mode == UnitMode::Kernel ? k * k : kVectorWidth;
}

int unit_count(UnitMode mode, int c_out, int c_in, int k) {
  if (mode == UnitMode::Kernel) return c_out * c_in;
  if (k != 1) throw ConfigError("vector mode needs 1x1 kernels");
  if (c_in % kVectorWidth != 0)
    throw ConfigError("vector mode needs c_in divisible by 8, got " +
                      std::to_string(c_in));
  return c_out * (c_in / kVectorWidth);
}

std::vector<std::int8_t> binarize_bnn(std::span<const real> w) {
  std::vector<std::int8_t> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] >= 0 ? 1 : -1;
  return out;
}

Tensor binarize_bnn(const Tensor& w) { return kernels::sign(w); }

int select_member(const KernelSubset& subset, std::span<const real> unit) {
  const int n = subset.unit_length;
  if (static_cast<int>(unit.size()) != n)
    throw ContractViolation("unit length does not match subset");
  int best = 0;
  real best_cost = std::numeric_limits<real>::infinity();
  for (int j = 0; j < subset.size(); ++j) {
    const std::int8_t* mj = subset.m.data() + static_cast<std::size_t>(j) * n;
    real cost = 0;
    for (int l = 0; l < n; ++l) {
      const real w = unit[static_cast<std::size_t>(l)];
      // Disagreement between member sign and w costs |w|; w == 0 costs 0.
      if ((mj[l] > 0) != (w > 0) && w != 0) cost += std::abs(w);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = j;
      if (cost == 0) break;
    }
  }
  return best;
}

SnnBinarization binarize_snn_forward(const Tensor& w,
                                     const KernelSubset& subset) {
  if (subset.m.size() != static_cast<std::size_t>(subset.size()) *
                             static_cast<std::size_t>(subset.unit_length))
    throw ContractViolation("subset does not hold 2^tau members");
  const auto n = static_cast<std::size_t>(subset.unit_length);
  if (w.size() % n != 0)
    throw ContractViolation("weights are not a whole number of units");
  const std::size_t units = w.size() / n;
  SnnBinarization out{Tensor(w.shape()), std::vector<std::uint16_t>(units)};
  for (std::size_t u = 0; u < units; ++u) {
    const int j = select_member(subset, w.values().subspan(u * n, n));
    out.codes[u] = static_cast<std::uint16_t>(j);
    const auto member = subset.member(j);
    for (std::size_t l = 0; l < n; ++l) out.weights[u * n + l] = member[l];
  }
  return out;
}

Tensor ste_backward_w(const Tensor& grad, const Tensor& w) {
  if (grad.size() != w.size())
    throw ContractViolation("ste_backward_w: shape mismatch");
  Tensor g(w.shape());
  for (std::size_t i = 0; i < w.size(); ++i)
    g[i] = (w[i] > -1 && w[i] < 1) ? grad[i] : real{0};
  return g;
}

int refine_update_m(KernelSubset& subset, real theta) {
  if (!(theta >= 0)) throw ConfigError("theta must be >= 0");
  int flips = 0;
  for (std::size_t i = 0; i < subset.m.size(); ++i) {
    const real p = subset.p[i];
    if (std::abs(p) <= theta) continue;
    const std::int8_t s = p > 0 ? 1 : -1;
    if (s != subset.m[i]) {
      subset.m[i] = s;
      ++flips;
    }
  }
  return flips;
}

Tensor accumulate_p_grad(const KernelSubset& subset,
                         std::span<const std::uint16_t> codes,
                         const Tensor& grad_wbar) {
  const auto n = static_cast<std::size_t>(subset.unit_length);
  if (codes.size() * n != grad_wbar.size())
    throw ContractViolation(
        "kernel assignment does not match the gradient (stale forward pass?)");
  Tensor pg(Shape{subset.size(), subset.unit_length});
  for (std::size_t u = 0; u < codes.size(); ++u) {
    const std::size_t j = codes[u];
    if (j >= static_cast<std::size_t>(subset.size()))
      throw ContractViolation("kernel assignment names a member outside the "
                              "subset");
    for (std::size_t l = 0; l < n; ++l) pg[j * n + l] += grad_wbar[u * n + l];
  }
  return pg;
}

std::vector<real> channel_scaling(const Tensor& w) {
  const int c_out = w.dim(0);
  const std::size_t per = w.size() / static_cast<std::size_t>(c_out);
  std::vector<real> lambda(static_cast<std::size_t>(c_out));
  for (int c = 0; c < c_out; ++c) {
    real acc = 0;
    for (std::size_t i = 0; i < per; ++i)
      acc += std::abs(w[static_cast<std::size_t>(c) * per + i]);
    lambda[static_cast<std::size_t>(c)] =
        static_cast<real>(static_cast<float>(acc / static_cast<real>(per)));
  }
  return lambda;
}

QuantConvLayer::QuantConvLayer(std::string name, QuantConvSpec spec,
                               QuantMode mode,
                               std::optional<KernelSubset> subset, real theta,
                               Rng& init_rng)
    : name_(std::move(name)), spec_(spec), mode_(mode), theta_(theta),
      p_name_(name_ + ".p") {
  if (mode == QuantMode::FullPrecision)
    throw ConfigError("QuantConvLayer cannot run in full precision mode");
  if (!(theta >= 0)) throw ConfigError("theta must be >= 0");
  unit_count(spec.unit, spec.c_out, spec.c_in, spec.k);  // validates shape
  if (spec.unit == UnitMode::Kernel && spec.k * spec.k > kMaxUnitLength)
    throw ConfigError("kernel mode supports k <= 4");

  Tensor w(Shape{spec.c_out, spec.c_in, spec.k, spec.k});
  const real std_dev = std::sqrt(2.0 / (spec.c_in * spec.k * spec.k));
  for (auto& v : w.values())
    v = std::clamp(normal(init_rng) * std_dev, real{-1}, real{1});
  weight_ = Parameter(name_ + ".weight", std::move(w));

  if (has_subset()) {
    if (!subset)
      throw ConfigError("layer '" + name_ + "' needs a kernel subset");
    if (subset->unit_length != unit_length())
      throw ConfigError("subset unit length does not match layer '" + name_ +
                        "'");
    subset_ = std::move(*subset);
    p_grad_ = Tensor(subset_.p.shape());
    p_momentum_ = Tensor(subset_.p.shape());
  }
}

int QuantConvLayer::unit_length() const {
  return sbnn::unit_length(spec_.unit, spec_.k);
}

int QuantConvLayer::units() const {
  return unit_count(spec_.unit, spec_.c_out, spec_.c_in, spec_.k);
}

SnnBinarization QuantConvLayer::binarize() const {
  if (has_subset()) return binarize_snn_forward(weight_.value, subset_);
  SnnBinarization out{binarize_bnn(weight_.value), {}};
  const auto n = static_cast<std::size_t>(unit_length());
  const auto signs = binarize_bnn(weight_.value.values());
  out.codes.resize(signs.size() / n);
  for (std::size_t u = 0; u < out.codes.size(); ++u)
    out.codes[u] = static_cast<std::uint16_t>(pattern_bits(encode_pattern(
        std::span<const std::int8_t>(signs).subspan(u * n, n))));
  return out;
}

Var QuantConvLayer::forward(Tape& tape, Var x, bool training) {
  const Var a = spec_.binarize_activations ? ops::sign_ste(tape, x) : x;
  std::vector<real> lambda = channel_scaling(weight_.value);

  Var wv;
  if (training) {
    Tensor wbar;
    if (has_subset()) {
      auto bin = binarize_snn_forward(weight_.value, subset_);
      wbar = std::move(bin.weights);
      codes_ = std::move(bin.codes);
    } else {
      wbar = binarize_bnn(weight_.value);
      codes_.clear();
    }
    codes_generation_ = ++forward_generation_;
    codes_version_ = subset_version_;
    const std::uint64_t gen = codes_generation_, ver = codes_version_;
    wv = tape.leaf_with_sink(std::move(wbar), [this, gen, ver](const Tensor& g) {
      on_weight_grad(g, gen, ver);
    });
  } else {
    wv = tape.constant(binarize().weights);
  }
  const Var y = ops::conv2d(tape, a, wv, spec_.stride, spec_.pad);
  return ops::scale_channels(tape, y, std::move(lambda));
}

void QuantConvLayer::on_weight_grad(const Tensor& g, std::uint64_t generation,
                                    std::uint64_t version) {
  if (generation != forward_generation_ || version != subset_version_)
    throw ContractViolation("layer '" + name_ +
                            "': backward pass over a stale kernel assignment");
  const Tensor gw = ste_backward_w(g, weight_.value);
  for (std::size_t i = 0; i < gw.size(); ++i) weight_.grad[i] += gw[i];
  if (refines()) {
    const Tensor pg = accumulate_p_grad(subset_, codes_, g);
    for (std::size_t i = 0; i < pg.size(); ++i) p_grad_[i] += pg[i];
  }
}

int QuantConvLayer::refine() {
  if (!refines()) return 0;
  const int flips = refine_update_m(subset_, theta_);
  if (flips) ++subset_version_;
  return flips;
}

std::vector<int> QuantConvLayer::repair(Rng& rng) {
  if (!refines()) return {};
  auto rows = repair_duplicates(subset_, rng);
  if (!rows.empty()) {
    ++subset_version_;
    const auto n = static_cast<std::size_t>(subset_.unit_length);
    for (int j : rows)
      for (std::size_t l = 0; l < n; ++l)
        p_momentum_[static_cast<std::size_t>(j) * n + l] = 0;
  }
  return rows;
}

void QuantConvLayer::clamp_latent() {
  for (auto& v : weight_.value.values()) v = std::clamp(v, real{-1}, real{1});
}

void QuantConvLayer::zero_grad() {
  weight_.zero_grad();
  if (refines()) p_grad_.fill(0);
}

void QuantConvLayer::collect_parameters(std::vector<ParamView>& out) {
  out.push_back(ParamView::of(weight_));
  if (refines())
    out.push_back(ParamView{p_name_,
                            subset_.p.values(), p_grad_.values(),
                            p_momentum_.values(), false});
}

}  // namespace sbnn
