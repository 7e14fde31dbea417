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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbnn/autodiff.hpp"
#include "sbnn/kernelspace.hpp"
#include "sbnn/optim.hpp"

namespace sbnn {

// How a network's quantizable layers are trained.
enum class QuantMode {
  FullPrecision,  // no binarization
  Bnn,            // w_bar = sign(w)
  VanillaSnn,     // nearest member of a fixed random subset
  Snn,            // nearest member of a refined subset
};

std::string to_string(QuantMode mode);
QuantMode parse_quant_mode(const std::string& name);

// Granularity of the binary units inside a weight tensor.
enum class UnitMode {
  Kernel,     // one k x k kernel per (c_out, c_in) pair
  Vector1x1,  // 1x1 weights split into 8-wide input-channel vectors
};

inline constexpr int kVectorWidth = 8;

// Entries per binary unit for a layer of kernel side k.
int unit_length(UnitMode mode, int k);
// Number of binary units in a (c_out, c_in, k, k) weight tensor. Throws
// ConfigError when vector mode is used with c_in not divisible by 8.
int unit_count(UnitMode mode, int c_out, int c_in, int k);

// Elementwise sign with sign(0) = +1.
std::vector<std::int8_t> binarize_bnn(std::span<const real> w);
Tensor binarize_bnn(const Tensor& w);

// Index of the subset member closest to `unit` in squared L2 distance.
// Computed as the smallest mismatch cost sum |w_l| over positions where the
// member's sign disagrees with sign(w_l); equal costs resolve to the lowest
// member index.
int select_member(const KernelSubset& subset, std::span<const real> unit);

struct SnnBinarization {
  Tensor weights;                    // +-1, same shape as the latent weights
  std::vector<std::uint16_t> codes;  // member index per unit
};

// Maps every unit of w (c_out, c_in, k, k) onto its nearest subset member.
// Units are laid out contiguously in w: unit u spans entries
// [u * L, (u + 1) * L) with L the subset's unit length.
SnnBinarization binarize_snn_forward(const Tensor& w,
                                     const KernelSubset& subset);

// Straight-through estimator: passes grad where |w| < 1, zero elsewhere.
Tensor ste_backward_w(const Tensor& grad, const Tensor& w);

// m_jl <- sign(p_jl) where |p_jl| > theta, unchanged otherwise. Returns the
// number of entries whose sign flipped.
int refine_update_m(KernelSubset& subset, real theta);

// pGrad_j = sum of dL/dw_bar over units assigned to member j. Units are laid
// out as in binarize_snn_forward. Throws ContractViolation when `codes` does
// not describe `grad_wbar` or names a member outside the subset.
Tensor accumulate_p_grad(const KernelSubset& subset,
                         std::span<const std::uint16_t> codes,
                         const Tensor& grad_wbar);

// lambda_c = mean |w_c,:| over output channel c, rounded to binary32.
std::vector<real> channel_scaling(const Tensor& w);

struct QuantConvSpec {
  int c_in = 0;
  int c_out = 0;
  int k = 3;
  int stride = 1;
  int pad = 1;
  UnitMode unit = UnitMode::Kernel;
  bool binarize_activations = false;
};

// Convolution with binarized weights:
//   y = lambda_c * conv(x_bar, w_bar)
// where x_bar = sign(x) when binarize_activations is set.
class QuantConvLayer {
 public:
  // `subset` is required for VanillaSnn/Snn and ignored for Bnn.
  QuantConvLayer(std::string name, QuantConvSpec spec, QuantMode mode,
                 std::optional<KernelSubset> subset, real theta,
                 Rng& init_rng);

  const std::string& name() const { return name_; }
  const QuantConvSpec& spec() const { return spec_; }
  QuantMode mode() const { return mode_; }
  real theta() const { return theta_; }
  int unit_length() const;
  int units() const;
  bool has_subset() const { return mode_ != QuantMode::Bnn; }
  // A subset holding the whole universe can only be permuted by refinement,
  // so full-set layers skip it (this keeps them identical to Bnn).
  bool refines() const {
    return mode_ == QuantMode::Snn && subset_.tau < subset_.unit_length;
  }

  Parameter& weight() { return weight_; }
  const Parameter& weight() const { return weight_; }
  KernelSubset& subset() { return subset_; }
  const KernelSubset& subset() const { return subset_; }
  Tensor& p_grad() { return p_grad_; }
  Tensor& p_momentum() { return p_momentum_; }
  const Tensor& p_momentum() const { return p_momentum_; }

  // Records the layer on the tape. Training mode remembers the assignment
  // so the backward pass can route dL/dw_bar into pGrad.
  Var forward(Tape& tape, Var x, bool training);

  // Side-effect-free binarization of the current state. For Bnn the codes
  // hold (sign-pattern code - 1).
  SnnBinarization binarize() const;

  // Assignment of the most recent training forward pass.
  std::span<const std::uint16_t> codes() const { return codes_; }

  // Per-iteration hooks used by the trainer.
  int refine();                        // m update; returns sign flips
  std::vector<int> repair(Rng& rng);   // duplicate repair; returns rows
  void clamp_latent();                 // w <- clamp(w, -1, 1)
  void zero_grad();
  void collect_parameters(std::vector<ParamView>& out);

 private:
  void on_weight_grad(const Tensor& g, std::uint64_t generation,
                      std::uint64_t version);

  std::string name_;
  QuantConvSpec spec_;
  QuantMode mode_;
  real theta_;
  std::string p_name_;
  Parameter weight_;
  KernelSubset subset_;
  Tensor p_grad_;
  Tensor p_momentum_;
  std::vector<std::uint16_t> codes_;
  std::uint64_t forward_generation_ = 0;
  std::uint64_t subset_version_ = 0;
  std::uint64_t codes_generation_ = 0;
  std::uint64_t codes_version_ = 0;
};

}  // namespace sbnn
