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
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "sbnn/dataset.hpp"
#include "sbnn/network.hpp"
#include "sbnn/optim.hpp"

namespace sbnn {

struct TrainOptions {
  TrainConfig sgd;           // sgd.seed also seeds the network
  NetworkOptions network;    // network.seed and strategy.seed are
                             // overwritten by sgd.seed
  int repair_every = 1;      // iterations between duplicate repairs
  int snapshot_every = 1;    // epochs between subset snapshots
  std::size_t eval_batch = 256;
  // Training images used to re-estimate batch-norm statistics before each
  // evaluation (0 keeps the running averages).
  std::size_t bn_recalibration = 0;
  bool record_losses = false;       // keep every iteration's loss
  std::ostream* log = nullptr;      // JSON-lines, one object per epoch
  std::function<void(const struct EpochRecord&)> on_epoch;
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_accuracy = 0;
  int sign_flips = 0;
  int repairs = 0;
};

// Member codes of every binarized layer at the end of an epoch (epoch 0 is
// the initial subset).
struct SubsetSnapshot {
  int epoch = 0;
  std::vector<std::vector<std::uint32_t>> layers;
};

struct RunRecord {
  std::uint64_t seed = 0;
  QuantMode mode = QuantMode::Bnn;
  SamplingStrategy::Kind strategy = SamplingStrategy::Kind::RandomLayerSpecific;
  int tau = 0;
  double theta = 0;
  std::vector<EpochRecord> epochs;
  std::vector<SubsetSnapshot> snapshots;
  std::vector<double> losses;   // per iteration when record_losses is set

  double final_val_accuracy() const {
    return epochs.empty() ? 0.0 : epochs.back().val_accuracy;
  }
  std::string to_json() const;
  // Inverse of to_json (losses are not stored). DataError on bad input.
  static RunRecord from_json(const std::string& text);
};

struct TrainResult {
  RunRecord record;
  std::unique_ptr<Network> network;
};

std::string epoch_json(const EpochRecord& e);

// Runs the training loop. Each iteration:
//   refine m (Snn) -> forward -> backward -> SGD step -> repair duplicates
//   (Snn, every repair_every iterations) -> clamp latent weights.
// Throws NumericError on a non-finite loss.
TrainResult train(const ResolvedArchitecture& arch, const Dataset& train_set,
                  const Dataset& val_set, const TrainOptions& options);

// Top-1 accuracy of eval-mode predictions.
double evaluate(Network& net, const Dataset& data, std::size_t batch = 256);

// Replaces every batch-norm running mean/variance with the plain average of
// per-batch statistics over the first `count` images of `data`.
void recalibrate_batch_norm(Network& net, const Dataset& data, std::size_t count,
                            std::size_t batch = 256);
// Eval-mode logits (N, classes) over the first `count` samples.
Tensor predict_logits(Network& net, const Dataset& data, std::size_t count,
                      std::size_t batch = 256);

struct ThetaRun {
  double theta = 0;
  std::uint64_t seed = 0;
  RunRecord record;
  std::vector<int> flips_per_epoch;
  double oscillation = 0;   // mean std of val accuracy over sliding windows
};

// Trains once per (theta, seed) with otherwise identical options.
std::vector<ThetaRun> ablate_theta(const ResolvedArchitecture& arch,
                                   const Dataset& train_set,
                                   const Dataset& val_set, TrainOptions base,
                                   const std::vector<double>& thetas,
                                   const std::vector<std::uint64_t>& seeds,
                                   int window = 3);

// Mean of the population std of `values` over every window of `window`
// consecutive entries; 0 when there are fewer entries than the window.
double sliding_std(const std::vector<double>& values, int window);

// Per binarized-scope layer (quantize flag set) histogram of the binary
// unit codes. Binarized layers report their deployed kernels; full-precision
// networks report sign patterns of the latent weights.
KernelHistogram collect_kernel_histogram(const Network& net);

}  // namespace sbnn
