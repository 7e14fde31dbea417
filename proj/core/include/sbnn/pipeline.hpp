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
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sbnn/accelsim.hpp"
#include "sbnn/analysis.hpp"
#include "sbnn/architecture.hpp"
#include "sbnn/config_text.hpp"
#include "sbnn/costmodel.hpp"
#include "sbnn/dataset.hpp"
#include "sbnn/trainer.hpp"

namespace sbnn {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | idx | cifar10
  std::string name = "desk";         // synthetic generator
  std::size_t train_size = 2000;
  std::size_t test_size = 500;
  std::uint64_t seed = 7;
  std::string train_images, train_labels, test_images, test_labels;  // idx
  std::vector<std::string> train_batches, test_batches;              // cifar10
};

// Everything a `run` needs. Sections of the config file:
//   header + [layers]  the architecture (or preset = ...)
//   [train]    epochs batch_size lr momentum weight_decay seed
//              repair_every snapshot_every eval_batch bn_recalibration
//   [quant]    mode tau tau_vector theta strategy histogram
//   [data]     source name train_size test_size seed train_images
//              train_labels test_images test_labels train_batches
//              test_batches
//   [hardware] pes clock_ghz accumulators line_buffer_width
//              accumulator_bits fill_cycles
//   [cost]     include_first_last count_subsets
//   [run]      parity_samples parity_tolerance
struct RunConfig {
  ArchitectureSpec arch;
  TrainOptions train;
  DataConfig data;
  HardwareConfig hardware;
  CostOptions cost;
  std::string histogram_path;  // FrequencyTopK source (histogram CSV)
  std::shared_ptr<KernelHistogram> histogram;
  std::size_t parity_samples = 100;
  double parity_tolerance = 1e-4;
};

// Validates every value (tau range, known names, positive sizes) and throws
// ConfigError; unknown sections and keys are rejected.
RunConfig parse_run_config(ConfigDocument& doc,
                           const std::string& geometry_override = "");
RunConfig load_run_config(const std::string& path,
                          const std::string& geometry_override = "");
// Reads the FrequencyTopK histogram named by histogram_path, if any.
void load_histogram(RunConfig& config, const ResolvedArchitecture& arch);

// (train, test)
std::pair<Dataset, Dataset> load_data(const DataConfig& data);

// Largest relative deviation of `got` from `want`, per sample normalised by
// the sample's largest |want| logit.
double max_relative_error(const Tensor& want, const Tensor& got);

struct StageCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct EndToEndResult {
  RunRecord record;
  CostReport cost;
  CycleReport bnn_cycles, snn_cycles;
  Timeline timeline;
  AnalysisResult analysis;
  std::vector<StageCheck> checks;
  std::vector<std::filesystem::path> artifacts;

  bool passed() const;
  std::string summary_json() const;
};

// train -> export -> cost -> simulate -> analyze -> parity checks. Artifacts
// go to out_dir. A failing stage rethrows its error with the stage name
// prefixed; failed checks are reported, not thrown.
EndToEndResult end_to_end(const RunConfig& config,
                          const std::filesystem::path& out_dir,
                          std::ostream* log = nullptr);

}  // namespace sbnn
