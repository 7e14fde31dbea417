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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sbnn/kernelspace.hpp"
#include "sbnn/trainer.hpp"

namespace sbnn {

// Share of all entries covered by the k most frequent codes, for
// k = 1..counts.size(). An empty or all-zero row gives all zeros.
std::vector<double> topk_coverage(std::span<const std::uint64_t> counts);
double coverage_at(std::span<const std::uint64_t> counts, std::size_t k);

struct AnalysisResult {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
};

// Writes histogram.csv, coverage.csv and subsets.json into out_dir. Either
// input may be null; whatever is missing is skipped with a warning.
// layer_names labels the histogram rows (index names are used if short).
AnalysisResult analyze_subsets(const KernelHistogram* histogram,
                               const RunRecord* record,
                               const std::vector<std::string>& layer_names,
                               const std::filesystem::path& out_dir);

}  // namespace sbnn
