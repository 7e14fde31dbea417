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

#include "sbnn/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>

#include "json.hpp"
#include "sbnn/error.hpp"

namespace sbnn {
namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::string layer_label(const std::vector<std::string>& names,
                        std::size_t i) {
  return i < names.size() ? names[i] : "layer" + std::to_string(i);
}

}  // namespace

std::vector<double> topk_coverage(std::span<const std::uint64_t> counts) {
  std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::uint64_t total = 0;
  for (auto c : sorted) total += c;
  std::vector<double> out(sorted.size(), 0.0);
  if (total == 0) return out;
  std::uint64_t run = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    run += sorted[i];
    out[i] = static_cast<double>(run) / static_cast<double>(total);
  }
  return out;
}

double coverage_at(std::span<const std::uint64_t> counts, std::size_t k) {
  if (k == 0 || counts.empty()) return 0.0;
  const auto cov = topk_coverage(counts);
  return cov[std::min(k, cov.size()) - 1];
}

AnalysisResult analyze_subsets(const KernelHistogram* histogram,
                               const RunRecord* record,
                               const std::vector<std::string>& layer_names,
                               const std::filesystem::path& out_dir) {
  AnalysisResult res;
  std::filesystem::create_directories(out_dir);

  if (histogram == nullptr || histogram->counts.empty()) {
    res.warnings.push_back("no kernel histogram; histogram.csv and "
                           "coverage.csv skipped");
  } else {
    const auto hist_path = out_dir / "histogram.csv";
    auto h = open_out(hist_path);
    histogram->write_csv(h);
    res.files.push_back(hist_path);

    const auto cov_path = out_dir / "coverage.csv";
    auto c = open_out(cov_path);
    c << "layer_index,layer,k,coverage\n";
    for (std::size_t l = 0; l < histogram->counts.size(); ++l) {
      const auto cov = topk_coverage(histogram->counts[l]);
      for (std::size_t k = 0; k < cov.size(); ++k)
        c << l << ',' << layer_label(layer_names, l) << ',' << k + 1 << ','
          << cov[k] << '\n';
    }
    res.files.push_back(cov_path);
  }

  if (record == nullptr || record->snapshots.empty()) {
    res.warnings.push_back("no subset snapshots; subsets.json skipped");
    return res;
  }
  nlohmann::ordered_json j;
  j["seed"] = record->seed;
  j["mode"] = to_string(record->mode);
  j["tau"] = record->tau;
  auto snaps = nlohmann::ordered_json::array();
  const auto& first = record->snapshots.front();
  const SubsetSnapshot* prev = nullptr;
  for (const auto& s : record->snapshots) {
    nlohmann::ordered_json e;
    e["epoch"] = s.epoch;
    auto layers = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      const std::set<std::uint32_t> now(s.layers[l].begin(), s.layers[l].end());
      nlohmann::ordered_json lj;
      lj["layer"] = layer_label(layer_names, l);
      lj["codes"] = s.layers[l];
      std::vector<std::uint32_t> added, removed;
      if (prev != nullptr && l < prev->layers.size()) {
        const std::set<std::uint32_t> before(prev->layers[l].begin(),
                                             prev->layers[l].end());
        std::set_difference(now.begin(), now.end(), before.begin(),
                            before.end(), std::back_inserter(added));
        std::set_difference(before.begin(), before.end(), now.begin(),
                            now.end(), std::back_inserter(removed));
      }
      lj["added"] = added;
      lj["removed"] = removed;
      std::size_t kept = 0;
      if (l < first.layers.size())
        for (auto code : first.layers[l]) kept += now.count(code);
      lj["retained_from_first"] =
          now.empty() ? 0.0
                      : static_cast<double>(kept) /
                            static_cast<double>(first.layers[l].size());
      layers.push_back(std::move(lj));
    }
    e["layers"] = std::move(layers);
    snaps.push_back(std::move(e));
    prev = &s;
  }
  j["snapshots"] = std::move(snaps);
  const auto path = out_dir / "subsets.json";
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  res.files.push_back(path);
  return res;
}

}  // namespace sbnn
