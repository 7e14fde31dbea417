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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sbnn/architecture.hpp"
#include "sbnn/tensor.hpp"

namespace sbnn {

// Labelled uint8 images in CHW order. Pixels are normalised to x/127.5 - 1
// when a batch is materialised.
struct Dataset {
  Dims dims;
  int classes = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const {
    return static_cast<std::size_t>(dims.c) * dims.h * dims.w;
  }
  Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
  // First n samples (or all when n >= size()).
  Dataset head(std::size_t n) const;
};

// MNIST-style IDX files: unsigned-byte images (rank 3: count, rows, cols) or
// (rank 4: count, channels, rows, cols) and rank-1 labels.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records (label byte, 3072 pixels).
Dataset load_cifar10(const std::vector<std::string>& batch_paths);

// Seeded synthetic sets generated in memory:
//   "desk"   10 classes of 1x16x16 stroke patterns under shift and noise;
//   "blobs2" 2 linearly separable classes of 1x16x16 half-plane images.
// Class templates depend on `seed` only; `split` selects an independent
// sample stream, so "train" and "test" share templates but not samples.
Dataset make_synthetic(const std::string& name, std::size_t count,
                       std::uint64_t seed, const std::string& split);

}  // namespace sbnn
