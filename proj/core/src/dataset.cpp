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

#include "sbnn/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include "sbnn/error.hpp"
#include "sbnn/rng.hpp"

namespace sbnn {
namespace {

std::vector<std::uint8_t> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

struct IdxFile {
  std::vector<std::uint32_t> dims;
  std::size_t offset = 0;
  std::vector<std::uint8_t> bytes;
};

IdxFile parse_idx(const std::string& path) {
  IdxFile f;
  f.bytes = read_all(path);
  if (f.bytes.size() < 4 || f.bytes[0] != 0 || f.bytes[1] != 0)
    throw DataError("'" + path + "' is not an IDX file");
  if (f.bytes[2] != 0x08)
    throw DataError("'" + path + "': only unsigned-byte IDX data is supported");
  const int rank = f.bytes[3];
  if (rank < 1 || rank > 4) throw DataError("'" + path + "': bad IDX rank");
  if (f.bytes.size() < 4 + 4 * static_cast<std::size_t>(rank))
    throw DataError("'" + path + "': truncated IDX header");
  std::size_t total = 1;
  for (int i = 0; i < rank; ++i) {
    f.dims.push_back(be32(f.bytes, 4 + 4 * static_cast<std::size_t>(i)));
    total *= f.dims.back();
  }
  f.offset = 4 + 4 * static_cast<std::size_t>(rank);
  if (f.bytes.size() != f.offset + total)
    throw DataError("'" + path + "': payload size " +
                    std::to_string(f.bytes.size() - f.offset) +
                    " does not match header (" + std::to_string(total) + ")");
  return f;
}

void check_labels(const Dataset& d) {
  for (int l : d.labels)
    if (l < 0 || l >= d.classes)
      throw DataError("label " + std::to_string(l) + " outside [0, " +
                      std::to_string(d.classes) + ")");
}

std::uint8_t to_pixel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Templates of the desk set: each class draws three anti-aliased strokes on
// a 16x16 canvas.
std::vector<std::array<double, 256>> desk_templates(std::uint64_t seed) {
  std::vector<std::array<double, 256>> t(10);
  Rng rng(derive_seed(seed, "desk-templates"));
  for (auto& img : t) {
    img.fill(0);
    for (int s = 0; s < 3; ++s) {
      const double x0 = uniform(rng, 2, 13), y0 = uniform(rng, 2, 13);
      const double x1 = uniform(rng, 2, 13), y1 = uniform(rng, 2, 13);
      for (int step = 0; step <= 40; ++step) {
        const double a = step / 40.0;
        const double px = x0 + a * (x1 - x0), py = y0 + a * (y1 - y0);
        for (int y = 0; y < 16; ++y)
          for (int x = 0; x < 16; ++x) {
            const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
            auto& v = img[static_cast<std::size_t>(y * 16 + x)];
            v = std::max(v, std::exp(-d2 / 1.2));
          }
      }
    }
  }
  return t;
}

}  // namespace

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  const std::size_t n = image_size();
  Tensor out(Shape{static_cast<int>(indices.size()), dims.c, dims.h, dims.w});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) throw ContractViolation("sample index out of range");
    const std::uint8_t* src = pixels.data() + indices[b] * n;
    for (std::size_t i = 0; i < n; ++i)
      out[b * n + i] = static_cast<real>(src[i]) / 127.5 - 1.0;
  }
  return out;
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  Dataset d{dims, classes, {}, {}};
  d.pixels.assign(pixels.begin(),
                  pixels.begin() + static_cast<std::ptrdiff_t>(n * image_size()));
  d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  return d;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const IdxFile img = parse_idx(images_path);
  const IdxFile lab = parse_idx(labels_path);
  if (img.dims.size() != 3 && img.dims.size() != 4)
    throw DataError("'" + images_path + "': image IDX must have rank 3 or 4");
  if (lab.dims.size() != 1)
    throw DataError("'" + labels_path + "': label IDX must have rank 1");
  if (img.dims[0] != lab.dims[0])
    throw DataError("image count " + std::to_string(img.dims[0]) +
                    " differs from label count " + std::to_string(lab.dims[0]));
  Dataset d;
  if (img.dims.size() == 3)
    d.dims = {1, static_cast<int>(img.dims[1]), static_cast<int>(img.dims[2])};
  else
    d.dims = {static_cast<int>(img.dims[1]), static_cast<int>(img.dims[2]),
              static_cast<int>(img.dims[3])};
  d.pixels.assign(img.bytes.begin() + static_cast<std::ptrdiff_t>(img.offset),
                  img.bytes.end());
  int max_label = 0;
  for (std::size_t i = lab.offset; i < lab.bytes.size(); ++i) {
    d.labels.push_back(lab.bytes[i]);
    max_label = std::max(max_label, d.labels.back());
  }
  d.classes = std::max(10, max_label + 1);
  return d;
}

void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw DataError("cannot write IDX files");
  const bool gray = data.dims.c == 1;
  img.put(0).put(0).put(0x08).put(static_cast<char>(gray ? 3 : 4));
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  if (!gray) put_be32(img, static_cast<std::uint32_t>(data.dims.c));
  put_be32(img, static_cast<std::uint32_t>(data.dims.h));
  put_be32(img, static_cast<std::uint32_t>(data.dims.w));
  img.write(reinterpret_cast<const char*>(data.pixels.data()),
            static_cast<std::streamsize>(data.pixels.size()));
  lab.put(0).put(0).put(0x08).put(1);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int l : data.labels) lab.put(static_cast<char>(l));
  if (!img || !lab) throw DataError("failed writing IDX files");
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths) {
  constexpr std::size_t kRecord = 3073;
  if (batch_paths.empty()) throw DataError("no CIFAR-10 batch files given");
  Dataset d;
  d.dims = {3, 32, 32};
  d.classes = 10;
  for (const auto& path : batch_paths) {
    const auto bytes = read_all(path);
    if (bytes.empty() || bytes.size() % kRecord != 0)
      throw DataError("'" + path + "': size " + std::to_string(bytes.size()) +
                      " is not a multiple of 3073-byte records");
    for (std::size_t at = 0; at < bytes.size(); at += kRecord) {
      d.labels.push_back(bytes[at]);
      d.pixels.insert(d.pixels.end(),
                      bytes.begin() + static_cast<std::ptrdiff_t>(at + 1),
                      bytes.begin() + static_cast<std::ptrdiff_t>(at + kRecord));
    }
  }
  check_labels(d);
  return d;
}

Dataset make_synthetic(const std::string& name, std::size_t count,
                       std::uint64_t seed, const std::string& split) {
  Dataset d;
  d.dims = {1, 16, 16};
  Rng rng(derive_seed(seed, "synthetic-" + name + "-" + split));
  d.pixels.reserve(count * 256);
  d.labels.reserve(count);
  if (name == "blobs2") {
    d.classes = 2;
    for (std::size_t i = 0; i < count; ++i) {
      const int label = static_cast<int>(uniform_below(rng, 2));
      const double bright = uniform(rng, 130, 190), dark = uniform(rng, 60, 120);
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          const bool left = x < 8;
          const double base = (left == (label == 0)) ? bright : dark;
          d.pixels.push_back(to_pixel(base + uniform(rng, -20, 20)));
        }
      d.labels.push_back(label);
    }
    return d;
  }
  if (name == "desk") {
    d.classes = 10;
    const auto templates = desk_templates(seed);
    for (std::size_t i = 0; i < count; ++i) {
      const int label = static_cast<int>(uniform_below(rng, 10));
      const int dx = static_cast<int>(uniform_below(rng, 5)) - 2;
      const int dy = static_cast<int>(uniform_below(rng, 5)) - 2;
      const double gain = uniform(rng, 150, 255);
      const double offset = uniform(rng, 0, 40);
      const auto& t = templates[static_cast<std::size_t>(label)];
      // A faint distractor from another class keeps the task from being
      // trivially separable.
      const auto& other =
          templates[(static_cast<std::size_t>(label) + 1 + uniform_below(rng, 9)) % 10];
      const double mix = uniform(rng, 0.0, 0.45);
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          const int sx = x - dx, sy = y - dy;
          double v = 0;
          if (sx >= 0 && sx < 16 && sy >= 0 && sy < 16) {
            const auto at = static_cast<std::size_t>(sy * 16 + sx);
            v = std::max(t[at], mix * other[at]);
          }
          d.pixels.push_back(to_pixel(offset + gain * v + 28.0 * normal(rng)));
        }
      d.labels.push_back(label);
    }
    return d;
  }
  throw ConfigError("unknown synthetic dataset '" + name +
                    "' (expected desk or blobs2)");
}

}  // namespace sbnn
