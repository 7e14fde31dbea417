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
#include <string>
#include <variant>
#include <vector>

#include "sbnn/architecture.hpp"
#include "sbnn/network.hpp"

namespace sbnn {

// MSB-first bit packing: the first value written occupies the most
// significant bits of the first byte.
class BitWriter {
 public:
  void write(std::uint32_t value, int bits);
  std::uint64_t bit_count() const { return bits_; }
  std::vector<std::uint8_t> finish() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint32_t read(int bits);

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::uint64_t pos_ = 0;
};

// A binarized convolution in deployment form.
struct PackedLayer {
  UnitMode unit = UnitMode::Kernel;
  int k = 3;
  int tau = 0;
  int c_in = 0, c_out = 0;
  int stride = 1, pad = 1;
  bool binarize_input = false;
  // Implicit subset: member j is the unit whose pattern bits equal j (plain
  // 1-bit BNN packing, tau == unit length, no subset table stored).
  bool full_set = false;
  std::vector<std::uint8_t> subset_bits;   // 2^tau members, unit_length bits each
  std::vector<std::uint8_t> index_stream;  // one tau-bit member index per unit
  std::vector<float> lambda;               // c_out

  int unit_length() const { return sbnn::unit_length(unit, k); }
  int units() const { return unit_count(unit, c_out, c_in, k); }
  int subset_size() const { return 1 << tau; }
  // Pattern bits (MSB = first entry, 1 = +1) of every member.
  std::vector<std::uint32_t> member_patterns() const;
  std::vector<std::uint32_t> indices() const;
  // Weight payload: tau bits per unit plus the subset table.
  std::uint64_t payload_bits() const;
  // Throws CorruptModelError when sizes or indices are inconsistent.
  void validate() const;

  bool operator==(const PackedLayer&) const = default;
};

struct FpConvRecord {
  int c_in = 0, c_out = 0, k = 1, stride = 1, pad = 0;
  std::vector<double> weight;
  bool operator==(const FpConvRecord&) const = default;
};

struct BatchNormRecord {
  std::vector<double> gamma, beta, mean, var;
  double eps = 1e-5;
  bool operator==(const BatchNormRecord&) const = default;
};

struct ActivationRecord {
  bool hardtanh = false;  // ReLU otherwise
  bool operator==(const ActivationRecord&) const = default;
};

struct PoolRecord {
  bool max = false;
  int k = 2, stride = 2, pad = 0;
  bool operator==(const PoolRecord&) const = default;
};

struct GlobalPoolRecord {
  bool operator==(const GlobalPoolRecord&) const = default;
};

struct LinearRecord {
  int in = 0, out = 0;
  std::vector<double> weight, bias;
  bool operator==(const LinearRecord&) const = default;
};

struct SaveRecord {
  int slot = 0;
  bool operator==(const SaveRecord&) const = default;
};

struct AddRecord {
  int slot = 0;
  Shortcut shortcut = Shortcut::Identity;
  int stride = 1;
  int c_out = 0;
  // Shortcut::Conv: exactly one of the two convolutions plus its norm.
  std::optional<PackedLayer> proj_quant;
  std::optional<FpConvRecord> proj_fp;
  std::optional<BatchNormRecord> proj_bn;
  bool operator==(const AddRecord&) const = default;
};

using PackedRecord =
    std::variant<PackedLayer, FpConvRecord, BatchNormRecord, ActivationRecord,
                 PoolRecord, GlobalPoolRecord, LinearRecord, SaveRecord,
                 AddRecord>;

// Contents of a .sbnn file.
struct PackedModel {
  static constexpr std::uint16_t kVersion = 1;
  Dims input;
  int classes = 0;
  std::vector<PackedRecord> records;

  std::vector<const PackedLayer*> quantized_layers() const;
  // Sum of payload_bits() over every binarized convolution.
  std::uint64_t payload_bits() const;
  bool operator==(const PackedModel&) const = default;
};

// Exports a network. Bnn layers use the implicit full set; subset layers
// store their table and per-unit member indices.
PackedModel compile(const Network& net);

std::vector<std::uint8_t> serialize_model(const PackedModel& model);
// Throws CorruptModelError on bad magic, version, truncation or
// inconsistent records.
PackedModel parse_model(const std::vector<std::uint8_t>& bytes);
void save_model(const PackedModel& model, const std::string& path);
PackedModel load_model(const std::string& path);

}  // namespace sbnn
