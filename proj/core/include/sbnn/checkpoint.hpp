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

#include <memory>
#include <string>
#include <vector>

#include "sbnn/network.hpp"

namespace sbnn {

// Versioned binary snapshot of a network: architecture text, quantization
// options, every latent tensor with its momentum buffer, batch-norm running
// statistics and the kernel subsets with their refinement state.
//
//   "SBCK" u16 version, then little-endian fields (see checkpoint.cpp).
std::vector<unsigned char> serialize_checkpoint(const Network& net);
std::unique_ptr<Network> parse_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const Network& net, const std::string& path);
std::unique_ptr<Network> load_checkpoint(const std::string& path);

}  // namespace sbnn
