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

#include <stdexcept>
#include <string>

namespace sbnn {

// Every error raised by the library derives from Error. The subclass decides
// the process exit code used by the command-line tool.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user configuration (bad tau, unknown layer kind, ...). Exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed input data, checkpoints or model files. Exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

class CorruptModelError : public DataError {
 public:
  using DataError::DataError;
};

// API misuse detected at run time, e.g. a backward pass over stale state.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbnn
