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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sbnn {

// Key/value section of a configuration file. Every getter marks the key as
// used; finish() rejects keys nobody asked for.
class ConfigSection {
 public:
  ConfigSection() = default;
  explicit ConfigSection(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  void set(const std::string& key, std::string value, int line);
  // Adds or replaces a value (command-line overrides).
  void assign(const std::string& key, std::string value) {
    values_[key] = Entry{std::move(value), 0};
  }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  bool empty() const { return values_.empty(); }

  std::optional<std::string> get_string(const std::string& key);
  std::optional<long long> get_int(const std::string& key);
  std::optional<double> get_double(const std::string& key);
  std::optional<bool> get_bool(const std::string& key);

  std::string string_or(const std::string& key, const std::string& fallback) {
    return get_string(key).value_or(fallback);
  }
  long long int_or(const std::string& key, long long fallback) {
    return get_int(key).value_or(fallback);
  }
  double double_or(const std::string& key, double fallback) {
    return get_double(key).value_or(fallback);
  }
  bool bool_or(const std::string& key, bool fallback) {
    return get_bool(key).value_or(fallback);
  }

  // Throws ConfigError naming the first unused key.
  void finish() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string where(const std::string& key) const;

  std::string name_;
  std::map<std::string, Entry> values_;
  std::set<std::string> used_;
};

// A parsed configuration file:
//
//   schema = 1
//   name = tiny
//   [layers]
//   conv c_out=16 k=3
//   [train]
//   epochs = 4
//
// '#' starts a comment. Lines before the first section header form the
// header section (name ""). The [layers] section keeps its raw lines.
struct ConfigDocument {
  struct Line {
    int number = 0;
    std::string text;
  };

  std::map<std::string, ConfigSection> sections;
  std::vector<Line> layer_lines;
  bool has_layers = false;

  ConfigSection& section(const std::string& name);
  bool has_section(const std::string& name) const {
    return sections.count(name) != 0;
  }
  // Rejects sections outside `known` ("" and "layers" are always known).
  void require_known_sections(const std::vector<std::string>& known) const;
};

ConfigDocument parse_config_text(const std::string& text);
ConfigDocument load_config_file(const std::string& path);

// Splits "a=1 b=two" into ordered key/value pairs; the leading bare word is
// returned separately.
struct LayerLine {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> options;
};
LayerLine split_layer_line(const std::string& text, int line_number);

}  // namespace sbnn
