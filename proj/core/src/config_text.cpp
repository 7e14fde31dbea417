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

#include "sbnn/config_text.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sbnn/error.hpp"

namespace sbnn {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void ConfigSection::set(const std::string& key, std::string value, int line) {
  if (values_.count(key))
    throw ConfigError("line " + std::to_string(line) + ": duplicate key '" +
                      key + "'");
  values_[key] = Entry{std::move(value), line};
}

std::string ConfigSection::where(const std::string& key) const {
  std::string s = name_.empty() ? "header" : "[" + name_ + "]";
  const auto it = values_.find(key);
  if (it != values_.end() && it->second.line > 0)
    s += " line " + std::to_string(it->second.line);
  return s + " key '" + key + "'";
}

std::optional<std::string> ConfigSection::get_string(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second.value;
}

std::optional<long long> ConfigSection::get_int(const std::string& key) {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s->c_str(), &end, 10);
  if (s->empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(where(key) + ": expected an integer, got '" + *s + "'");
  return v;
}

std::optional<double> ConfigSection::get_double(const std::string& key) {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s->c_str(), &end);
  if (s->empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(where(key) + ": expected a number, got '" + *s + "'");
  return v;
}

std::optional<bool> ConfigSection::get_bool(const std::string& key) {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1" || *s == "yes") return true;
  if (*s == "false" || *s == "0" || *s == "no") return false;
  throw ConfigError(where(key) + ": expected true or false, got '" + *s + "'");
}

void ConfigSection::finish() const {
  for (const auto& [key, entry] : values_)
    if (!used_.count(key)) throw ConfigError(where(key) + ": unknown key");
}

ConfigSection& ConfigDocument::section(const std::string& name) {
  auto it = sections.find(name);
  if (it == sections.end()) it = sections.emplace(name, ConfigSection(name)).first;
  return it->second;
}

void ConfigDocument::require_known_sections(
    const std::vector<std::string>& known) const {
  for (const auto& [name, sec] : sections) {
    if (name.empty()) continue;
    bool ok = false;
    for (const auto& k : known) ok = ok || k == name;
    if (!ok) throw ConfigError("unknown section [" + name + "]");
  }
}

ConfigDocument parse_config_text(const std::string& text) {
  ConfigDocument doc;
  doc.section("");
  std::istringstream in(text);
  std::string raw, current;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(number) +
                          ": malformed section header");
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty())
        throw ConfigError("line " + std::to_string(number) +
                          ": empty section name");
      if (current == "layers") {
        if (doc.has_layers)
          throw ConfigError("line " + std::to_string(number) +
                            ": duplicate [layers] section");
        doc.has_layers = true;
      } else {
        if (doc.has_section(current))
          throw ConfigError("line " + std::to_string(number) +
                            ": duplicate section [" + current + "]");
        doc.section(current);
      }
      continue;
    }
    if (current == "layers") {
      doc.layer_lines.push_back({number, line});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(number) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("line " + std::to_string(number) + ": empty key");
    doc.section(current).set(key, trim(line.substr(eq + 1)), number);
  }
  return doc;
}

ConfigDocument load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

LayerLine split_layer_line(const std::string& text, int line_number) {
  std::istringstream in(text);
  LayerLine out;
  in >> out.kind;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
      throw ConfigError("line " + std::to_string(line_number) +
                        ": expected key=value, got '" + tok + "'");
    out.options.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  return out;
}

}  // namespace sbnn
