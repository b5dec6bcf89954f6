// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "durhaz/errors.hpp"
#include "durhaz/io.hpp"

namespace durhaz {

// Flat "key = value" configuration with dotted section prefixes
// (corpus.*, train.*, generate.*, classes.*), full-line # comments, and
// DURHAZ_-prefixed environment overrides: the env name is the key upper-cased
// with '.' and '-' turned into '_' (corpus.seed -> DURHAZ_CORPUS_SEED).

class Config {
 public:
  Config() = default;

  static Config from_string(const std::string& content, const std::string& origin = "<string>") {
    Config cfg;
    std::istringstream in(content);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw ParseError(origin + " line " + std::to_string(line_no) +
                         ": expected 'key = value'");
      }
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key.empty()) {
        throw ParseError(origin + " line " + std::to_string(line_no) + ": empty key");
      }
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    return from_string(read_text_file(path), path);
  }

  static std::string env_name(const std::string& key) {
    std::string out = "DURHAZ_";
    for (char c : key) {
      if (c == '.' || c == '-') {
        out += '_';
      } else {
        out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
    }
    return out;
  }

  /// Environment first, then the file.
  std::optional<std::string> raw(const std::string& key) const {
    if (const char* env = std::getenv(env_name(key).c_str())) {
      return std::string(env);
    }
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    return std::nullopt;
  }

  bool has(const std::string& key) const { return raw(key).has_value(); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return raw(key).value_or(fallback);
  }

  double get_double(const std::string& key, double fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    try {
      return std::stod(*v);
    } catch (const std::exception&) {
      throw ParseError("config key '" + key + "': bad number '" + *v + "'");
    }
  }

  long get_int(const std::string& key, long fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    try {
      return std::stol(*v);
    } catch (const std::exception&) {
      throw ParseError("config key '" + key + "': bad integer '" + *v + "'");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    try {
      return std::stoull(*v);
    } catch (const std::exception&) {
      throw ParseError("config key '" + key + "': bad integer '" + *v + "'");
    }
  }

  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    std::vector<int> out;
    for (const auto& tok : split_ws(*v)) {
      try {
        out.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ParseError("config key '" + key + "': bad integer list entry '" + tok + "'");
      }
    }
    return out;
  }

  /// File keys beginning with `prefix`, sorted; env overrides still apply to
  /// each key's value.
  std::vector<std::pair<std::string, std::string>> with_prefix(const std::string& prefix) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (auto it = values_.lower_bound(prefix); it != values_.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      out.emplace_back(it->first, raw(it->first).value_or(it->second));
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace durhaz
