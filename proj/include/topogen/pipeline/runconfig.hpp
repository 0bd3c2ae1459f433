#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "topogen/core/error.hpp"
#include "topogen/core/io.hpp"

namespace topogen::pipeline {

// Flat key=value configuration. A config file provides defaults; CLI flags
// override. The merged result is serialized into every output manifest so
// any stage can be replayed from its artifact alone.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto begin = line.find_first_not_of(" \t\r");
      if (begin == std::string::npos) continue;
      const auto end = line.find_last_not_of(" \t\r");
      line = line.substr(begin, end - begin + 1);
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ParameterError("config line " + std::to_string(lineno) + ": expected key=value");
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      auto trim = [](std::string& s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      trim(key);
      trim(value);
      if (key.empty()) throw ParameterError("config line " + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static RunConfig load(const std::filesystem::path& path) { return parse(read_file(path)); }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value) {
    std::ostringstream s;
    s.precision(17);
    s << value;
    values_[key] = s.str();
  }
  void set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ParameterError("config: missing key '" + key + "'");
    return it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double num(const std::string& key) const { return to_double(key, str(key)); }
  double num(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
  }
  int integer(const std::string& key) const {
    const double v = num(key);
    return static_cast<int>(v);
  }
  int integer(const std::string& key, int fallback) const {
    return has(key) ? integer(key) : fallback;
  }
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    try {
      return std::stoull(str(key));
    } catch (const std::exception&) {
      throw ParameterError("config: key '" + key + "' is not an unsigned integer");
    }
  }
  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParameterError("config: key '" + key + "' is not a boolean");
  }

  // flags win over file values
  void merge_overrides(const RunConfig& overrides) {
    for (const auto& [k, v] : overrides.values_) values_[k] = v;
  }

  RunConfig without(const std::string& key) const {
    RunConfig out = *this;
    out.values_.erase(key);
    return out;
  }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
    return out.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) cfg.values_[it.key()] = it.value();
    return cfg;
  }

 private:
  static double to_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ParameterError("config: key '" + key + "' is not a number: " + v);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace topogen::pipeline
