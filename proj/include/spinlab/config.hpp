#pragma once

#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

// key = value run manifests; '#' starts a comment, unknown keys are rejected
// once the consumer has read everything it understands.

namespace spinlab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string trim_ws(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

class KeyValueConfig {
 public:
  static KeyValueConfig from_stream(std::istream& in, const std::string& origin) {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim_ws(line);
      if (line.empty()) continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = trim_ws(line.substr(0, eq));
      std::string val = trim_ws(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (cfg.kv_.count(key))
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      cfg.kv_[key] = val;
    }
    return cfg;
  }

  static KeyValueConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return from_stream(in, path);
  }

  static KeyValueConfig from_string(const std::string& text) {
    std::istringstream in(text);
    return from_stream(in, "<inline>");
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
    read_.insert(key);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    return get_string(key);
  }

  double get_double(const std::string& key) { return parse_double(key, get_string(key)); }
  double get_double(const std::string& key, double def) {
    if (!has(key)) return def;
    return get_double(key);
  }

  long get_long(const std::string& key) { return parse_long(key, get_string(key)); }
  long get_long(const std::string& key, long def) {
    if (!has(key)) return def;
    return get_long(key);
  }

  bool get_bool(const std::string& key, bool def) {
    if (!has(key)) return def;
    std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(origin_ + ": key '" + key + "' is not a boolean: '" + v + "'");
  }

  void set(const std::string& key, const std::string& val) { kv_[key] = val; }

  void reject_unknown() const {
    std::string extra;
    for (const auto& [k, v] : kv_)
      if (!read_.count(k)) extra += (extra.empty() ? "" : ", ") + k;
    if (!extra.empty())
      throw ConfigError(origin_ + ": unknown keys: " + extra);
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }
  const std::string& origin() const { return origin_; }

 private:
  double parse_double(const std::string& key, const std::string& v) const {
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError(origin_ + ": key '" + key + "' is not a number: '" + v + "'");
    return x;
  }

  long parse_long(const std::string& key, const std::string& v) const {
    char* end = nullptr;
    long x = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError(origin_ + ": key '" + key + "' is not an integer: '" + v + "'");
    return x;
  }

  std::map<std::string, std::string> kv_;
  std::set<std::string> read_;
  std::string origin_ = "<empty>";
};

}  // namespace spinlab
