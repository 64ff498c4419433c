#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

// CSV with '#' provenance headers and a minimal JSON object writer.  All
// reals go through %.17g so files round-trip exactly; no timestamps, ever.

namespace spinlab {

inline std::string fmt_g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void comment(const std::string& s) { os_ << "# " << s << "\n"; }

  void columns(const std::vector<std::string>& names) { line(names); }
  void row(const std::vector<std::string>& cells) { line(cells); }

  static std::string cell(double v) { return fmt_g17(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << cells[i];
    }
    os_ << '\n';
  }

  std::ostream& os_;
};

class JsonWriter {
 public:
  void add_number(const std::string& key, double v) { items_.emplace_back(key, fmt_g17(v)); }
  void add_integer(const std::string& key, long long v) { items_.emplace_back(key, std::to_string(v)); }
  void add_bool(const std::string& key, bool v) { items_.emplace_back(key, v ? "true" : "false"); }
  void add_string(const std::string& key, const std::string& v) {
    items_.emplace_back(key, "\"" + escaped(v) + "\"");
  }

  void write(std::ostream& os) const {
    os << "{\n";
    for (std::size_t i = 0; i < items_.size(); ++i) {
      os << "  \"" << escaped(items_[i].first) << "\": " << items_[i].second;
      if (i + 1 < items_.size()) os << ',';
      os << '\n';
    }
    os << "}\n";
  }

 private:
  static std::string escaped(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out;
  }

  std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace spinlab
