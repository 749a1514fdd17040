#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sml/errors.hpp"

namespace sml {

using json = nlohmann::ordered_json;

// 17 significant digits round-trip a double exactly.
inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::string fnv1a64_hex(std::string_view s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(s)));
  return std::string(buf);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void push_row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size())
      throw UsageError("CsvWriter: row width does not match header");
    rows_.push_back(cells);
  }

  std::string to_string() const {
    std::ostringstream out;
    write_line(out, header_);
    for (const auto& row : rows_) write_line(out, row);
    return out.str();
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("CsvWriter: cannot open " + path);
    out << to_string();
  }

 private:
  static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open " + path + " for writing");
  out << content;
}

struct TwoColumnCsv {
  std::vector<double> first;
  std::vector<double> second;
};

// Reads a two-column CSV with a mandatory header line.
inline TwoColumnCsv read_two_column_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open CSV file " + path);
  std::string line;
  if (!std::getline(in, line)) throw UsageError("CSV file is empty: " + path);

  auto parse_row = [](const std::string& text, double& a, double& b) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) return false;
    try {
      std::size_t used = 0;
      a = std::stod(text.substr(0, comma), &used);
      b = std::stod(text.substr(comma + 1), &used);
    } catch (const std::exception&) {
      return false;
    }
    return true;
  };

  double a = 0, b = 0;
  if (parse_row(line, a, b))
    throw UsageError("CSV header row required in " + path);

  TwoColumnCsv data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!parse_row(line, a, b))
      throw UsageError("malformed CSV row " + std::to_string(line_no) + " in " + path);
    data.first.push_back(a);
    data.second.push_back(b);
  }
  return data;
}

// Run manifest: the experiment-defining parameters plus a content hash of
// their canonical rendering. Scheduling knobs (worker count) are excluded
// so that aggregates stay byte-identical across pool sizes.
inline std::string manifest_string(json params) {
  const std::string canonical = params.dump();
  params["content_hash"] = fnv1a64_hex(canonical);
  return params.dump(2) + "\n";
}

}  // namespace sml
