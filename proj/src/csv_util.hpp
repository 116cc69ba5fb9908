#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sppb/errors.hpp"

namespace sppb::csv {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_line(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

/// Parses a double field. Empty -> nan (missing). Throws DataError naming
/// the 1-based row and the column on garbage.
inline double parse_cell(const std::string& field, std::size_t row_number,
                         const std::string& column) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DataError("row " + std::to_string(row_number) + ", column '" + column +
                    "': non-numeric value '" + field + "'");
  return value;
}

struct Reader {
  explicit Reader(const std::string& path) : in(path), path_(path) {
    if (!in) throw DataError("cannot open file: " + path);
  }

  /// Reads the next line into `fields`; false at end of input. Skips blank
  /// lines and strips a trailing carriage return.
  bool next(std::vector<std::string>& fields, char delimiter) {
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      ++line_number;
      fields = split_line(line, delimiter);
      return true;
    }
    return false;
  }

  std::ifstream in;
  std::size_t line_number = 0;  // counts non-blank lines delivered
  std::string path_;
};

struct Writer {
  explicit Writer(const std::string& path) : out(path), path_(path) {
    if (!out) throw DataError("cannot write file: " + path);
  }

  void row(const std::vector<std::string>& fields, char delimiter) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].find(delimiter) != std::string::npos)
        throw DataError("field contains the delimiter: '" + fields[i] + "'");
      if (i) out << delimiter;
      out << fields[i];
    }
    out << '\n';
  }

  void close() {
    out.close();
    if (!out) throw DataError("write failed: " + path_);
  }

  std::ofstream out;
  std::string path_;
};

}  // namespace sppb::csv
