#pragma once

// Minimal comma-separated reader shared by the loaders. No quoting support;
// none of the data files need it.

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "boxsuite/error.hpp"

namespace boxsuite::csv {

struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool is_number(const std::string& s);

// Reads all nonblank lines. Lines starting with '#' are comments.
std::vector<Row> read_rows(const std::string& path);

// Returns the header row (lower-cased fields) when the first row is not
// numeric, removing it from rows.
std::optional<std::vector<std::string>> take_header(std::vector<Row>& rows);

double to_double(const std::string& path, const Row& row, std::size_t col);
long long to_int(const std::string& path, const Row& row, std::size_t col);

}  // namespace boxsuite::csv
