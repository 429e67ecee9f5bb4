#include "csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace boxsuite::csv {

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<Row> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    rows.push_back(Row{lineno, split(t)});
  }
  return rows;
}

std::optional<std::vector<std::string>> take_header(std::vector<Row>& rows) {
  if (rows.empty() || rows.front().fields.empty()) return std::nullopt;
  if (is_number(rows.front().fields.front())) return std::nullopt;
  std::vector<std::string> header = rows.front().fields;
  for (auto& h : header) {
    std::transform(h.begin(), h.end(), h.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  }
  rows.erase(rows.begin());
  return header;
}

double to_double(const std::string& path, const Row& row, std::size_t col) {
  if (col >= row.fields.size()) {
    throw ParseError(path, row.line, "missing column " + std::to_string(col + 1));
  }
  const std::string& s = row.fields[col];
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(path, row.line, "not a number: '" + s + "'");
  }
  return v;
}

long long to_int(const std::string& path, const Row& row, std::size_t col) {
  if (col >= row.fields.size()) {
    throw ParseError(path, row.line, "missing column " + std::to_string(col + 1));
  }
  const std::string& s = row.fields[col];
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(path, row.line, "not an integer: '" + s + "'");
  }
  return v;
}

}  // namespace boxsuite::csv
