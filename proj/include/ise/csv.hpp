#pragma once

// Row-major CSV matrices and full-precision number formatting.

#include "ise/linalg.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

namespace ise {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 17 significant digits, round-trips every double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok, std::string_view context) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw IoError(std::string(context) + ": cannot parse number '" + std::string(tok) + "'");
  return v;
}

// Rows separated by row_sep, entries by commas and/or whitespace.
inline Matrix parse_matrix_rows(std::string_view text, char row_sep, std::string_view context) {
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(row_sep, pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::vector<double> row;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ',' || line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ',' && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
      if (j > i) row.push_back(parse_double(line.substr(i, j - i), context));
      i = j;
    }
    if (!row.empty()) rows.push_back(std::move(row));
    if (end == text.size()) break;
  }
  if (rows.empty()) throw IoError(std::string(context) + ": empty matrix");
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw IoError(std::string(context) + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_matrix_rows(text, '\n', path);
}

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
    os << '\n';
  }
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_matrix_csv(out, m);
}

// Inline form "a, b; c, d" used in config files.
inline std::string matrix_to_inline(const Matrix& m) {
  std::string s;
  for (Index i = 0; i < m.rows(); ++i) {
    if (i) s += "; ";
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) s += ", ";
      s += format_double(m(i, j));
    }
  }
  return s;
}

}  // namespace ise
