#pragma once

// Delimited text formats.
//   dense matrix: "rows cols" header line, then rows lines of cols values
//   vector:       values separated by whitespace, commas or newlines
//   triplets:     "row col value" per line, 1-indexed, an optional "d1 d2" header
// Blank lines and lines starting with '#' are skipped everywhere.

#include "cncaa/linops.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace cncaa {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError(where + ": cannot parse number '" + s + "'");
  }
  return v;
}

inline Index parse_index(const std::string& s, const std::string& where) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError(where + ": expected an integer, got '" + s + "'");
  }
  return static_cast<Index>(v);
}

// Non-comment lines, each split into fields, with 1-based line numbers.
struct Line {
  int number;
  std::vector<std::string> fields;
};

inline std::vector<Line> read_lines(std::istream& in) {
  std::vector<Line> out;
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos || raw[first] == '#') continue;
    out.push_back({number, split_fields(raw)});
  }
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

inline MatrixXd read_matrix(std::istream& in, const std::string& name = "matrix") {
  const auto lines = detail::read_lines(in);
  if (lines.empty()) throw FormatError(name + ": empty input");
  const auto& head = lines.front();
  if (head.fields.size() != 2) throw FormatError(name + ": first line must be 'rows cols'");
  const Index rows = detail::parse_index(head.fields[0], name + " header");
  const Index cols = detail::parse_index(head.fields[1], name + " header");
  if (rows < 1 || cols < 1) throw FormatError(name + ": dimensions must be positive");
  if (static_cast<Index>(lines.size()) - 1 != rows) {
    throw FormatError(name + ": header says " + std::to_string(rows) + " rows, found " +
                      std::to_string(lines.size() - 1));
  }
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& line = lines[static_cast<std::size_t>(i + 1)];
    const std::string where = name + " line " + std::to_string(line.number);
    if (static_cast<Index>(line.fields.size()) != cols) {
      throw FormatError(where + ": expected " + std::to_string(cols) + " values, found " +
                        std::to_string(line.fields.size()));
    }
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = detail::parse_double(line.fields[static_cast<std::size_t>(j)], where);
    }
  }
  return m;
}

inline MatrixXd read_matrix_file(const std::string& path) {
  auto in = detail::open_in(path);
  return read_matrix(in, path);
}

inline void write_matrix(std::ostream& out, const MatrixXd& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix_file(const std::string& path, const MatrixXd& m) {
  auto out = detail::open_out(path);
  write_matrix(out, m);
}

inline VectorXd read_vector(std::istream& in, const std::string& name = "vector") {
  std::vector<double> values;
  for (const auto& line : detail::read_lines(in)) {
    const std::string where = name + " line " + std::to_string(line.number);
    for (const auto& f : line.fields) values.push_back(detail::parse_double(f, where));
  }
  if (values.empty()) throw FormatError(name + ": no values");
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
}

inline VectorXd read_vector_file(const std::string& path) {
  auto in = detail::open_in(path);
  return read_vector(in, path);
}

/// One value per line.
inline void write_vector(std::ostream& out, const VectorXd& v) {
  for (Index i = 0; i < v.size(); ++i) out << format_double(v(i)) << '\n';
}

inline void write_vector_file(const std::string& path, const VectorXd& v) {
  auto out = detail::open_out(path);
  write_vector(out, v);
}

/// Observed entries of a d1 x d2 matrix: the mask operator and y (zero off Omega).
struct Observations {
  MeasurementOp op;
  VectorXd y;
};

/// Dimensions come from the optional header, else from the arguments, else
/// from the largest indices present.
inline Observations read_triplets(std::istream& in, Index d1 = 0, Index d2 = 0,
                                  const std::string& name = "triplets") {
  auto lines = detail::read_lines(in);
  std::size_t start = 0;
  if (!lines.empty() && lines.front().fields.size() == 2) {
    d1 = detail::parse_index(lines.front().fields[0], name + " header");
    d2 = detail::parse_index(lines.front().fields[1], name + " header");
    start = 1;
  }
  struct Entry {
    Index r, c;
    double v;
  };
  std::vector<Entry> entries;
  Index max_r = 0;
  Index max_c = 0;
  for (std::size_t k = start; k < lines.size(); ++k) {
    const auto& line = lines[k];
    const std::string where = name + " line " + std::to_string(line.number);
    if (line.fields.size() != 3) throw FormatError(where + ": expected 'row col value'");
    const Index r = detail::parse_index(line.fields[0], where);
    const Index c = detail::parse_index(line.fields[1], where);
    if (r < 1 || c < 1) throw FormatError(where + ": indices are 1-based");
    entries.push_back({r - 1, c - 1, detail::parse_double(line.fields[2], where)});
    max_r = std::max(max_r, r);
    max_c = std::max(max_c, c);
  }
  if (entries.empty()) throw FormatError(name + ": no observed entries");
  if (d1 <= 0) d1 = max_r;
  if (d2 <= 0) d2 = max_c;
  std::vector<std::pair<Index, Index>> omega;
  omega.reserve(entries.size());
  VectorXd y = VectorXd::Zero(d1 * d2);
  for (const auto& e : entries) {
    omega.emplace_back(e.r, e.c);
    if (e.r < d1 && e.c < d2) y(e.c * d1 + e.r) = e.v;
  }
  MeasurementOp op = MeasurementOp::entry_mask(d1, d2, omega);
  return {std::move(op), std::move(y)};
}

inline Observations read_triplets_file(const std::string& path, Index d1 = 0, Index d2 = 0) {
  auto in = detail::open_in(path);
  return read_triplets(in, d1, d2, path);
}

/// Writes the header and the observed entries of y.
inline void write_triplets(std::ostream& out, const MeasurementOp& mask, const VectorXd& y) {
  if (!mask.is_mask()) throw std::invalid_argument("write_triplets: needs an entry-mask operator");
  detail::require_size(y.size(), mask.rows(), "write_triplets y");
  const Index d1 = mask.mask_rows();
  out << d1 << ' ' << mask.mask_cols() << '\n';
  for (Index i = 0; i < y.size(); ++i) {
    if (mask.mask()(i) == 0.0) continue;
    out << (i % d1) + 1 << ' ' << (i / d1) + 1 << ' ' << format_double(y(i)) << '\n';
  }
}

inline void write_triplets_file(const std::string& path, const MeasurementOp& mask,
                                const VectorXd& y) {
  auto out = detail::open_out(path);
  write_triplets(out, mask, y);
}

/// Minimal CSV writer: header row, '.' decimals, round-trip doubles.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) {
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ostream& out_;
};

}  // namespace cncaa
