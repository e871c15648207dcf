#pragma once

// Strict CSV reader/writer for the interchange files.
//
// Accepted: a header line followed by one line per example, comma separated,
// no quoting, optional final newline, LF or CRLF line endings.
// Rejected: UTF-8 byte order marks, blank lines, trailing commas, ragged rows.

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Core>

#include "flmens/error.hpp"

namespace flmens::csv {

// Shortest decimal text that parses back to exactly `value`.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string(), 0, "cannot open file");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct Line {
  std::size_t number;  // 1-based
  std::vector<std::string_view> fields;
};

// Splits `text` into lines and fields. The returned views point into `text`.
inline std::vector<Line> split_lines(std::string_view text, const std::string& file) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    throw DataError(file, 1, "byte order mark is not allowed");
  }
  if (text.empty()) throw DataError(file, 1, "file is empty");

  std::vector<Line> lines;
  std::size_t pos = 0;
  std::size_t number = 0;
  while (pos < text.size()) {
    ++number;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (raw.empty()) throw DataError(file, number, "blank line");
    if (raw.back() == ',') throw DataError(file, number, "trailing comma");

    Line line{number, {}};
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = raw.find(',', start);
      if (comma == std::string_view::npos) {
        line.fields.push_back(raw.substr(start));
        break;
      }
      line.fields.push_back(raw.substr(start, comma - start));
      start = comma + 1;
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

inline double parse_double(std::string_view field, const std::string& file, std::size_t line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (field.empty() || res.ec != std::errc{} || res.ptr != last) {
    throw DataError(file, line, "malformed number '" + std::string(field) + "'");
  }
  return value;
}

inline long long parse_integer(std::string_view field, const std::string& file, std::size_t line) {
  long long value = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw DataError(file, line, "malformed integer '" + std::string(field) + "'");
  }
  return value;
}

struct LabelsFile {
  std::vector<std::string> ids;
  std::vector<long long> labels;
};

// `id,label` file.
inline LabelsFile read_labels(const std::filesystem::path& path) {
  const std::string file = path.string();
  const std::string text = read_file(path);
  const auto lines = split_lines(text, file);
  const auto& header = lines.front().fields;
  if (header.size() != 2 || header[0] != "id" || header[1] != "label") {
    throw DataError(file, 1, "expected header 'id,label'");
  }
  LabelsFile out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.fields.size() != 2) {
      throw DataError(file, line.number, "expected 2 fields, found " + std::to_string(line.fields.size()));
    }
    if (line.fields[0].empty()) throw DataError(file, line.number, "empty id");
    out.ids.emplace_back(line.fields[0]);
    out.labels.push_back(parse_integer(line.fields[1], file, line.number));
  }
  return out;
}

struct MatrixFile {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;
};

// `id,v0,v1,...` file. Non-finite tokens ("nan", "inf") parse; rejecting them
// is the validator's job so that it can report every location.
inline MatrixFile read_matrix(const std::filesystem::path& path) {
  const std::string file = path.string();
  const std::string text = read_file(path);
  const auto lines = split_lines(text, file);
  const auto& header = lines.front().fields;
  if (header.size() < 2 || header[0] != "id") {
    throw DataError(file, 1, "expected header 'id,v0,v1,...'");
  }
  const std::size_t cols = header.size() - 1;
  for (std::size_t j = 0; j < cols; ++j) {
    if (header[j + 1] != "v" + std::to_string(j)) {
      throw DataError(file, 1, "expected column 'v" + std::to_string(j) + "', found '" +
                                   std::string(header[j + 1]) + "'");
    }
  }
  MatrixFile out;
  out.values.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.fields.size() != cols + 1) {
      throw DataError(file, line.number, "expected " + std::to_string(cols + 1) + " fields, found " +
                                             std::to_string(line.fields.size()));
    }
    if (line.fields[0].empty()) throw DataError(file, line.number, "empty id");
    out.ids.emplace_back(line.fields[0]);
    for (std::size_t j = 0; j < cols; ++j) {
      out.values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) =
          parse_double(line.fields[j + 1], file, line.number);
    }
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string(), 0, "cannot open file for writing");
  out << text;
  if (!out) throw DataError(path.string(), 0, "write failed");
}

template <class Labels>
std::string format_labels(const std::vector<std::string>& ids, const Labels& labels) {
  std::ostringstream os;
  os << "id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) os << ids[i] << ',' << labels[i] << '\n';
  return os.str();
}

inline std::string format_matrix(const std::vector<std::string>& ids, const Eigen::MatrixXd& values) {
  std::string out = "id";
  for (Eigen::Index j = 0; j < values.cols(); ++j) out += ",v" + std::to_string(j);
  out += '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out += ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      out += ',';
      out += format_double(values(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace flmens::csv
