/*
 * Copyright 2026 The oodkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Reading and writing matrices, label vectors and score columns.
//
// Two interchange formats are supported:
//
//   CSV     First line is a header. A column literally named "label" is split
//           off into a LabelVector. Values are written with 17 significant
//           digits, which round-trips every double.
//
//   Binary  "OODT" magic, then little-endian
//             u32 version (1) | u64 rows | u64 cols | u32 dtype (1 = f64)
//           followed by rows*cols little-endian doubles in row-major order.
//           The payload length must match the header exactly.

#ifndef OODKIT_DATASTORE_HPP_
#define OODKIT_DATASTORE_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "oodkit/error.hpp"
#include "oodkit/matrix.hpp"

namespace oodkit {

enum class FileFormat { kCsv, kBinary, kAuto };

inline constexpr std::array<char, 4> kBinaryMagic = {'O', 'O', 'D', 'T'};
inline constexpr std::uint32_t kBinaryVersion = 1;
inline constexpr std::uint32_t kDtypeFloat64 = 1;
inline constexpr std::size_t kBinaryHeaderSize = 4 + 4 + 8 + 8 + 4;

namespace detail {

template <typename T>
void AppendLittleEndian(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.append(bytes.data(), bytes.size());
}

template <typename T>
T ReadLittleEndian(const char* src) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), src, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (in.bad()) Fail(ErrorCode::kIoFailure, "read error on " + path.string());
  return content;
}

inline void WriteFile(const std::filesystem::path& path,
                      std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) Fail(ErrorCode::kIoFailure, "write error on " + path.string());
}

inline std::string_view Trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = Trim(text.substr(start, end - start));
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

inline std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    if (end == std::string_view::npos) {
      fields.push_back(Trim(line.substr(start)));
      break;
    }
    fields.push_back(Trim(line.substr(start, end - start)));
    start = end + 1;
  }
  return fields;
}

// Accepts a leading '+' and the Unicode minus sign U+2212 as well as '-'.
inline std::optional<double> ParseDouble(std::string_view field) {
  std::string buffer;
  constexpr std::string_view kUnicodeMinus = "\xE2\x88\x92";
  if (field.starts_with(kUnicodeMinus)) {
    buffer = "-";
    buffer.append(field.substr(kUnicodeMinus.size()));
    field = buffer;
  } else if (field.starts_with('+')) {
    field.remove_prefix(1);
  }
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc::result_out_of_range) {
    // Subnormal underflow and overflow both land here; strtod agrees with
    // from_chars on the digits and returns the correctly rounded value.
    value = std::strtod(std::string(field).c_str(), nullptr);
  } else if (ec != std::errc() || ptr != last || field.empty()) {
    return std::nullopt;
  }
  return value;
}

inline std::string FormatDouble(double value) {
  std::array<char, 32> buffer;
  const int n = std::snprintf(buffer.data(), buffer.size(), "%.17g", value);
  return std::string(buffer.data(), static_cast<std::size_t>(n));
}

inline bool LooksBinary(std::string_view content) {
  return content.size() >= kBinaryMagic.size() &&
         std::equal(kBinaryMagic.begin(), kBinaryMagic.end(), content.begin());
}

inline DatasetBundle ParseCsv(std::string_view content,
                              const std::string& source) {
  const auto lines = SplitLines(content);
  if (lines.empty()) Fail(ErrorCode::kMalformedHeader, source + " is empty");
  const auto header = SplitFields(lines.front());
  std::optional<std::size_t> label_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) {
      Fail(ErrorCode::kMalformedHeader,
           source + ": empty column name at position " + std::to_string(c));
    }
    if (ParseDouble(header[c]).has_value()) {
      Fail(ErrorCode::kMalformedHeader,
           source + ": first line must be a header, found number '" +
               std::string(header[c]) + "'");
    }
    if (header[c] == "label") {
      if (label_col.has_value()) {
        Fail(ErrorCode::kMalformedHeader, source + ": duplicate label column");
      }
      label_col = c;
    }
  }
  const std::size_t cols = header.size() - (label_col.has_value() ? 1 : 0);
  if (cols == 0) Fail(ErrorCode::kMalformedHeader, source + ": no value columns");
  const std::size_t rows = lines.size() - 1;
  if (rows == 0) Fail(ErrorCode::kEmptyMatrix, source + " has no data rows");

  Matrix m(rows, cols);
  LabelVector labels;
  if (label_col.has_value()) labels.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto fields = SplitFields(lines[r + 1]);
    if (fields.size() != header.size()) {
      Fail(ErrorCode::kRaggedRows,
           source + ": data row " + std::to_string(r) + " has " +
               std::to_string(fields.size()) + " values under a " +
               std::to_string(header.size()) + "-column header");
    }
    std::size_t out_col = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto value = ParseDouble(fields[c]);
      if (!value.has_value()) {
        Fail(ErrorCode::kParseFailure, source + ": cannot parse '" +
                                           std::string(fields[c]) +
                                           "' at data row " +
                                           std::to_string(r));
      }
      if (label_col.has_value() && c == *label_col) {
        if (*value < 0) {
          Fail(ErrorCode::kNegativeLabel,
               source + ": negative label at data row " + std::to_string(r));
        }
        if (*value != std::floor(*value) || *value > 1e15) {
          Fail(ErrorCode::kParseFailure,
               source + ": non-integer label at data row " + std::to_string(r));
        }
        labels.push_back(static_cast<std::size_t>(*value));
        continue;
      }
      if (!std::isfinite(*value)) {
        Fail(ErrorCode::kNonFiniteValue,
             source + ": non-finite value at data row " + std::to_string(r));
      }
      m(r, out_col++) = *value;
    }
  }
  DatasetBundle bundle;
  bundle.matrix = std::move(m);
  if (label_col.has_value()) bundle.labels = std::move(labels);
  bundle.name = source;
  return bundle;
}

inline Matrix ParseBinary(std::string_view content, const std::string& source) {
  if (content.size() < kBinaryHeaderSize || !LooksBinary(content)) {
    Fail(ErrorCode::kMalformedHeader, source + ": truncated or missing header");
  }
  const char* p = content.data() + kBinaryMagic.size();
  const auto version = ReadLittleEndian<std::uint32_t>(p);
  const auto rows = ReadLittleEndian<std::uint64_t>(p + 4);
  const auto cols = ReadLittleEndian<std::uint64_t>(p + 12);
  const auto dtype = ReadLittleEndian<std::uint32_t>(p + 20);
  if (version != kBinaryVersion) {
    Fail(ErrorCode::kMalformedHeader,
         source + ": unsupported version " + std::to_string(version));
  }
  if (dtype != kDtypeFloat64) {
    Fail(ErrorCode::kMalformedHeader,
         source + ": unsupported dtype tag " + std::to_string(dtype));
  }
  if (rows == 0 || cols == 0) {
    Fail(ErrorCode::kMalformedHeader, source + ": zero-sized dimension");
  }
  const std::uint64_t payload = content.size() - kBinaryHeaderSize;
  if (rows > UINT64_MAX / cols || rows * cols > UINT64_MAX / sizeof(double)) {
    Fail(ErrorCode::kDimensionOverflow,
         source + ": declared shape overflows 64 bits");
  }
  if (rows * cols * sizeof(double) != payload) {
    Fail(ErrorCode::kDimensionOverflow,
         source + ": header declares " + std::to_string(rows) + "x" +
             std::to_string(cols) + " but payload holds " +
             std::to_string(payload) + " bytes");
  }
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  const char* src = content.data() + kBinaryHeaderSize;
  auto values = m.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = ReadLittleEndian<double>(src + i * sizeof(double));
  }
  m.Validate();
  return m;
}

inline FileFormat ResolveFormat(const std::filesystem::path& path,
                                FileFormat format) {
  if (format != FileFormat::kAuto) return format;
  const auto ext = path.extension().string();
  if (ext == ".csv" || ext == ".txt") return FileFormat::kCsv;
  return FileFormat::kBinary;
}

}  // namespace detail

// Loads a full bundle (matrix plus an optional "label" column). With kAuto the
// format is chosen by magic bytes, falling back to CSV.
inline DatasetBundle LoadBundle(const std::filesystem::path& path,
                                FileFormat format = FileFormat::kAuto) {
  const std::string content = detail::ReadFile(path);
  const std::string source = path.string();
  const bool binary = format == FileFormat::kBinary ||
                      (format == FileFormat::kAuto &&
                       detail::LooksBinary(content));
  DatasetBundle bundle;
  if (binary) {
    bundle.matrix = detail::ParseBinary(content, source);
    bundle.name = source;
  } else {
    bundle = detail::ParseCsv(content, source);
  }
  bundle.matrix.Validate();
  return bundle;
}

inline Matrix LoadMatrix(const std::filesystem::path& path,
                         FileFormat format = FileFormat::kAuto) {
  return LoadBundle(path, format).matrix;
}

inline std::string EncodeBinary(const Matrix& m) {
  std::string out;
  out.reserve(kBinaryHeaderSize + m.values().size() * sizeof(double));
  out.append(kBinaryMagic.data(), kBinaryMagic.size());
  detail::AppendLittleEndian<std::uint32_t>(out, kBinaryVersion);
  detail::AppendLittleEndian<std::uint64_t>(out, m.rows());
  detail::AppendLittleEndian<std::uint64_t>(out, m.cols());
  detail::AppendLittleEndian<std::uint32_t>(out, kDtypeFloat64);
  for (double v : m.values()) detail::AppendLittleEndian<double>(out, v);
  return out;
}

inline std::string EncodeCsv(const Matrix& m,
                             const std::vector<std::string>& column_names = {},
                             const LabelVector* labels = nullptr) {
  std::string out;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (c > 0) out += ',';
    out += c < column_names.size() ? column_names[c] : "c" + std::to_string(c);
  }
  if (labels != nullptr) out += ",label";
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += detail::FormatDouble(m(r, c));
    }
    if (labels != nullptr) out += "," + std::to_string((*labels)[r]);
    out += '\n';
  }
  return out;
}

// kAuto picks by extension: ".csv"/".txt" write CSV, anything else binary.
inline void SaveMatrix(const Matrix& m, const std::filesystem::path& path,
                       FileFormat format = FileFormat::kAuto) {
  if (detail::ResolveFormat(path, format) == FileFormat::kCsv) {
    detail::WriteFile(path, EncodeCsv(m));
  } else {
    detail::WriteFile(path, EncodeBinary(m));
  }
}

inline void SaveBundle(const DatasetBundle& bundle,
                       const std::filesystem::path& path) {
  const LabelVector* labels =
      bundle.labels.has_value() ? &*bundle.labels : nullptr;
  detail::WriteFile(path, EncodeCsv(bundle.matrix, {}, labels));
}

// One integer per line, or a CSV whose header has a "label" column.
inline LabelVector LoadLabels(const std::filesystem::path& path) {
  const std::string content = detail::ReadFile(path);
  const auto lines = detail::SplitLines(content);
  if (lines.empty()) Fail(ErrorCode::kParseFailure, path.string() + " is empty");

  std::size_t column = 0;
  std::size_t first = 0;
  std::size_t width = 1;
  const auto header = detail::SplitFields(lines.front());
  if (!detail::ParseDouble(header.front()).has_value()) {
    const auto it = std::find(header.begin(), header.end(), "label");
    if (it == header.end()) {
      Fail(ErrorCode::kParseFailure,
           path.string() + ": header has no 'label' column");
    }
    column = static_cast<std::size_t>(it - header.begin());
    width = header.size();
    first = 1;
  }
  LabelVector labels;
  labels.reserve(lines.size() - first);
  for (std::size_t i = first; i < lines.size(); ++i) {
    const auto fields = detail::SplitFields(lines[i]);
    if (fields.size() != width) {
      Fail(ErrorCode::kParseFailure,
           path.string() + ": line " + std::to_string(i + 1) +
               " has the wrong number of fields");
    }
    const auto value = detail::ParseDouble(fields[column]);
    if (!value.has_value() || !std::isfinite(*value) ||
        *value != std::floor(*value)) {
      Fail(ErrorCode::kParseFailure, path.string() + ": line " +
                                         std::to_string(i + 1) +
                                         " is not an integer label");
    }
    if (*value < 0) {
      Fail(ErrorCode::kNegativeLabel,
           path.string() + ": line " + std::to_string(i + 1));
    }
    labels.push_back(static_cast<std::size_t>(*value));
  }
  if (labels.empty()) Fail(ErrorCode::kParseFailure, path.string() + ": no labels");
  return labels;
}

// Score columns: CSV "index,score" or an n x 1 binary matrix.
inline void SaveScoreColumn(std::span<const double> scores,
                            const std::filesystem::path& path,
                            FileFormat format = FileFormat::kAuto) {
  if (detail::ResolveFormat(path, format) == FileFormat::kCsv) {
    std::string out = "index,score\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out += std::to_string(i) + "," + detail::FormatDouble(scores[i]) + "\n";
    }
    detail::WriteFile(path, out);
  } else {
    Matrix m(scores.size(), 1,
             std::vector<double>(scores.begin(), scores.end()));
    detail::WriteFile(path, EncodeBinary(m));
  }
}

inline std::vector<double> LoadScoreColumn(const std::filesystem::path& path) {
  const std::string content = detail::ReadFile(path);
  if (detail::LooksBinary(content)) {
    const Matrix m = detail::ParseBinary(content, path.string());
    if (m.cols() != 1) {
      Fail(ErrorCode::kDimensionMismatch,
           path.string() + ": score matrix must have one column");
    }
    return {m.values().begin(), m.values().end()};
  }
  const auto lines = detail::SplitLines(content);
  if (lines.empty()) Fail(ErrorCode::kMalformedHeader, path.string() + " is empty");
  const auto header = detail::SplitFields(lines.front());
  const auto it = std::find(header.begin(), header.end(), "score");
  if (it == header.end()) {
    Fail(ErrorCode::kMalformedHeader, path.string() + ": no 'score' column");
  }
  const auto column = static_cast<std::size_t>(it - header.begin());
  std::vector<double> scores;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = detail::SplitFields(lines[i]);
    if (fields.size() != header.size()) {
      Fail(ErrorCode::kRaggedRows,
           path.string() + ": line " + std::to_string(i + 1));
    }
    const auto value = detail::ParseDouble(fields[column]);
    if (!value.has_value()) {
      Fail(ErrorCode::kParseFailure,
           path.string() + ": line " + std::to_string(i + 1));
    }
    if (!std::isfinite(*value)) {
      Fail(ErrorCode::kNonFiniteValue,
           path.string() + ": line " + std::to_string(i + 1));
    }
    scores.push_back(*value);
  }
  if (scores.empty()) Fail(ErrorCode::kEmptySet, path.string() + " has no scores");
  return scores;
}

// FNV-1a over shape and raw payload bytes; identifies a dataset in run records.
inline std::uint64_t Fingerprint(const Matrix& m) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  const auto mix = [&hash](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= bytes[i];
      hash *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t shape[2] = {m.rows(), m.cols()};
  mix(shape, sizeof(shape));
  mix(m.values().data(), m.values().size() * sizeof(double));
  return hash;
}

}  // namespace oodkit

#endif  // OODKIT_DATASTORE_HPP_
