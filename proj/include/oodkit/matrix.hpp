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

#ifndef OODKIT_MATRIX_HPP_
#define OODKIT_MATRIX_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oodkit/error.hpp"

namespace oodkit {

// Dense row-major matrix of doubles. Holds logits (rows = samples,
// cols = classes), features, or class prototypes.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(CheckedSize(rows, cols), fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != CheckedSize(rows, cols)) {
      Fail(ErrorCode::kDimensionMismatch,
           "payload holds " + std::to_string(data_.size()) +
               " values, expected " + std::to_string(rows * cols));
    }
  }

  // Row-wise literal, e.g. Matrix::FromRows({{1, 2}, {3, 4}}).
  static Matrix FromRows(
      std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<std::vector<double>> copy;
    for (const auto& r : rows) copy.emplace_back(r);
    return FromRows(copy);
  }

  static Matrix FromRows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) Fail(ErrorCode::kEmptyMatrix, "no rows");
    const std::size_t cols = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != cols) {
        Fail(ErrorCode::kRaggedRows,
             "row " + std::to_string(i) + " has " +
                 std::to_string(rows[i].size()) + " values, expected " +
                 std::to_string(cols));
      }
      data.insert(data.end(), rows[i].begin(), rows[i].end());
    }
    return Matrix(rows.size(), cols, std::move(data));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

  // Enforces rows >= 1, cols >= 1 and all-finite entries.
  void Validate() const {
    if (rows_ == 0 || cols_ == 0) {
      Fail(ErrorCode::kEmptyMatrix, "matrix has shape " +
                                        std::to_string(rows_) + "x" +
                                        std::to_string(cols_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        Fail(ErrorCode::kNonFiniteValue,
             "entry (" + std::to_string(i / cols_) + ", " +
                 std::to_string(i % cols_) + ") is not finite");
      }
    }
  }

 private:
  static std::size_t CheckedSize(std::size_t rows, std::size_t cols) {
    if (cols != 0 && rows > SIZE_MAX / sizeof(double) / cols) {
      Fail(ErrorCode::kDimensionOverflow,
           std::to_string(rows) + "x" + std::to_string(cols) +
               " does not fit in memory");
    }
    return rows * cols;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Class index per sample.
using LabelVector = std::vector<std::size_t>;

inline void CheckLabels(const LabelVector& labels, std::size_t num_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      Fail(ErrorCode::kLabelOutOfRange,
           "label " + std::to_string(labels[i]) + " at row " +
               std::to_string(i) + " is not below K=" +
               std::to_string(num_classes));
    }
  }
}

enum class BundleKind { kLogits, kFeatures, kPrototypes };

struct DatasetBundle {
  Matrix matrix;
  std::optional<LabelVector> labels;
  BundleKind kind = BundleKind::kLogits;
  std::string name;

  void Validate() const {
    matrix.Validate();
    if (kind == BundleKind::kPrototypes && labels.has_value()) {
      Fail(ErrorCode::kInvalidConfig, "prototype bundles carry no labels");
    }
    if (labels.has_value() && labels->size() != matrix.rows()) {
      Fail(ErrorCode::kDimensionMismatch,
           std::to_string(labels->size()) + " labels for " +
               std::to_string(matrix.rows()) + " rows");
    }
  }
};

}  // namespace oodkit

#endif  // OODKIT_MATRIX_HPP_
