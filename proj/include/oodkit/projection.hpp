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

// Feature-to-logit projection by cosine similarity against class prototypes,
// the zero-shot pathway of CLIP-style models.

#ifndef OODKIT_PROJECTION_HPP_
#define OODKIT_PROJECTION_HPP_

#include <cmath>
#include <span>
#include <string>
#include <utility>

#include "oodkit/error.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/parallel.hpp"

namespace oodkit {

inline constexpr double kUnitNormTolerance = 1e-9;

inline double RowNorm(std::span<const double> row) {
  double sum = 0.0;
  for (double v : row) sum += v * v;
  return std::sqrt(sum);
}

inline Matrix L2NormalizeRows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double norm = RowNorm(row);
    if (norm == 0.0) {
      Fail(ErrorCode::kZeroRow, "row " + std::to_string(r) + " is all zeros");
    }
    for (double& v : row) v /= norm;
  }
  return out;
}

// K x d class embeddings. `normalized` asserts unit-norm rows; the
// constructor verifies the assertion.
class PrototypeSet {
 public:
  explicit PrototypeSet(Matrix prototypes, bool normalized = false)
      : prototypes_(std::move(prototypes)), normalized_(normalized) {
    prototypes_.Validate();
    if (normalized_) {
      for (std::size_t r = 0; r < prototypes_.rows(); ++r) {
        if (std::abs(RowNorm(prototypes_.row(r)) - 1.0) > kUnitNormTolerance) {
          Fail(ErrorCode::kInvalidConfig,
               "prototype " + std::to_string(r) +
                   " is flagged normalized but its norm is not 1");
        }
      }
    }
  }

  static PrototypeSet Normalized(const Matrix& prototypes) {
    return PrototypeSet(L2NormalizeRows(prototypes), true);
  }

  const Matrix& matrix() const noexcept { return prototypes_; }
  bool normalized() const noexcept { return normalized_; }
  std::size_t num_classes() const noexcept { return prototypes_.rows(); }
  std::size_t dim() const noexcept { return prototypes_.cols(); }

 private:
  Matrix prototypes_;
  bool normalized_;
};

struct CosineOptions {
  double scale = 1.0;
  // Skip re-normalizing the features; the caller guarantees unit rows.
  bool features_normalized = false;
};

// Entry (i, k) = scale * <f_i / |f_i|, c_k / |c_k|>. With scale 1 every entry
// lies in [-1, 1].
inline Matrix CosineLogits(const Matrix& features, const PrototypeSet& protos,
                           const CosineOptions& options = {}) {
  if (features.cols() != protos.dim()) {
    Fail(ErrorCode::kDimensionMismatch,
         "features have dimension " + std::to_string(features.cols()) +
             " but prototypes have dimension " + std::to_string(protos.dim()));
  }
  if (!(options.scale > 0.0) || !std::isfinite(options.scale)) {
    Fail(ErrorCode::kInvalidConfig, "logit scale must be positive");
  }
  const Matrix unit_features =
      options.features_normalized ? features : L2NormalizeRows(features);
  const Matrix unit_protos =
      protos.normalized() ? protos.matrix() : L2NormalizeRows(protos.matrix());

  Matrix logits(features.rows(), protos.num_classes());
  ParallelFor(features.rows(), 256, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto f = unit_features.row(i);
      for (std::size_t k = 0; k < unit_protos.rows(); ++k) {
        const auto c = unit_protos.row(k);
        double dot = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) dot += f[j] * c[j];
        logits(i, k) = options.scale * dot;
      }
    }
  });
  return logits;
}

inline Matrix CosineLogits(const Matrix& features, const PrototypeSet& protos,
                           double scale) {
  return CosineLogits(features, protos, CosineOptions{.scale = scale});
}

}  // namespace oodkit

#endif  // OODKIT_PROJECTION_HPP_
