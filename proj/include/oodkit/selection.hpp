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

// Choosing N for the top-N LogitGap score.
//
// The tail mean zbar'_N is the mean of the sorted logits ranked 2..N. The
// adaptive rule picks the N that maximizes E_OOD[zbar'_N] - E_ID[zbar'_N],
// estimated on a small ID validation set and synthetic outliers built by
// interpolating pairs of ID features from different classes:
//
//   x_ood = alpha * x_i + (1 - alpha) * x_j + beta * noise,  noise ~ N(0, I)
//
// Random stream layout for SynthesizeOod (one Rng seeded with cfg.seed): for
// each output row in order, draw i, then j, then cols() normals.

#ifndef OODKIT_SELECTION_HPP_
#define OODKIT_SELECTION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oodkit/error.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/parallel.hpp"
#include "oodkit/projection.hpp"
#include "oodkit/random.hpp"

namespace oodkit {

enum class PairPolicy { kInterClass, kAny };

struct SynthesisConfig {
  double alpha = 0.3;
  double beta = 0.8;
  std::size_t val_size = 100;
  // Rows to synthesize; unset means one per validation sample.
  std::optional<std::size_t> count;
  std::uint64_t seed = 0;
  PairPolicy pair_policy = PairPolicy::kInterClass;

  void Validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      Fail(ErrorCode::kInvalidConfig, "alpha must lie in [0, 1]");
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
      Fail(ErrorCode::kInvalidConfig, "beta must be nonnegative");
    }
    if (val_size < 2) Fail(ErrorCode::kInvalidConfig, "val_size must be >= 2");
    if (count.has_value() && *count < 1) {
      Fail(ErrorCode::kInvalidConfig, "count must be >= 1");
    }
  }
};

// Defaults for large label sets (beta = 0.8) and small ones (beta = 0).
inline SynthesisConfig DefaultSynthesisConfig(std::size_t num_classes) {
  SynthesisConfig cfg;
  cfg.beta = num_classes >= 50 ? 0.8 : 0.0;
  return cfg;
}

struct NSelection {
  std::size_t n_star = 0;
  std::size_t n_min = 0;
  std::size_t n_max = 0;
  // gap_curve[i] belongs to N = n_min + i.
  std::vector<double> gap_curve;
};

// 20% of K for K >= 50, otherwise 50% of K; never below 2.
inline std::size_t FixedN(std::size_t num_classes) {
  if (num_classes < 2) {
    Fail(ErrorCode::kTooFewClasses, "fixed N needs at least two classes");
  }
  const double fraction = num_classes >= 50 ? 0.2 : 0.5;
  const auto n = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(num_classes)));
  return std::clamp<std::size_t>(n, 2, num_classes);
}

// mean(z'_2 .. z'_n) of a row already sorted in descending order.
inline double MeanTail(std::span<const double> sorted, std::size_t n) {
  if (n < 2 || n > sorted.size()) {
    Fail(ErrorCode::kBadN, "tail length must lie in [2, " +
                               std::to_string(sorted.size()) + "], got " +
                               std::to_string(n));
  }
  if (!std::is_sorted(sorted.begin(), sorted.end(), std::greater<>())) {
    Fail(ErrorCode::kNotSorted, "row is not sorted in descending order");
  }
  double sum = 0.0;
  for (std::size_t j = 1; j < n; ++j) sum += sorted[j];
  return sum / static_cast<double>(n - 1);
}

inline Matrix SynthesizeOod(const Matrix& features, const LabelVector& labels,
                            const SynthesisConfig& cfg) {
  cfg.Validate();
  if (features.rows() < 2) {
    Fail(ErrorCode::kTooFewSamples, "synthesis needs at least two samples");
  }
  if (labels.size() != features.rows()) {
    Fail(ErrorCode::kDimensionMismatch,
         std::to_string(labels.size()) + " labels for " +
             std::to_string(features.rows()) + " feature rows");
  }
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  const std::size_t count = cfg.count.value_or(n);

  // Rows grouped by label, so "a row of a different class" is one index draw
  // into the concatenation of all other groups.
  std::vector<std::size_t> by_label(n);
  std::iota(by_label.begin(), by_label.end(), 0);
  std::stable_sort(by_label.begin(), by_label.end(),
                   [&](std::size_t a, std::size_t b) {
                     return labels[a] < labels[b];
                   });
  std::vector<std::size_t> group_begin(n);
  std::vector<std::size_t> group_end(n);
  for (std::size_t pos = 0; pos < n;) {
    std::size_t end = pos;
    while (end < n && labels[by_label[end]] == labels[by_label[pos]]) ++end;
    for (std::size_t q = pos; q < end; ++q) {
      group_begin[by_label[q]] = pos;
      group_end[by_label[q]] = end;
    }
    pos = end;
  }
  if (cfg.pair_policy == PairPolicy::kInterClass &&
      group_end[by_label[0]] - group_begin[by_label[0]] == n) {
    Fail(ErrorCode::kSingleClassDataset,
         "inter-class interpolation needs at least two labels");
  }

  Rng rng(cfg.seed);
  Matrix out(count, d);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t i = rng.Index(n);
    std::size_t j = 0;
    if (cfg.pair_policy == PairPolicy::kInterClass) {
      const std::size_t lo = group_begin[i];
      const std::size_t hi = group_end[i];
      std::size_t pick = rng.Index(n - (hi - lo));
      if (pick >= lo) pick += hi - lo;
      j = by_label[pick];
    } else {
      j = rng.Index(n - 1);
      if (j >= i) ++j;
    }
    const auto xi = features.row(i);
    const auto xj = features.row(j);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double noise = rng.Normal();
      dst[c] = cfg.alpha * xi[c] + (1.0 - cfg.alpha) * xj[c] + cfg.beta * noise;
    }
  }
  return out;
}

namespace detail {

// Per-row tail means for every N in [n_min, n_max], row-major
// (rows x (n_max - n_min + 1)). One sort per row, then a running sum.
inline std::vector<double> TailMeanTable(const Matrix& logits,
                                         std::size_t n_min,
                                         std::size_t n_max) {
  const std::size_t width = n_max - n_min + 1;
  std::vector<double> table(logits.rows() * width);
  ParallelFor(logits.rows(), 256, [&](std::size_t begin, std::size_t end) {
    std::vector<double> sorted;
    for (std::size_t r = begin; r < end; ++r) {
      const auto row = logits.row(r);
      sorted.assign(row.begin(), row.end());
      std::partial_sort(sorted.begin(),
                        sorted.begin() + static_cast<long>(n_max),
                        sorted.end(), std::greater<>());
      double prefix = 0.0;
      for (std::size_t j = 1; j < n_max; ++j) {
        prefix += sorted[j];
        const std::size_t n = j + 1;
        if (n >= n_min) {
          table[r * width + (n - n_min)] = prefix / static_cast<double>(j);
        }
      }
    }
  });
  return table;
}

// Column means of the table, summed serially in row order.
inline std::vector<double> ColumnMeans(const std::vector<double>& table,
                                       std::size_t rows, std::size_t width) {
  std::vector<double> sums(width, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) sums[c] += table[r * width + c];
  }
  for (double& s : sums) s /= static_cast<double>(rows);
  return sums;
}

}  // namespace detail

// argmax over N in [n_min, n_max] of mean_OOD(zbar'_N) - mean_ID(zbar'_N);
// ties go to the smallest N.
inline NSelection SelectNMaxGap(const Matrix& id_logits,
                                const Matrix& ood_logits, std::size_t n_min,
                                std::size_t n_max) {
  if (id_logits.rows() == 0 || id_logits.cols() == 0) {
    Fail(ErrorCode::kEmptyMatrix, "ID logit matrix is empty");
  }
  if (ood_logits.rows() == 0 || ood_logits.cols() == 0) {
    Fail(ErrorCode::kEmptyMatrix, "OOD logit matrix is empty");
  }
  if (id_logits.cols() != ood_logits.cols()) {
    Fail(ErrorCode::kDimensionMismatch,
         "ID logits have " + std::to_string(id_logits.cols()) +
             " classes, OOD logits have " + std::to_string(ood_logits.cols()));
  }
  const std::size_t k = id_logits.cols();
  if (n_min < 2 || n_min > n_max || n_max > k) {
    Fail(ErrorCode::kBadN, "search range [" + std::to_string(n_min) + ", " +
                               std::to_string(n_max) + "] must satisfy 2 <= "
                               "n_min <= n_max <= " + std::to_string(k));
  }
  const std::size_t width = n_max - n_min + 1;
  const auto id_means = detail::ColumnMeans(
      detail::TailMeanTable(id_logits, n_min, n_max), id_logits.rows(), width);
  const auto ood_means =
      detail::ColumnMeans(detail::TailMeanTable(ood_logits, n_min, n_max),
                          ood_logits.rows(), width);

  NSelection sel;
  sel.n_min = n_min;
  sel.n_max = n_max;
  sel.gap_curve.resize(width);
  std::size_t best = 0;
  for (std::size_t c = 0; c < width; ++c) {
    sel.gap_curve[c] = ood_means[c] - id_means[c];
    if (sel.gap_curve[c] > sel.gap_curve[best]) best = c;
  }
  sel.n_star = n_min + best;
  return sel;
}

inline NSelection SelectNMaxGap(const Matrix& id_logits,
                                const Matrix& ood_logits) {
  return SelectNMaxGap(id_logits, ood_logits, 2, id_logits.cols());
}

struct NRange {
  std::optional<std::size_t> n_min;  // default 2
  std::optional<std::size_t> n_max;  // default K
};

// Seeded uniform sample of min(val_size, rows) row indices, without
// replacement, in ascending order. Uses a partial Fisher-Yates shuffle.
inline std::vector<std::size_t> SampleValidationRows(std::size_t rows,
                                                     std::size_t val_size,
                                                     std::uint64_t seed) {
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), 0);
  if (rows <= val_size) return idx;
  Rng rng = Rng::Substream(seed, StreamTag::kValidationSubset);
  for (std::size_t i = 0; i < val_size; ++i) {
    const std::size_t j = i + rng.Index(rows - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(val_size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct PipelineResult {
  NSelection selection;
  std::vector<std::size_t> validation_rows;
  Matrix id_logits;
  Matrix ood_logits;
};

// Validation subset -> synthetic outliers -> cosine logits -> MaxGap.
// The synthesis stream is seeded with a substream of cfg.seed.
inline PipelineResult SelectNPipelineDetailed(const Matrix& features,
                                              const LabelVector& labels,
                                              const PrototypeSet& protos,
                                              double scale,
                                              const SynthesisConfig& cfg,
                                              const NRange& range = {}) {
  cfg.Validate();
  features.Validate();
  if (labels.size() != features.rows()) {
    Fail(ErrorCode::kDimensionMismatch,
         std::to_string(labels.size()) + " labels for " +
             std::to_string(features.rows()) + " feature rows");
  }
  CheckLabels(labels, protos.num_classes());
  PipelineResult result;
  result.validation_rows =
      SampleValidationRows(features.rows(), cfg.val_size, cfg.seed);
  Matrix subset(result.validation_rows.size(), features.cols());
  LabelVector subset_labels;
  subset_labels.reserve(result.validation_rows.size());
  for (std::size_t r = 0; r < result.validation_rows.size(); ++r) {
    const auto src = features.row(result.validation_rows[r]);
    std::copy(src.begin(), src.end(), subset.row(r).begin());
    subset_labels.push_back(labels[result.validation_rows[r]]);
  }
  SynthesisConfig synth = cfg;
  synth.seed = SplitMix64(cfg.seed ^ static_cast<std::uint64_t>(StreamTag::kSynthesis));
  const Matrix synthetic = SynthesizeOod(subset, subset_labels, synth);

  result.id_logits = CosineLogits(subset, protos, scale);
  result.ood_logits = CosineLogits(synthetic, protos, scale);
  const std::size_t k = protos.num_classes();
  result.selection =
      SelectNMaxGap(result.id_logits, result.ood_logits,
                    range.n_min.value_or(2), range.n_max.value_or(k));
  return result;
}

inline NSelection SelectNPipeline(const Matrix& features,
                                  const LabelVector& labels,
                                  const PrototypeSet& protos, double scale,
                                  const SynthesisConfig& cfg,
                                  const NRange& range = {}) {
  return SelectNPipelineDetailed(features, labels, protos, scale, cfg, range)
      .selection;
}

}  // namespace oodkit

#endif  // OODKIT_SELECTION_HPP_
