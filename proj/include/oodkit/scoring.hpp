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

// Post-hoc OOD scoring functions over a single logit row or a whole logit
// matrix. Every score follows the convention "higher means more
// in-distribution".
//
// Gap-based scores work on the row sorted in descending order, z'_1 >= z'_2
// >= ... >= z'_K, so they depend only on the multiset of logits and are
// invariant to permuting classes.

#ifndef OODKIT_SCORING_HPP_
#define OODKIT_SCORING_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oodkit/error.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/parallel.hpp"

namespace oodkit {

enum class ScoreMethod {
  kMaxLogit,
  kMcm,
  kEnergy,
  kGen,
  kMargin,
  kLogitGap,
  kLogitGapTopN,
  kLogitGapSoftmax,
  kLogitGapVariant,
};

// Normalizer of the top-N gap sum: 1/(N-1) averages the N-1 nonzero gaps,
// 1/N averages over all N entries including the zero self-gap.
enum class GapNormalization { kOverNMinus1, kOverN };

// Elementwise map applied to each gap g >= 0 by the variant scorer. All three
// send 0 to 0 and are increasing.
enum class GapTransform { kExp, kSquare, kSqrt };

struct ScorerConfig {
  ScoreMethod method = ScoreMethod::kLogitGap;
  double tau = 1.0;
  std::optional<std::size_t> top_n;
  double gamma = 0.1;
  std::optional<std::size_t> gen_m;  // unset means all K probabilities
  double energy_t = 1.0;
  GapTransform transform = GapTransform::kExp;
  GapNormalization normalization = GapNormalization::kOverNMinus1;

  // Checks the configuration against a K-class logit matrix.
  void Validate(std::size_t num_classes) const;
};

struct ScoreVector {
  std::vector<double> scores;
  ScorerConfig config;

  std::size_t size() const noexcept { return scores.size(); }
};

// ---------------------------------------------------------------------------
// Names used on the command line and in run records.

inline constexpr std::string_view MethodName(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::kMaxLogit: return "maxlogit";
    case ScoreMethod::kMcm: return "mcm";
    case ScoreMethod::kEnergy: return "energy";
    case ScoreMethod::kGen: return "gen";
    case ScoreMethod::kMargin: return "margin";
    case ScoreMethod::kLogitGap: return "logitgap";
    case ScoreMethod::kLogitGapTopN: return "logitgap_topn";
    case ScoreMethod::kLogitGapSoftmax: return "logitgap_softmax";
    case ScoreMethod::kLogitGapVariant: return "logitgap_variant";
  }
  return "?";
}

inline constexpr std::string_view TransformName(GapTransform t) {
  switch (t) {
    case GapTransform::kExp: return "exp";
    case GapTransform::kSquare: return "square";
    case GapTransform::kSqrt: return "sqrt";
  }
  return "?";
}

inline constexpr std::string_view NormalizationName(GapNormalization n) {
  return n == GapNormalization::kOverN ? "over_n" : "over_n_minus_1";
}

inline ScoreMethod ParseMethod(std::string_view name) {
  for (auto m : {ScoreMethod::kMaxLogit, ScoreMethod::kMcm,
                 ScoreMethod::kEnergy, ScoreMethod::kGen, ScoreMethod::kMargin,
                 ScoreMethod::kLogitGap, ScoreMethod::kLogitGapTopN,
                 ScoreMethod::kLogitGapSoftmax,
                 ScoreMethod::kLogitGapVariant}) {
    if (MethodName(m) == name) return m;
  }
  Fail(ErrorCode::kInvalidConfig, "unknown method '" + std::string(name) + "'");
}

inline GapTransform ParseTransform(std::string_view name) {
  for (auto t : {GapTransform::kExp, GapTransform::kSquare, GapTransform::kSqrt}) {
    if (TransformName(t) == name) return t;
  }
  Fail(ErrorCode::kInvalidConfig,
       "unknown transform '" + std::string(name) + "'");
}

inline GapNormalization ParseNormalization(std::string_view name) {
  if (name == "over_n") return GapNormalization::kOverN;
  if (name == "over_n_minus_1") return GapNormalization::kOverNMinus1;
  Fail(ErrorCode::kInvalidConfig,
       "unknown normalization '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Single-row scorers.

namespace detail {

inline void RequireNonEmpty(std::span<const double> z) {
  if (z.empty()) Fail(ErrorCode::kEmptyRow, "logit row is empty");
}

inline void RequireTwoClasses(std::span<const double> z) {
  RequireNonEmpty(z);
  if (z.size() < 2) {
    Fail(ErrorCode::kTooFewClasses, "score needs at least two classes");
  }
}

inline void RequireTopN(std::size_t n, std::size_t k) {
  if (n < 2 || n > k) {
    Fail(ErrorCode::kBadN, "top-N must lie in [2, " + std::to_string(k) +
                               "], got " + std::to_string(n));
  }
}

inline void RequirePositive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    Fail(ErrorCode::kInvalidConfig, std::string(what) + " must be positive");
  }
}

// The n largest entries of z in descending order.
inline std::vector<double> TopSorted(std::span<const double> z, std::size_t n) {
  std::vector<double> sorted(z.begin(), z.end());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<long>(n),
                    sorted.end(), std::greater<>());
  sorted.resize(n);
  return sorted;
}

// softmax(z / tau), computed with the row maximum subtracted.
inline std::vector<double> Softmax(std::span<const double> z, double tau) {
  const double z_max = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp((z[i] - z_max) / tau);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline double TransformGap(double gap, GapTransform transform) {
  switch (transform) {
    case GapTransform::kExp: return std::expm1(gap);
    case GapTransform::kSquare: return gap * gap;
    case GapTransform::kSqrt: return std::sqrt(gap);
  }
  return gap;
}

}  // namespace detail

inline std::vector<double> SortDescending(std::span<const double> z) {
  detail::RequireNonEmpty(z);
  std::vector<double> sorted(z.begin(), z.end());
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());
  return sorted;
}

inline double ScoreMaxLogit(std::span<const double> z) {
  detail::RequireNonEmpty(z);
  return *std::max_element(z.begin(), z.end());
}

// Maximum softmax probability at temperature tau: 1 / sum_j e^{(z_j - z_max)/tau}.
inline double ScoreMcm(std::span<const double> z, double tau = 1.0) {
  detail::RequireNonEmpty(z);
  detail::RequirePositive(tau, "tau");
  const double z_max = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp((v - z_max) / tau);
  return 1.0 / sum;
}

// T * log sum_k e^{z_k / T}.
inline double ScoreEnergy(std::span<const double> z, double energy_t = 1.0) {
  detail::RequireNonEmpty(z);
  detail::RequirePositive(energy_t, "energy temperature");
  const double z_max = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp((v - z_max) / energy_t);
  return z_max + energy_t * std::log(sum);
}

// -sum over the M largest probabilities of p^gamma (1 - p)^gamma.
inline double ScoreGen(std::span<const double> z, double gamma = 0.1,
                       std::optional<std::size_t> gen_m = std::nullopt,
                       double tau = 1.0) {
  detail::RequireNonEmpty(z);
  detail::RequirePositive(tau, "tau");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    Fail(ErrorCode::kInvalidConfig, "GEN gamma must lie in (0, 1)");
  }
  const std::size_t m = gen_m.value_or(z.size());
  if (m < 1 || m > z.size()) {
    Fail(ErrorCode::kInvalidConfig, "GEN M must lie in [1, K]");
  }
  const auto p = detail::Softmax(z, tau);
  const auto top = detail::TopSorted(p, m);
  double sum = 0.0;
  for (double pc : top) sum += std::pow(pc, gamma) * std::pow(1.0 - pc, gamma);
  return -sum;
}

// p_1 - p_2 of softmax(z / tau).
inline double ScoreMargin(std::span<const double> z, double tau = 1.0) {
  detail::RequireTwoClasses(z);
  detail::RequirePositive(tau, "tau");
  const auto top = detail::TopSorted(detail::Softmax(z, tau), 2);
  return top[0] - top[1];
}

// (1/(N-1)) sum_{j=2..N} (z'_1 - z'_j), or (1/N) sum_{j=1..N} with kOverN.
// The kOverN value is formed as the kOverNMinus1 value times (N-1)/N, so the
// two normalizations differ by exactly that factor.
inline double ScoreLogitGapTopN(
    std::span<const double> z, std::size_t top_n,
    GapNormalization normalization = GapNormalization::kOverNMinus1) {
  detail::RequireTwoClasses(z);
  detail::RequireTopN(top_n, z.size());
  const auto top = detail::TopSorted(z, top_n);
  double gap_sum = 0.0;
  for (std::size_t j = 1; j < top_n; ++j) gap_sum += top[0] - top[j];
  const double n_minus_1 = static_cast<double>(top_n - 1);
  const double score = gap_sum / n_minus_1;
  if (normalization == GapNormalization::kOverN) {
    return score * (n_minus_1 / static_cast<double>(top_n));
  }
  return score;
}

// Average gap between the maximum logit and every other logit.
inline double ScoreLogitGap(std::span<const double> z) {
  detail::RequireTwoClasses(z);
  return ScoreLogitGapTopN(z, z.size());
}

// sum_i [e^{z'_1/tau} - e^{z'_i/tau}] / (K sum_j e^{z'_j/tau}), evaluated with
// every exponent shifted by -z'_1/tau. Equals ScoreMcm(z, tau) - 1/K.
inline double ScoreLogitGapSoftmax(std::span<const double> z, double tau = 1.0) {
  detail::RequireNonEmpty(z);
  detail::RequirePositive(tau, "tau");
  const double z_max = *std::max_element(z.begin(), z.end());
  double gap_sum = 0.0;
  double partition = 0.0;
  for (double v : z) {
    const double e = std::exp((v - z_max) / tau);
    gap_sum += 1.0 - e;
    partition += e;
  }
  return gap_sum / (static_cast<double>(z.size()) * partition);
}

// (1/(N-1)) sum_{j=2..N} phi(z'_1 - z'_j) with phi one of e^g - 1, g^2, sqrt(g).
inline double ScoreLogitGapVariant(std::span<const double> z, std::size_t top_n,
                                   GapTransform transform) {
  detail::RequireTwoClasses(z);
  detail::RequireTopN(top_n, z.size());
  const auto top = detail::TopSorted(z, top_n);
  double sum = 0.0;
  for (std::size_t j = 1; j < top_n; ++j) {
    sum += detail::TransformGap(top[0] - top[j], transform);
  }
  return sum / static_cast<double>(top_n - 1);
}

// ---------------------------------------------------------------------------
// Batch scoring.

inline void ScorerConfig::Validate(std::size_t num_classes) const {
  if (num_classes == 0) Fail(ErrorCode::kEmptyRow, "logit rows are empty");
  detail::RequirePositive(tau, "tau");
  detail::RequirePositive(energy_t, "energy temperature");
  switch (method) {
    case ScoreMethod::kMaxLogit:
    case ScoreMethod::kMcm:
    case ScoreMethod::kEnergy:
    case ScoreMethod::kLogitGapSoftmax:
      break;
    case ScoreMethod::kGen: {
      if (!(gamma > 0.0 && gamma < 1.0)) {
        Fail(ErrorCode::kInvalidConfig, "GEN gamma must lie in (0, 1)");
      }
      const std::size_t m = gen_m.value_or(num_classes);
      if (m < 1 || m > num_classes) {
        Fail(ErrorCode::kInvalidConfig,
             "GEN M must lie in [1, " + std::to_string(num_classes) + "]");
      }
      break;
    }
    case ScoreMethod::kMargin:
    case ScoreMethod::kLogitGap:
      if (num_classes < 2) {
        Fail(ErrorCode::kTooFewClasses,
             std::string(MethodName(method)) + " needs at least two classes");
      }
      break;
    case ScoreMethod::kLogitGapTopN:
    case ScoreMethod::kLogitGapVariant:
      if (!top_n.has_value()) {
        Fail(ErrorCode::kBadN,
             std::string(MethodName(method)) + " requires top_n");
      }
      if (num_classes < 2) {
        Fail(ErrorCode::kTooFewClasses,
             std::string(MethodName(method)) + " needs at least two classes");
      }
      detail::RequireTopN(*top_n, num_classes);
      break;
  }
}

inline double ScoreRow(std::span<const double> z, const ScorerConfig& cfg) {
  switch (cfg.method) {
    case ScoreMethod::kMaxLogit: return ScoreMaxLogit(z);
    case ScoreMethod::kMcm: return ScoreMcm(z, cfg.tau);
    case ScoreMethod::kEnergy: return ScoreEnergy(z, cfg.energy_t);
    case ScoreMethod::kGen: return ScoreGen(z, cfg.gamma, cfg.gen_m, cfg.tau);
    case ScoreMethod::kMargin: return ScoreMargin(z, cfg.tau);
    case ScoreMethod::kLogitGap: return ScoreLogitGap(z);
    case ScoreMethod::kLogitGapTopN:
      return ScoreLogitGapTopN(z, cfg.top_n.value_or(0), cfg.normalization);
    case ScoreMethod::kLogitGapSoftmax: return ScoreLogitGapSoftmax(z, cfg.tau);
    case ScoreMethod::kLogitGapVariant:
      return ScoreLogitGapVariant(z, cfg.top_n.value_or(0), cfg.transform);
  }
  Fail(ErrorCode::kInvalidConfig, "unhandled method");
}

// Applies the configured scorer to every row. Row errors are rethrown with
// the row index; a non-finite score is reported as kNonFiniteValue.
inline ScoreVector ScoreBatch(const Matrix& logits, const ScorerConfig& cfg) {
  if (logits.rows() == 0) Fail(ErrorCode::kEmptyMatrix, "no logit rows");
  cfg.Validate(logits.cols());
  ScoreVector out{std::vector<double>(logits.rows()), cfg};
  ParallelFor(logits.rows(), 512, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double s = 0.0;
      try {
        s = ScoreRow(logits.row(i), cfg);
      } catch (const Error& e) {
        throw Error(e.code(), "row " + std::to_string(i) + ": " + e.what());
      }
      if (!std::isfinite(s)) {
        Fail(ErrorCode::kNonFiniteValue,
             "row " + std::to_string(i) + " produced a non-finite score");
      }
      out.scores[i] = s;
    }
  });
  return out;
}

}  // namespace oodkit

#endif  // OODKIT_SCORING_HPP_
