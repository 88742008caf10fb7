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

// Detector quality metrics. ID is the positive class and a sample is accepted
// as ID when its score is >= the threshold.

#ifndef OODKIT_METRICS_HPP_
#define OODKIT_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "oodkit/error.hpp"

namespace oodkit {

struct EvalResult {
  double fpr95 = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;  // ID-positive average precision ("aupr_in")
  double lambda95 = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

struct FprAtTpr {
  double fpr = 0.0;
  double lambda = 0.0;
};

inline constexpr std::uint64_t kBruteForcePairLimit = 100'000'000;

namespace detail {

inline void RequireScores(std::span<const double> id_scores,
                          std::span<const double> ood_scores) {
  if (id_scores.empty()) Fail(ErrorCode::kEmptySet, "no ID scores");
  if (ood_scores.empty()) Fail(ErrorCode::kEmptySet, "no OOD scores");
  for (auto set : {id_scores, ood_scores}) {
    for (double s : set) {
      if (!std::isfinite(s)) Fail(ErrorCode::kNonFiniteValue, "score is not finite");
    }
  }
}

}  // namespace detail

// The threshold is the ceil(tpr * n_id)-th largest ID score (no
// interpolation); fpr is the fraction of OOD scores at or above it.
inline FprAtTpr FprAtTprThreshold(std::span<const double> id_scores,
                                  std::span<const double> ood_scores,
                                  double tpr = 0.95) {
  detail::RequireScores(id_scores, ood_scores);
  if (!(tpr > 0.0 && tpr <= 1.0)) {
    Fail(ErrorCode::kInvalidConfig, "tpr must lie in (0, 1]");
  }
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto n_id = static_cast<double>(sorted.size());
  // The 1e-9 guard keeps products such as 0.95 * 100 from rounding up a rank.
  auto needed = static_cast<std::size_t>(std::ceil(tpr * n_id - 1e-9));
  needed = std::clamp<std::size_t>(needed, 1, sorted.size());
  const double lambda = sorted[needed - 1];
  const auto false_positives = std::count_if(
      ood_scores.begin(), ood_scores.end(),
      [lambda](double s) { return s >= lambda; });
  return {static_cast<double>(false_positives) /
              static_cast<double>(ood_scores.size()),
          lambda};
}

// Mann-Whitney U / (n_id * n_ood); ties count one half. U is accumulated in
// integer half-units so the result is exact up to the final division.
inline double Auroc(std::span<const double> id_scores,
                    std::span<const double> ood_scores) {
  detail::RequireScores(id_scores, ood_scores);
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end());
  std::uint64_t twice_u = 0;
  for (double s : id_scores) {
    const auto lower = std::lower_bound(ood.begin(), ood.end(), s);
    const auto upper = std::upper_bound(lower, ood.end(), s);
    twice_u += 2 * static_cast<std::uint64_t>(lower - ood.begin()) +
               static_cast<std::uint64_t>(upper - lower);
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(id_scores.size()) *
          static_cast<double>(ood.size()));
}

// Reference implementation: every (ID, OOD) pair, same tie convention.
inline double AurocBruteForce(std::span<const double> id_scores,
                              std::span<const double> ood_scores) {
  detail::RequireScores(id_scores, ood_scores);
  const auto pairs = static_cast<std::uint64_t>(id_scores.size()) *
                     static_cast<std::uint64_t>(ood_scores.size());
  if (pairs > kBruteForcePairLimit) {
    Fail(ErrorCode::kTooLarge,
         std::to_string(pairs) + " pairs exceed the brute-force limit");
  }
  double wins = 0.0;
  for (double a : id_scores) {
    for (double b : ood_scores) {
      if (a > b) {
        wins += 1.0;
      } else if (a == b) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

// Average precision with ID positive: thresholds sweep the distinct scores in
// descending order and tied scores enter as one block,
// AP = sum_k (R_k - R_{k-1}) * P_k.
inline double Aupr(std::span<const double> id_scores,
                   std::span<const double> ood_scores) {
  detail::RequireScores(id_scores, ood_scores);
  struct Entry {
    double score;
    bool is_id;
  };
  std::vector<Entry> entries;
  entries.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) entries.push_back({s, true});
  for (double s : ood_scores) entries.push_back({s, false});
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.score > b.score; });

  const auto n_id = static_cast<double>(id_scores.size());
  std::size_t tp = 0;
  std::size_t fp = 0;
  double prev_recall = 0.0;
  double ap = 0.0;
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i;
    while (j < entries.size() && entries[j].score == entries[i].score) {
      (entries[j].is_id ? tp : fp)++;
      ++j;
    }
    const double recall = static_cast<double>(tp) / n_id;
    const double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

inline EvalResult Evaluate(std::span<const double> id_scores,
                           std::span<const double> ood_scores,
                           double tpr = 0.95) {
  const FprAtTpr at = FprAtTprThreshold(id_scores, ood_scores, tpr);
  EvalResult r;
  r.fpr95 = at.fpr;
  r.lambda95 = at.lambda;
  r.auroc = Auroc(id_scores, ood_scores);
  r.aupr = Aupr(id_scores, ood_scores);
  r.n_id = id_scores.size();
  r.n_ood = ood_scores.size();
  return r;
}

}  // namespace oodkit

#endif  // OODKIT_METRICS_HPP_
