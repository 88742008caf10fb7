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

// Seeded Monte Carlo checks of the LogitGap theory.
//
// GaussianWorld: ID features of class c are N(mu_c, diag(var_c)); OOD
// features interpolate two classes a, b with additive noise,
//
//   phi_ood = alpha * N(mu_a, var_a) + (1 - alpha) * N(mu_b, var_b)
//             + beta * N(0, diag(noise_var)),
//
// and logits are W * phi (no bias). With K = 2 the pair is always a = 1,
// b = 0; with K > 2 it is an ordered pair of distinct classes drawn
// uniformly per sample. ID sample r has class r mod K.
//
// Sampling is sharded into blocks of kWorldShardRows rows. Block s of the ID
// (OOD) matrix draws from Rng::Substream(seed, kWorldId (kWorldOod), s), so
// the output is identical for any thread count. Within a row the draws are:
// [OOD only: a, b], d normals for the first component, [OOD only: d normals
// for the second component, d normals for the noise].

#ifndef OODKIT_THEORYLAB_HPP_
#define OODKIT_THEORYLAB_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oodkit/error.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/metrics.hpp"
#include "oodkit/parallel.hpp"
#include "oodkit/random.hpp"
#include "oodkit/scoring.hpp"

namespace oodkit {

inline constexpr std::size_t kWorldShardRows = 1024;
inline constexpr double kFprSlack = 0.02;

struct GaussianWorld {
  std::size_t k = 2;
  std::size_t d = 16;
  Matrix means;           // k x d
  Matrix class_variance;  // k x d, diagonal covariances
  Matrix weights;         // k x d classifier rows
  double alpha = 0.5;
  double beta = 0.1;
  std::vector<double> noise_variance;  // d
  std::uint64_t seed = 0;

  void Validate() const {
    const auto bad = [](const std::string& why) {
      Fail(ErrorCode::kBadWorld, why);
    };
    if (k < 2) bad("world needs at least two classes");
    if (d < 1) bad("feature dimension must be positive");
    for (const Matrix* m : {&means, &class_variance, &weights}) {
      if (m->rows() != k || m->cols() != d) {
        bad("means, variances and weights must all be " + std::to_string(k) +
            "x" + std::to_string(d));
      }
      for (double v : m->values()) {
        if (!std::isfinite(v)) bad("world parameters must be finite");
      }
    }
    if (noise_variance.size() != d) bad("noise variance must have d entries");
    for (double v : class_variance.values()) {
      if (v < 0) bad("class variances must be nonnegative");
    }
    for (double v : noise_variance) {
      if (!(v >= 0) || !std::isfinite(v)) bad("noise variances must be nonnegative");
    }
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        if (std::equal(means.row(a).begin(), means.row(a).end(),
                       means.row(b).begin())) {
          bad("class means " + std::to_string(a) + " and " +
              std::to_string(b) + " coincide");
        }
      }
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) bad("alpha must lie in [0, 1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) bad("beta must be nonnegative");
  }
};

// K = 2: d = 16, mu_0 = -mu_1 = 2 e_1, W = [e_1; -e_1].
// K > 2: d = max(16, K), mu_c = 2 e_c, W = identity rows.
// Unit class and noise variances, alpha = 0.5, beta = 0.1.
inline GaussianWorld DefaultWorld(std::size_t k = 2, std::uint64_t seed = 0) {
  if (k < 2) Fail(ErrorCode::kBadWorld, "world needs at least two classes");
  GaussianWorld w;
  w.k = k;
  w.d = std::max<std::size_t>(16, k);
  w.means = Matrix(k, w.d);
  w.weights = Matrix(k, w.d);
  if (k == 2) {
    w.means(0, 0) = 2.0;
    w.means(1, 0) = -2.0;
    w.weights(0, 0) = 1.0;
    w.weights(1, 0) = -1.0;
  } else {
    for (std::size_t c = 0; c < k; ++c) {
      w.means(c, c) = 2.0;
      w.weights(c, c) = 1.0;
    }
  }
  w.class_variance = Matrix(k, w.d, 1.0);
  w.noise_variance.assign(w.d, 1.0);
  w.seed = seed;
  return w;
}

struct WorldSample {
  Matrix id_logits;
  Matrix ood_logits;
  LabelVector id_labels;
  // Interpolated classes (a, b) of each OOD row.
  std::vector<std::pair<std::size_t, std::size_t>> ood_pairs;
};

namespace detail {

inline void Project(const Matrix& weights, std::span<const double> phi,
                    std::span<double> out) {
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    const auto w = weights.row(c);
    double dot = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) dot += w[j] * phi[j];
    out[c] = dot;
  }
}

}  // namespace detail

inline WorldSample SimulateWorld(const GaussianWorld& world, std::size_t n_id,
                                 std::size_t n_ood) {
  world.Validate();
  if (n_id == 0 || n_ood == 0) {
    Fail(ErrorCode::kBadWorld, "sample counts must be positive");
  }
  const std::size_t k = world.k;
  const std::size_t d = world.d;
  Matrix class_sd(k, d);
  for (std::size_t i = 0; i < class_sd.values().size(); ++i) {
    class_sd.values()[i] = std::sqrt(world.class_variance.values()[i]);
  }
  std::vector<double> noise_sd(d);
  for (std::size_t j = 0; j < d; ++j) {
    noise_sd[j] = std::sqrt(world.noise_variance[j]);
  }

  WorldSample out;
  out.id_logits = Matrix(n_id, k);
  out.ood_logits = Matrix(n_ood, k);
  out.id_labels.resize(n_id);
  out.ood_pairs.resize(n_ood);

  const std::size_t id_shards = (n_id + kWorldShardRows - 1) / kWorldShardRows;
  ParallelFor(id_shards, 1, [&](std::size_t begin, std::size_t end) {
    std::vector<double> phi(d);
    for (std::size_t s = begin; s < end; ++s) {
      Rng rng = Rng::Substream(world.seed, StreamTag::kWorldId, s);
      const std::size_t last = std::min(n_id, (s + 1) * kWorldShardRows);
      for (std::size_t r = s * kWorldShardRows; r < last; ++r) {
        const std::size_t c = r % k;
        for (std::size_t j = 0; j < d; ++j) {
          phi[j] = world.means(c, j) + class_sd(c, j) * rng.Normal();
        }
        out.id_labels[r] = c;
        detail::Project(world.weights, phi, out.id_logits.row(r));
      }
    }
  });

  const std::size_t ood_shards =
      (n_ood + kWorldShardRows - 1) / kWorldShardRows;
  ParallelFor(ood_shards, 1, [&](std::size_t begin, std::size_t end) {
    std::vector<double> phi(d);
    for (std::size_t s = begin; s < end; ++s) {
      Rng rng = Rng::Substream(world.seed, StreamTag::kWorldOod, s);
      const std::size_t last = std::min(n_ood, (s + 1) * kWorldShardRows);
      for (std::size_t r = s * kWorldShardRows; r < last; ++r) {
        std::size_t a = 1;
        std::size_t b = 0;
        if (k > 2) {
          a = rng.Index(k);
          b = rng.Index(k - 1);
          if (b >= a) ++b;
        }
        for (std::size_t j = 0; j < d; ++j) {
          phi[j] = world.alpha *
                   (world.means(a, j) + class_sd(a, j) * rng.Normal());
        }
        for (std::size_t j = 0; j < d; ++j) {
          phi[j] += (1.0 - world.alpha) *
                    (world.means(b, j) + class_sd(b, j) * rng.Normal());
        }
        for (std::size_t j = 0; j < d; ++j) {
          phi[j] += world.beta * noise_sd[j] * rng.Normal();
        }
        out.ood_pairs[r] = {a, b};
        detail::Project(world.weights, phi, out.ood_logits.row(r));
      }
    }
  });
  return out;
}

struct TheoremReport {
  std::string name;
  std::size_t samples = 0;
  // Ordered so that serialized reports are stable.
  std::vector<std::pair<std::string, double>> statistics;
  bool passed = false;
  // How far the checked inequality held, in Monte Carlo standard errors.
  double margin = 0.0;

  void Add(std::string key, double value) {
    statistics.emplace_back(std::move(key), value);
  }

  std::optional<double> Get(const std::string& key) const {
    for (const auto& [k, v] : statistics) {
      if (k == key) return v;
    }
    return std::nullopt;
  }
};

// Running mean / variance (Welford), consumed in a fixed order.
class MeanAccumulator {
 public:
  void Add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  // Standard error of the mean.
  double stderr_mean() const noexcept {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

namespace detail {

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double CombinedStderr(const MeanAccumulator& a, const MeanAccumulator& b) {
  return std::sqrt(a.stderr_mean() * a.stderr_mean() +
                   b.stderr_mean() * b.stderr_mean());
}

}  // namespace detail

// For a two-class world: the logit of the class a sample does NOT belong to
// is smaller in expectation for ID samples than for interpolated OOD samples,
// E[z_ID_{1-i}] < E[z_OOD_{1-i}] for i = 0, 1. Uses n ID and n OOD samples.
inline TheoremReport CheckNonmaxOrder(const GaussianWorld& world,
                                      std::size_t n) {
  world.Validate();
  if (world.k != 2) {
    Fail(ErrorCode::kBadWorld, "the non-max ordering check needs k = 2");
  }
  if (world.alpha == 0.0 || world.alpha == 1.0) {
    Fail(ErrorCode::kDegenerateMixture,
         "alpha must lie strictly inside (0, 1)");
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const auto w_other = world.weights.row(1 - i);
    if (!(detail::Dot(w_other, world.means.row(i)) <
          detail::Dot(w_other, world.means.row(1 - i)))) {
      Fail(ErrorCode::kIllTrainedClassifier,
           "w_" + std::to_string(1 - i) + " . mu_" + std::to_string(i) +
               " must be below w_" + std::to_string(1 - i) + " . mu_" +
               std::to_string(1 - i));
    }
  }
  const WorldSample sample = SimulateWorld(world, n, n);

  MeanAccumulator id_by_class[2];
  MeanAccumulator ood_by_class[2];
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t y = sample.id_labels[r];
    const double z = sample.id_logits(r, 1 - y);
    id_by_class[y].Add(z);
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto z = sample.ood_logits.row(r);
    ood_by_class[0].Add(z[1]);  // z_{1-i} with i = 0
    ood_by_class[1].Add(z[0]);
  }

  std::vector<double> mix(world.d);
  for (std::size_t j = 0; j < world.d; ++j) {
    mix[j] = world.alpha * world.means(1, j) +
             (1.0 - world.alpha) * world.means(0, j);
  }

  TheoremReport report;
  report.name = "nonmax-order";
  report.samples = n;
  report.passed = true;
  report.margin = INFINITY;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto w_other = world.weights.row(1 - i);
    const double id_expected = detail::Dot(w_other, world.means.row(i));
    const double ood_expected = detail::Dot(w_other, mix);
    const double se = detail::CombinedStderr(id_by_class[i], ood_by_class[i]);
    const double margin = (ood_by_class[i].mean() - id_by_class[i].mean()) / se;
    const std::string tag = "_class" + std::to_string(i);
    report.Add("id_mean" + tag, id_by_class[i].mean());
    report.Add("ood_mean" + tag, ood_by_class[i].mean());
    report.Add("id_stderr" + tag, id_by_class[i].stderr_mean());
    report.Add("ood_stderr" + tag, ood_by_class[i].stderr_mean());
    report.Add("id_expected" + tag, id_expected);
    report.Add("ood_expected" + tag, ood_expected);
    report.Add("id_deviation_se" + tag,
               (id_by_class[i].mean() - id_expected) /
                   id_by_class[i].stderr_mean());
    report.Add("ood_deviation_se" + tag,
               (ood_by_class[i].mean() - ood_expected) /
                   ood_by_class[i].stderr_mean());
    report.Add("margin_se" + tag, margin);
    report.passed = report.passed && id_by_class[i].mean() < ood_by_class[i].mean();
    report.margin = std::min(report.margin, margin);
  }
  return report;
}

// Sum of gaps z'_1 - z'_j over the whole row.
inline double GapSum(std::span<const double> z) {
  const double z_max = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += z_max - v;
  return sum;
}

struct FprComparison {
  double fpr_logitgap = 0.0;
  double fpr_mcm = 0.0;
};

// Both scorers calibrated independently at TPR 0.95 on one simulated split.
inline FprComparison CompareFpr(const WorldSample& sample, double tau) {
  ScorerConfig lg;
  lg.method = ScoreMethod::kLogitGap;
  ScorerConfig mcm;
  mcm.method = ScoreMethod::kMcm;
  mcm.tau = tau;
  const auto lg_id = ScoreBatch(sample.id_logits, lg);
  const auto lg_ood = ScoreBatch(sample.ood_logits, lg);
  const auto mcm_id = ScoreBatch(sample.id_logits, mcm);
  const auto mcm_ood = ScoreBatch(sample.ood_logits, mcm);
  return {FprAtTprThreshold(lg_id.scores, lg_ood.scores, 0.95).fpr,
          FprAtTprThreshold(mcm_id.scores, mcm_ood.scores, 0.95).fpr};
}

// Three checks on k-class logits at temperature tau:
//  (a) LogitGap-softmax equals MCM - 1/k on n uniform vectors in [-1, 1]^k;
//  (b) the gap sum never exceeds 2(k - 1) there, with equality at
//      [1, -1, ..., -1];
//  (c) on DefaultWorld(k, seed) with n samples per side, both scorers
//      calibrated at TPR 0.95, FPR(LogitGap) <= FPR(MCM) + kFprSlack.
inline TheoremReport CheckThresholdChain(std::size_t k, double tau,
                                         std::size_t n, std::uint64_t seed) {
  if (k < 2) Fail(ErrorCode::kTooFewClasses, "chain check needs k >= 2");
  if (!(tau > 0.0)) Fail(ErrorCode::kInvalidConfig, "tau must be positive");
  if (n == 0) Fail(ErrorCode::kInvalidConfig, "sample count must be positive");
  const double bound = 2.0 * static_cast<double>(k - 1);
  const double inv_k = 1.0 / static_cast<double>(k);

  Rng rng = Rng::Substream(seed, StreamTag::kUniformLogits);
  std::vector<double> z(k);
  double identity_error = 0.0;
  double bound_excess = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : z) v = rng.Uniform(-1.0, 1.0);
    identity_error = std::max(
        identity_error,
        std::abs(ScoreLogitGapSoftmax(z, tau) - (ScoreMcm(z, tau) - inv_k)));
    bound_excess = std::max(bound_excess, GapSum(z) - bound);
  }
  std::vector<double> extremal(k, -1.0);
  extremal[0] = 1.0;
  const double extremal_error = std::abs(GapSum(extremal) - bound);

  const WorldSample sample = SimulateWorld(DefaultWorld(k, seed), n, n);
  const FprComparison fpr = CompareFpr(sample, tau);
  // Standard error of the FPR difference, treating the two as independent.
  const double se = std::sqrt(
      std::max(fpr.fpr_logitgap * (1 - fpr.fpr_logitgap) +
                   fpr.fpr_mcm * (1 - fpr.fpr_mcm),
               1e-12) /
      static_cast<double>(n));

  const bool identity_ok = identity_error <= 1e-12;
  const bool bound_ok = bound_excess <= 1e-12 && extremal_error <= 1e-12;
  const bool fpr_ok = fpr.fpr_logitgap <= fpr.fpr_mcm + kFprSlack;

  TheoremReport report;
  report.name = "appendixA-chain";
  report.samples = n;
  report.Add("k", static_cast<double>(k));
  report.Add("tau", tau);
  report.Add("identity_max_abs_error", identity_error);
  report.Add("gap_sum_bound", bound);
  report.Add("gap_sum_max_excess", bound_excess);
  report.Add("extremal_abs_error", extremal_error);
  report.Add("fpr95_logitgap", fpr.fpr_logitgap);
  report.Add("fpr95_mcm", fpr.fpr_mcm);
  report.Add("fpr_slack", kFprSlack);
  report.Add("identity_ok", identity_ok ? 1.0 : 0.0);
  report.Add("bound_ok", bound_ok ? 1.0 : 0.0);
  report.Add("fpr_ok", fpr_ok ? 1.0 : 0.0);
  report.passed = identity_ok && bound_ok && fpr_ok;
  report.margin = (fpr.fpr_mcm + kFprSlack - fpr.fpr_logitgap) / se;
  return report;
}

// Repeats the FPR comparison of CheckThresholdChain over `seeds` consecutive
// seeds. Passes when at least 90% of seeds satisfy the slack inequality and
// the mean LogitGap FPR does not exceed the mean MCM FPR.
inline TheoremReport CheckFprDirection(std::size_t k, double tau,
                                       std::size_t n, std::size_t seeds,
                                       std::uint64_t first_seed) {
  if (k < 2) Fail(ErrorCode::kTooFewClasses, "FPR check needs k >= 2");
  if (seeds == 0 || n == 0) {
    Fail(ErrorCode::kInvalidConfig, "seed and sample counts must be positive");
  }
  std::size_t within_slack = 0;
  MeanAccumulator lg;
  MeanAccumulator mcm;
  MeanAccumulator diff;
  for (std::size_t s = 0; s < seeds; ++s) {
    const WorldSample sample =
        SimulateWorld(DefaultWorld(k, first_seed + s), n, n);
    const FprComparison fpr = CompareFpr(sample, tau);
    if (fpr.fpr_logitgap <= fpr.fpr_mcm + kFprSlack) ++within_slack;
    lg.Add(fpr.fpr_logitgap);
    mcm.Add(fpr.fpr_mcm);
    diff.Add(fpr.fpr_mcm - fpr.fpr_logitgap);
  }
  TheoremReport report;
  report.name = "fpr-direction";
  report.samples = n;
  report.Add("k", static_cast<double>(k));
  report.Add("tau", tau);
  report.Add("seeds", static_cast<double>(seeds));
  report.Add("seeds_within_slack", static_cast<double>(within_slack));
  report.Add("mean_fpr95_logitgap", lg.mean());
  report.Add("mean_fpr95_mcm", mcm.mean());
  report.passed = within_slack * 10 >= seeds * 9 && lg.mean() <= mcm.mean();
  const double se = diff.stderr_mean();
  report.margin = se > 0 ? diff.mean() / se : (diff.mean() >= 0 ? INFINITY : -INFINITY);
  return report;
}

struct LogitStatistics {
  double max_mean = 0.0;
  double max_stderr = 0.0;
  double tail_mean = 0.0;   // mean over rows of mean(z'_2 .. z'_N)
  double tail_stderr = 0.0;
  std::vector<double> sorted_curve;  // per-rank mean of the sorted rows
};

// Summary of sorted logits; top_n defaults to K (all non-maximum logits).
inline LogitStatistics ComputeLogitStatistics(
    const Matrix& logits, std::optional<std::size_t> top_n = std::nullopt) {
  if (logits.rows() == 0 || logits.cols() == 0) {
    Fail(ErrorCode::kEmptyMatrix, "no logits");
  }
  const std::size_t k = logits.cols();
  if (k < 2) Fail(ErrorCode::kTooFewClasses, "statistics need K >= 2");
  const std::size_t n = top_n.value_or(k);
  if (n < 2 || n > k) Fail(ErrorCode::kBadN, "top_n must lie in [2, K]");

  MeanAccumulator max_acc;
  MeanAccumulator tail_acc;
  std::vector<double> curve(k, 0.0);
  std::vector<double> sorted;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    sorted.assign(row.begin(), row.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    max_acc.Add(sorted[0]);
    double tail = 0.0;
    for (std::size_t j = 1; j < n; ++j) tail += sorted[j];
    tail_acc.Add(tail / static_cast<double>(n - 1));
    for (std::size_t j = 0; j < k; ++j) curve[j] += sorted[j];
  }
  for (double& c : curve) c /= static_cast<double>(logits.rows());
  return {max_acc.mean(), max_acc.stderr_mean(), tail_acc.mean(),
          tail_acc.stderr_mean(), std::move(curve)};
}

// ID rows have a larger mean maximum logit and a smaller mean tail than OOD
// rows. margin is the smaller of the two separations in standard errors.
inline TheoremReport CheckLogitOrdering(const GaussianWorld& world,
                                        std::size_t n,
                                        std::optional<std::size_t> top_n =
                                            std::nullopt) {
  const WorldSample sample = SimulateWorld(world, n, n);
  const auto id = ComputeLogitStatistics(sample.id_logits, top_n);
  const auto ood = ComputeLogitStatistics(sample.ood_logits, top_n);
  const double max_se = std::hypot(id.max_stderr, ood.max_stderr);
  const double tail_se = std::hypot(id.tail_stderr, ood.tail_stderr);
  const double max_margin = (id.max_mean - ood.max_mean) / max_se;
  const double tail_margin = (ood.tail_mean - id.tail_mean) / tail_se;
  const auto non_increasing = [](const std::vector<double>& c) {
    return std::adjacent_find(c.begin(), c.end(), std::less<>()) == c.end();
  };

  TheoremReport report;
  report.name = "logit-ordering";
  report.samples = n;
  report.Add("k", static_cast<double>(world.k));
  report.Add("id_max_mean", id.max_mean);
  report.Add("ood_max_mean", ood.max_mean);
  report.Add("id_tail_mean", id.tail_mean);
  report.Add("ood_tail_mean", ood.tail_mean);
  report.Add("max_margin_se", max_margin);
  report.Add("tail_margin_se", tail_margin);
  const bool curves_ok =
      non_increasing(id.sorted_curve) && non_increasing(ood.sorted_curve);
  report.Add("curves_non_increasing", curves_ok ? 1.0 : 0.0);
  report.passed = id.max_mean > ood.max_mean && id.tail_mean < ood.tail_mean &&
                  curves_ok;
  report.margin = std::min(max_margin, tail_margin);
  return report;
}

}  // namespace oodkit

#endif  // OODKIT_THEORYLAB_HPP_
