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

#include "oodkit/selection.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oodkit/scoring.hpp"
#include "test_util.hpp"

namespace oodkit {
namespace {

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an oodkit::Error";
  return ErrorCode::kUsage;
}

TEST(SelectionTest, FixedNTable) {
  EXPECT_EQ(FixedN(1000), 200u);
  EXPECT_EQ(FixedN(100), 20u);
  EXPECT_EQ(FixedN(10), 5u);
  EXPECT_EQ(FixedN(20), 10u);
  EXPECT_EQ(FixedN(2), 2u);
  EXPECT_EQ(FixedN(3), 2u);
  EXPECT_EQ(FixedN(50), 10u);
  EXPECT_EQ(FixedN(49), 25u);
  EXPECT_EQ(CodeOf([] { FixedN(1); }), ErrorCode::kTooFewClasses);
}

TEST(SelectionTest, FixedNStaysInRange) {
  for (std::size_t k = 2; k <= 2000; ++k) {
    const std::size_t n = FixedN(k);
    ASSERT_GE(n, 2u);
    ASSERT_LE(n, k);
  }
}

TEST(SelectionTest, MeanTailExamples) {
  const std::vector<double> z = {5, 3, 1};
  EXPECT_EQ(MeanTail(z, 3), 2.0);
  EXPECT_EQ(MeanTail(z, 2), 3.0);
  EXPECT_EQ(MeanTail(std::vector<double>{4, 4, 4}, 3), 4.0);
  EXPECT_EQ(CodeOf([&] { MeanTail(z, 1); }), ErrorCode::kBadN);
  EXPECT_EQ(CodeOf([&] { MeanTail(z, 4); }), ErrorCode::kBadN);
  EXPECT_EQ(CodeOf([] { MeanTail(std::vector<double>{1, 3, 2}, 2); }),
            ErrorCode::kNotSorted);
}

TEST(SelectionTest, MaxGapExample) {
  const NSelection sel = SelectNMaxGap(Matrix::FromRows({{10, 0, 0}}),
                                       Matrix::FromRows({{1, 1, 1}}), 2, 3);
  EXPECT_EQ(sel.n_star, 2u);
  EXPECT_EQ(sel.n_min, 2u);
  EXPECT_EQ(sel.n_max, 3u);
  EXPECT_EQ(sel.gap_curve, (std::vector<double>{1.0, 1.0}));
}

TEST(SelectionTest, IdenticalInputsGiveFlatCurve) {
  std::mt19937_64 gen(1);
  const Matrix m = testing::RandomMatrix(gen, 40, 9);
  const NSelection sel = SelectNMaxGap(m, m, 3, 8);
  EXPECT_EQ(sel.n_star, 3u);
  ASSERT_EQ(sel.gap_curve.size(), 6u);
  for (double g : sel.gap_curve) EXPECT_EQ(g, 0.0);
}

TEST(SelectionTest, MaxGapErrors) {
  const Matrix a(2, 4, 0.0);
  EXPECT_EQ(CodeOf([&] { SelectNMaxGap(a, Matrix(2, 3, 0.0)); }),
            ErrorCode::kDimensionMismatch);
  EXPECT_EQ(CodeOf([&] { SelectNMaxGap(a, a, 1, 4); }), ErrorCode::kBadN);
  EXPECT_EQ(CodeOf([&] { SelectNMaxGap(a, a, 3, 2); }), ErrorCode::kBadN);
  EXPECT_EQ(CodeOf([&] { SelectNMaxGap(a, a, 2, 5); }), ErrorCode::kBadN);
  EXPECT_EQ(CodeOf([&] { SelectNMaxGap(Matrix(0, 4), a); }),
            ErrorCode::kEmptyMatrix);
}

// Naive tail-mean curve: sort each row, average directly.
std::vector<double> NaiveCurve(const Matrix& id, const Matrix& ood,
                               std::size_t n_min, std::size_t n_max) {
  const auto mean_tail = [](const Matrix& m, std::size_t n) {
    double total = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      std::vector<double> s(m.row(r).begin(), m.row(r).end());
      std::sort(s.begin(), s.end(), std::greater<>());
      double t = 0.0;
      for (std::size_t j = 1; j < n; ++j) t += s[j];
      total += t / static_cast<double>(n - 1);
    }
    return total / static_cast<double>(m.rows());
  };
  std::vector<double> curve;
  for (std::size_t n = n_min; n <= n_max; ++n) {
    curve.push_back(mean_tail(ood, n) - mean_tail(id, n));
  }
  return curve;
}

// Property: the prefix-sum curve matches the naive definition.
TEST(SelectionTest, CurveMatchesNaiveDefinition) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + trial % 40;
    const Matrix id = testing::RandomMatrix(gen, 1 + trial * 7, k, -5, 5);
    const Matrix ood = testing::RandomMatrix(gen, 1 + trial * 5, k, -5, 5);
    const NSelection sel = SelectNMaxGap(id, ood);
    const auto naive = NaiveCurve(id, ood, 2, k);
    ASSERT_EQ(sel.gap_curve.size(), k - 1);
    for (std::size_t i = 0; i < naive.size(); ++i) {
      ASSERT_NEAR(sel.gap_curve[i], naive[i], 1e-12);
    }
  }
}

// Property: maximizing the tail-mean gap is the same as maximizing the mean
// difference of top-N LogitGap scores between ID and OOD, because the max
// logit term cancels. Smallest N wins ties on both sides.
TEST(SelectionTest, CriterionMatchesScoreDifference) {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::size_t> rows(1, 200);
  std::uniform_int_distribution<std::size_t> classes(2, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = classes(gen);
    const Matrix id = testing::RandomMatrix(gen, rows(gen), k, -3, 3);
    const Matrix ood = testing::RandomMatrix(gen, rows(gen), k, -3, 3);
    const NSelection sel = SelectNMaxGap(id, ood);

    std::size_t best_n = 0;
    double best = -INFINITY;
    for (std::size_t n = 2; n <= k; ++n) {
      double id_mean = 0.0;
      double ood_mean = 0.0;
      for (std::size_t r = 0; r < id.rows(); ++r) {
        id_mean += ScoreLogitGapTopN(id.row(r), n);
      }
      for (std::size_t r = 0; r < ood.rows(); ++r) {
        ood_mean += ScoreLogitGapTopN(ood.row(r), n);
      }
      const double diff = id_mean / static_cast<double>(id.rows()) -
                          ood_mean / static_cast<double>(ood.rows());
      if (diff > best + 1e-12) {
        best = diff;
        best_n = n;
      }
    }
    ASSERT_EQ(sel.n_star, best_n) << "trial " << trial;
  }
}

// Property: a constant added to every logit leaves the curve unchanged up to
// rounding (exactly for dyadic shifts of grid data).
TEST(SelectionTest, CurveShiftInvariance) {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<int> grid(-512, 512);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 2 + trial % 16;
    Matrix id(20, k);
    Matrix ood(30, k);
    for (double& v : id.values()) v = grid(gen) / 64.0;
    for (double& v : ood.values()) v = grid(gen) / 64.0;
    Matrix id2 = id;
    Matrix ood2 = ood;
    for (double& v : id2.values()) v += 2.0;
    for (double& v : ood2.values()) v += 2.0;
    const NSelection a = SelectNMaxGap(id, ood);
    const NSelection b = SelectNMaxGap(id2, ood2);
    EXPECT_EQ(a.n_star, b.n_star);
    for (std::size_t i = 0; i < a.gap_curve.size(); ++i) {
      ASSERT_NEAR(a.gap_curve[i], b.gap_curve[i], 1e-12);
    }
  }
}

TEST(SelectionTest, SynthesisDegenerateCases) {
  const Matrix x = Matrix::FromRows({{1, 2}, {3, 4}, {5, 6}});
  const LabelVector y = {0, 1, 1};
  SynthesisConfig cfg;
  cfg.alpha = 1.0;
  cfg.beta = 0.0;
  cfg.count = 50;
  const Matrix out = SynthesizeOod(x, y, cfg);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    bool found = false;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      found = found || (out(r, 0) == x(i, 0) && out(r, 1) == x(i, 1));
    }
    ASSERT_TRUE(found);
  }

  const Matrix pair = Matrix::FromRows({{1, 0}, {0, 3}});
  cfg.alpha = 0.5;
  const Matrix mid = SynthesizeOod(pair, {0, 1}, cfg);
  for (std::size_t r = 0; r < mid.rows(); ++r) {
    ASSERT_EQ(mid(r, 0), 0.5);
    ASSERT_EQ(mid(r, 1), 1.5);
  }
}

TEST(SelectionTest, SynthesisIsDeterministic) {
  std::mt19937_64 gen(5);
  const Matrix x = testing::RandomMatrix(gen, 60, 8);
  LabelVector y(60);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 4;
  SynthesisConfig cfg;
  cfg.seed = 99;
  const Matrix a = SynthesizeOod(x, y, cfg);
  const Matrix b = SynthesizeOod(x, y, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rows(), 60u);
  cfg.seed = 100;
  EXPECT_FALSE(SynthesizeOod(x, y, cfg) == a);
}

// Property: with beta = 0 and alpha in (0, 1), every synthetic row is a
// mixture of two rows with different labels.
TEST(SelectionTest, SynthesisPairsCrossClasses) {
  const std::size_t n = 12;
  Matrix x(n, n);
  LabelVector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, i) = 1.0;
    y[i] = i % 3;
  }
  SynthesisConfig cfg;
  cfg.alpha = 0.25;
  cfg.beta = 0.0;
  cfg.count = 500;
  cfg.seed = 3;
  const Matrix out = SynthesizeOod(x, y, cfg);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    std::size_t i = n;
    std::size_t j = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (out(r, c) == 0.25) i = c;
      if (out(r, c) == 0.75) j = c;
    }
    ASSERT_LT(i, n);
    ASSERT_LT(j, n);
    ASSERT_NE(y[i], y[j]);
  }
}

TEST(SelectionTest, SynthesisErrors) {
  SynthesisConfig cfg;
  EXPECT_EQ(CodeOf([&] {
              SynthesizeOod(Matrix::FromRows({{1}, {2}}), {0, 0}, cfg);
            }),
            ErrorCode::kSingleClassDataset);
  EXPECT_EQ(CodeOf([&] { SynthesizeOod(Matrix::FromRows({{1}}), {0}, cfg); }),
            ErrorCode::kTooFewSamples);
  EXPECT_EQ(CodeOf([&] {
              SynthesizeOod(Matrix::FromRows({{1}, {2}}), {0}, cfg);
            }),
            ErrorCode::kDimensionMismatch);
  cfg.alpha = 1.5;
  EXPECT_EQ(CodeOf([&] { cfg.Validate(); }), ErrorCode::kInvalidConfig);
  cfg.alpha = 0.3;
  cfg.beta = -1;
  EXPECT_EQ(CodeOf([&] { cfg.Validate(); }), ErrorCode::kInvalidConfig);
  cfg.pair_policy = PairPolicy::kAny;
  cfg.beta = 0;
  EXPECT_NO_THROW(SynthesizeOod(Matrix::FromRows({{1}, {2}}), {0, 0}, cfg));
}

TEST(SelectionTest, DefaultSynthesisConfig) {
  EXPECT_EQ(DefaultSynthesisConfig(1000).beta, 0.8);
  EXPECT_EQ(DefaultSynthesisConfig(10).beta, 0.0);
  EXPECT_EQ(DefaultSynthesisConfig(10).alpha, 0.3);
  EXPECT_EQ(DefaultSynthesisConfig(10).val_size, 100u);
}

TEST(SelectionTest, ValidationRows) {
  const auto all = SampleValidationRows(5, 100, 1);
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  const auto some = SampleValidationRows(1000, 100, 1);
  ASSERT_EQ(some.size(), 100u);
  EXPECT_TRUE(std::is_sorted(some.begin(), some.end()));
  EXPECT_EQ(std::adjacent_find(some.begin(), some.end()), some.end());
  EXPECT_EQ(some.back() < 1000, true);
  EXPECT_EQ(some, SampleValidationRows(1000, 100, 1));
  EXPECT_NE(some, SampleValidationRows(1000, 100, 2));
}

// One-hot ID features against an orthonormal prototype basis: ID logits are
// one-hot, synthetic logits (alpha = 0.5, beta = 0) have two entries of
// 1/sqrt(2). The OOD tail mean is largest relative to ID at N = 2.
TEST(SelectionTest, PipelineOneHotConstruction) {
  const std::size_t k = 6;
  Matrix features(60, k);
  LabelVector labels(60);
  for (std::size_t i = 0; i < 60; ++i) {
    labels[i] = i % k;
    features(i, i % k) = 1.0;
  }
  Matrix basis(k, k);
  for (std::size_t c = 0; c < k; ++c) basis(c, c) = 1.0;
  SynthesisConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 0.0;
  cfg.seed = 4;
  const PipelineResult res = SelectNPipelineDetailed(
      features, labels, PrototypeSet(basis, true), 1.0, cfg);
  EXPECT_EQ(res.selection.n_star, 2u);
  EXPECT_EQ(res.validation_rows.size(), 60u);
  for (std::size_t r = 0; r < res.ood_logits.rows(); ++r) {
    std::vector<double> s(res.ood_logits.row(r).begin(),
                          res.ood_logits.row(r).end());
    std::sort(s.begin(), s.end(), std::greater<>());
    ASSERT_NEAR(s[0], std::sqrt(0.5), 1e-15);
    ASSERT_NEAR(s[1], std::sqrt(0.5), 1e-15);
    ASSERT_EQ(s[2], 0.0);
  }
  const double r2 = std::sqrt(0.5);
  for (std::size_t n = 2; n <= k; ++n) {
    ASSERT_NEAR(res.selection.gap_curve[n - 2],
                r2 / static_cast<double>(n - 1), 1e-15);
  }
}

TEST(SelectionTest, PipelineIsDeterministic) {
  std::mt19937_64 gen(6);
  const std::size_t k = 8;
  const Matrix features = testing::RandomMatrix(gen, 300, 16);
  LabelVector labels(300);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % k;
  const PrototypeSet protos(testing::RandomMatrix(gen, k, 16));
  SynthesisConfig cfg = DefaultSynthesisConfig(k);
  cfg.seed = 17;
  const NSelection a = SelectNPipeline(features, labels, protos, 50.0, cfg);
  const NSelection b = SelectNPipeline(features, labels, protos, 50.0, cfg);
  EXPECT_EQ(a.n_star, b.n_star);
  EXPECT_EQ(a.gap_curve, b.gap_curve);
  EXPECT_EQ(a.gap_curve.size(), k - 1);

  NRange range;
  range.n_min = 3;
  range.n_max = 5;
  const NSelection c = SelectNPipeline(features, labels, protos, 50.0, cfg, range);
  EXPECT_GE(c.n_star, 3u);
  EXPECT_LE(c.n_star, 5u);
  EXPECT_EQ(c.gap_curve.size(), 3u);
}

TEST(SelectionTest, PipelineChecksLabels) {
  const PrototypeSet protos(Matrix::FromRows({{1, 0}, {0, 1}}));
  EXPECT_EQ(CodeOf([&] {
              SelectNPipeline(Matrix::FromRows({{1, 0}, {0, 1}}), {0, 2},
                              protos, 1.0, SynthesisConfig{});
            }),
            ErrorCode::kLabelOutOfRange);
}

// Property: synthetic rows stay inside the convex hull's bounding box when
// beta = 0, so unit-norm inputs give rows of norm at most 1.
TEST(SelectionTest, NoiselessSynthesisIsContracting) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = L2NormalizeRows(testing::RandomMatrix(gen, 30, 5));
    LabelVector y(30);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 3;
    SynthesisConfig cfg;
    cfg.beta = 0.0;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const Matrix out = SynthesizeOod(x, y, cfg);
    for (std::size_t r = 0; r < out.rows(); ++r) {
      ASSERT_LE(RowNorm(out.row(r)), 1.0 + 1e-12);
    }
  }
}

}  // namespace
}  // namespace oodkit
