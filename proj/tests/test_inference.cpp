#include <gtest/gtest.h>

#include <cmath>

#include "fewshot/inference.hpp"
#include "fewshot/random.hpp"
#include "fewshot/synthetic.hpp"
#include "oracle.hpp"

using namespace fewshot;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<std::vector<double>> v;
  for (auto r : rows) v.emplace_back(r);
  return Matrix::from_rows(v, v.empty() ? 0 : v.front().size());
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = scale * synthetic::gaussian(rng);
  return m;
}

ClassRepresentationSet reps_of(const Matrix& m) {
  ClassRepresentationSet r;
  for (std::size_t i = 0; i < m.rows(); ++i) r.class_ids.push_back(fmt::format("c{}", i));
  r.vectors = m;
  return r;
}

double row_sum(const Matrix& m, std::size_t i) {
  double s = 0;
  for (double v : m.row(i)) s += v;
  return s;
}

}  // namespace

TEST(VisualRepresentation, SingleRowIsIdentity) {
  const auto v = visual_representation(mat({{0.6, 0.8}}));
  EXPECT_EQ(v, (std::vector<double>{0.6, 0.8}));
}

TEST(VisualRepresentation, MeanOfOrthogonalRows) {
  const auto v = visual_representation(mat({{1, 0}, {0, 1}}));
  EXPECT_DOUBLE_EQ(v[0], 0.5);
  EXPECT_DOUBLE_EQ(v[1], 0.5);
}

TEST(VisualRepresentation, MatchesNaiveMean) {
  Rng rng(3);
  Matrix m = random_matrix(rng, 100, 24);
  oracle::Mat rows;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    long double n = 0;
    for (double x : m.row(i)) n += x * x;
    for (double& x : m.row(i)) x /= std::sqrt(static_cast<double>(n));
    rows.emplace_back(m.row(i).begin(), m.row(i).end());
  }
  const auto got = visual_representation(m);
  const auto want = oracle::mean(rows);
  for (std::size_t d = 0; d < got.size(); ++d) EXPECT_NEAR(got[d], static_cast<double>(want[d]), 1e-6);
}

TEST(VisualRepresentation, EmptyInputRejected) {
  EXPECT_THROW(visual_representation(Matrix(0, 4)), std::invalid_argument);
  EXPECT_THROW(textual_representation(Matrix(0, 4)), std::invalid_argument);
}

TEST(TextualRepresentation, OneTemplateIdentityAndHalfNorm) {
  EXPECT_EQ(textual_representation(mat({{0.0, 1.0, 0.0}})), (std::vector<double>{0.0, 1.0, 0.0}));
  const auto v = textual_representation(mat({{1, 0}, {0, 1}}));
  EXPECT_NEAR(std::hypot(v[0], v[1]), std::sqrt(0.5), 1e-15);
}

TEST(TextualRepresentation, EightTemplatesMatchNaiveMean) {
  Rng rng(8);
  const Matrix m = random_matrix(rng, 8, 32);
  oracle::Mat rows;
  for (std::size_t i = 0; i < 8; ++i) rows.emplace_back(m.row(i).begin(), m.row(i).end());
  const auto got = textual_representation(m);
  const auto want = oracle::mean(rows);
  for (std::size_t d = 0; d < got.size(); ++d) EXPECT_NEAR(got[d], static_cast<double>(want[d]), 1e-6);
}

TEST(SimilarityMatrix, OrthonormalCase) {
  const auto s = similarity_matrix(mat({{1, 0}}), reps_of(mat({{1, 0}, {0, 1}})));
  EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.0);
}

TEST(SimilarityMatrix, ScaleInvariance) {
  Rng rng(21);
  const Matrix q = random_matrix(rng, 12, 9);
  const Matrix r = random_matrix(rng, 4, 9);
  const auto base = similarity_matrix(q, reps_of(r));
  Matrix q2 = q, r2 = r;
  for (std::size_t i = 0; i < q2.rows(); ++i)
    for (double& x : q2.row(i)) x *= 0.1 + i;
  for (std::size_t j = 0; j < r2.rows(); ++j)
    for (double& x : r2.row(j)) x *= 7.0 / (j + 1);
  const auto scaled = similarity_matrix(q2, reps_of(r2));
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < r.rows(); ++j) EXPECT_NEAR(scaled(i, j), base(i, j), 1e-12);

  const auto self = similarity_matrix(mat({{0.3, -0.2, 0.5}}), reps_of(mat({{3.0, -2.0, 5.0}})));
  EXPECT_NEAR(self(0, 0), 1.0, 1e-15);
}

TEST(SimilarityMatrix, MatchesDoubleLoopOracle) {
  Rng rng(50);
  const Matrix q = random_matrix(rng, 50, 32);
  const Matrix r = random_matrix(rng, 10, 32);
  const auto s = similarity_matrix(q, reps_of(r));
  for (std::size_t i = 0; i < 50; ++i) {
    const oracle::Vec a(q.row(i).begin(), q.row(i).end());
    for (std::size_t j = 0; j < 10; ++j) {
      const oracle::Vec b(r.row(j).begin(), r.row(j).end());
      EXPECT_NEAR(s(i, j), static_cast<double>(oracle::cosine(a, b)), 1e-6);
      EXPECT_LE(std::abs(s(i, j)), 1.0);
    }
  }
}

TEST(SimilarityMatrix, ZeroNormRowsNamed) {
  try {
    similarity_matrix(mat({{1, 0}, {0, 0}}), reps_of(mat({{1, 0}})));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "zero-norm query row 1");
  }
  try {
    similarity_matrix(mat({{1, 0}}), reps_of(mat({{0, 0}})));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "zero-norm representation row 0");
  }
  EXPECT_THROW(similarity_matrix(mat({{1, 0, 0}}), reps_of(mat({{1, 0}}))), std::invalid_argument);
}

TEST(Softmax, TwoClassUnitTemperature) {
  const auto p = softmax_rows(mat({{1, 0}}), 1.0);
  // e / (1 + e)
  EXPECT_NEAR(p(0, 0), 0.7310585786300049, 1e-12);
  EXPECT_NEAR(p(0, 1), 0.2689414213699951, 1e-12);
}

TEST(Softmax, EqualScoresUniform) {
  const auto p = softmax_rows(mat({{0.3, 0.3, 0.3, 0.3}}), 0.01);
  for (double v : p.row(0)) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, SharpTemperatureNoOverflow) {
  const auto p = softmax_rows(mat({{1, 0}}), 0.01);
  EXPECT_GT(p(0, 0), 1.0 - 1e-10);
  EXPECT_TRUE(std::isfinite(p(0, 1)));
  const auto extreme = softmax_rows(mat({{1, -1}}), 1e-4);
  EXPECT_EQ(extreme(0, 0), 1.0);
  EXPECT_EQ(extreme(0, 1), 0.0);
}

TEST(Softmax, InvalidInputsRejected) {
  EXPECT_THROW(softmax_rows(mat({{1, 0}}), 0.0), std::invalid_argument);
  EXPECT_THROW(softmax_rows(mat({{1, 0}}), -1.0), std::invalid_argument);
  EXPECT_THROW(softmax_rows(mat({{NAN, 0}}), 1.0), std::invalid_argument);
  EXPECT_THROW(softmax_rows(mat({{INFINITY, 0}}), 1.0), std::invalid_argument);
}

TEST(Softmax, RowsNormalizedProperty) {
  Rng rng(99);
  for (double tau : {0.01, 0.1, 1.0, 100.0}) {
    const auto p = softmax_rows(random_matrix(rng, 200, 7), tau);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      EXPECT_NEAR(row_sum(p, i), 1.0, 1e-6);
      for (double v : p.row(i)) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(Fuse, AverageAndMax) {
  const auto v = mat({{0.8, 0.2}});
  const auto t = mat({{0.4, 0.6}});
  const auto avg = fuse(v, t, FusionMode::avg);
  EXPECT_DOUBLE_EQ(avg(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(avg(0, 1), 0.4);
  const auto mx = fuse(v, t, FusionMode::max);
  EXPECT_DOUBLE_EQ(mx(0, 0), 0.8);
  EXPECT_DOUBLE_EQ(mx(0, 1), 0.6);
  EXPECT_EQ(predict(mx), (std::vector<std::size_t>{0}));
  const auto view = renormalized_rows(mx);
  EXPECT_NEAR(view(0, 0), 0.8 / 1.4, 1e-15);
  EXPECT_EQ(predict(view), predict(mx));
}

TEST(Fuse, IdenticalInputsAndSymmetry) {
  Rng rng(4);
  const auto a = softmax_rows(random_matrix(rng, 30, 5), 0.1);
  const auto b = softmax_rows(random_matrix(rng, 30, 5), 0.1);
  for (auto mode : {FusionMode::avg, FusionMode::max}) {
    const auto same = fuse(a, a, mode);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) EXPECT_NEAR(same(i, j), a(i, j), 1e-15);
    EXPECT_EQ(fuse(a, b, mode), fuse(b, a, mode));
  }
  const auto mx = fuse(a, b, FusionMode::max);
  for (std::size_t i = 0; i < mx.rows(); ++i) {
    EXPECT_GE(row_sum(mx, i), 1.0 - 1e-12);
    EXPECT_LE(row_sum(mx, i), 2.0);
  }
}

TEST(Fuse, MismatchesRejected) {
  EXPECT_THROW(fuse(Matrix(2, 3), Matrix(2, 4), FusionMode::avg), std::invalid_argument);
  PredictionBatch a, b;
  a.class_ids = {"x", "y"};
  b.class_ids = {"y", "x"};
  a.probabilities = b.probabilities = mat({{0.5, 0.5}});
  EXPECT_THROW(fuse(a, b, FusionMode::max), std::invalid_argument);
  b.class_ids = a.class_ids;
  a.query_positions = {1};
  b.query_positions = {2};
  EXPECT_THROW(fuse(a, b, FusionMode::max), std::invalid_argument);
  b.query_positions = {1};
  EXPECT_NO_THROW(fuse(a, b, FusionMode::max));
}

TEST(Predict, ArgmaxWithLowestSlotTies) {
  EXPECT_EQ(predict(mat({{0.1, 0.9}})), (std::vector<std::size_t>{1}));
  EXPECT_EQ(predict(mat({{0.5, 0.5}})), (std::vector<std::size_t>{0}));
  EXPECT_EQ(predict(mat({{0.2, 0.4, 0.4}})), (std::vector<std::size_t>{1}));
}

TEST(Predict, TemperatureInvariantOnTieFreeRows) {
  Rng rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_matrix(rng, 10, 6, 0.3);
    const auto base = predict(s);
    for (double tau : {0.01, 0.5, 1.0, 100.0}) EXPECT_EQ(predict(softmax_rows(s, tau)), base);
  }
}

TEST(LogSoftmax, MatchesLogOfSoftmax) {
  Rng rng(17);
  const auto s = random_matrix(rng, 50, 6, 0.5);
  for (double tau : {0.5, 1.0, 10.0}) {
    const auto p = softmax_rows(s, tau);
    const auto lp = log_softmax_rows(s, tau);
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (std::size_t j = 0; j < s.cols(); ++j) EXPECT_NEAR(std::exp(lp(i, j)), p(i, j), 1e-12);
    EXPECT_EQ(predict(lp), predict(s));
  }
  EXPECT_THROW(log_softmax_rows(s, 0.0), std::invalid_argument);
}

TEST(LogSoftmax, SaturatedTopEntryKeepsPrecision) {
  // exp(-40) ~ 4.2e-18: p rounds to 1.0 but log p does not round to 0.
  const auto lp = log_softmax_rows(mat({{0.4, 0.0}}), 0.01);
  EXPECT_EQ(softmax_rows(mat({{0.4, 0.0}}), 0.01)(0, 0), 1.0);
  EXPECT_NEAR(lp(0, 0), -std::exp(-40.0), 1e-30);
  EXPECT_NEAR(lp(0, 1), -40.0, 1e-12);
}

TEST(FuseLog, ResolvesSaturatedDisagreement) {
  // Visual is confident in slot 0, textual (more so) in slot 1. Both tops
  // round to 1.0 as probabilities, so only the log domain sees the order.
  const auto sv = mat({{0.40, 0.0}});
  const auto st = mat({{0.0, 0.45}});
  const auto pv = softmax_rows(sv, 0.01), pt = softmax_rows(st, 0.01);
  const auto lv = log_softmax_rows(sv, 0.01), lt = log_softmax_rows(st, 0.01);
  EXPECT_EQ(predict(fuse(pv, pt, FusionMode::max)), (std::vector<std::size_t>{0}));  // tie in double
  EXPECT_EQ(predict(fuse_log(lv, lt, FusionMode::max)), (std::vector<std::size_t>{1}));
  EXPECT_EQ(predict(fuse_log(lv, lt, FusionMode::avg)), (std::vector<std::size_t>{1}));
}

TEST(FuseLog, AgreesWithProbabilityDomain) {
  Rng rng(6);
  const auto a = random_matrix(rng, 40, 5, 0.3), b = random_matrix(rng, 40, 5, 0.3);
  for (auto mode : {FusionMode::max, FusionMode::avg}) {
    const auto p = fuse(softmax_rows(a, 1.0), softmax_rows(b, 1.0), mode);
    const auto lp = fuse_log(log_softmax_rows(a, 1.0), log_softmax_rows(b, 1.0), mode);
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) {
        const double scale = mode == FusionMode::avg ? 2.0 : 1.0;
        EXPECT_NEAR(std::exp(lp(i, j)), scale * p(i, j), 1e-12);
      }
    EXPECT_EQ(predict(lp), predict(p));
  }
  EXPECT_THROW(fuse_log(Matrix(1, 2), Matrix(2, 2), FusionMode::avg), std::invalid_argument);
}
