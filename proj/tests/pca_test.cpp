// Copyright 2026 The critproc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "critproc/pca.hpp"

#include "critproc/synthgen.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace critproc {
namespace {

using testing::random_matrix;

void expect_orthonormal(const Matrix& c, double tol) {
  for (std::size_t a = 0; a < c.rows(); ++a)
    for (std::size_t b = 0; b < c.rows(); ++b) {
      double dot = 0.0;
      for (std::size_t k = 0; k < c.cols(); ++k) dot += c(a, k) * c(b, k);
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, tol);
    }
}

TEST(PcaTest, CollinearPoints) {
  const Matrix x{{0, 0}, {1, 1}, {2, 2}, {5, 5}};
  const auto m = pca_fit(x, 2);
  EXPECT_NEAR(m.components(0, 0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m.components(0, 1), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m.explained_variance[1], 0.0, 1e-12);
  EXPECT_GT(m.explained_variance[0], 0.0);
}

TEST(PcaTest, IdenticalRowsHaveNoVariance) {
  const Matrix x{{3, 1, 4}, {3, 1, 4}, {3, 1, 4}, {3, 1, 4}};
  const auto m = pca_fit(x, 3);
  for (double v : m.explained_variance) EXPECT_EQ(v, 0.0);
  expect_orthonormal(m.components, 1e-12);
}

TEST(PcaTest, FullRankRoundTrip) {
  Rng rng(10);
  const auto x = random_matrix(rng, 20, 5, -3, 3);
  const auto m = pca_fit(x, 5);
  const auto back = pca_reconstruct(m, pca_transform(m, x));
  for (std::size_t i = 0; i < x.data().size(); ++i) EXPECT_NEAR(back.data()[i], x.data()[i], 1e-8);
}

TEST(PcaTest, MeanRowMapsToOrigin) {
  Rng rng(12);
  const auto x = random_matrix(rng, 15, 4);
  const auto m = pca_fit(x, 3);
  Matrix mean_row(1, 4);
  for (std::size_t c = 0; c < 4; ++c) mean_row(0, c) = m.mean[c];
  const auto scores = pca_transform(m, mean_row);
  for (double v : scores.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(PcaTest, ScoreVarianceEqualsExplainedVariance) {
  Rng rng(13);
  const auto x = random_matrix(rng, 50, 6, -5, 5);
  const auto m = pca_fit(x, 4);
  const auto s = pca_transform(m, x);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto col = s.column(k);
    double mean = 0.0, var = 0.0;
    for (double v : col) mean += v;
    mean /= 50.0;
    for (double v : col) var += (v - mean) * (v - mean);
    EXPECT_NEAR(var / 50.0, m.explained_variance[k], 1e-8);
  }
}

TEST(PcaTest, PropertiesOnRandomMatrices) {
  Rng rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.below(30), p = 1 + rng.below(8);
    const auto x = random_matrix(rng, n, p, -2, 2);
    const std::size_t q = std::min(n - 1, p);
    const auto m = pca_fit(x, q);
    expect_orthonormal(m.components, 1e-8);
    for (std::size_t k = 0; k < q; ++k) {
      EXPECT_GE(m.explained_variance[k], 0.0);
      if (k > 0) {
        EXPECT_LE(m.explained_variance[k], m.explained_variance[k - 1]);
      }
      // sign convention
      double best = 0.0;
      for (std::size_t c = 0; c < p; ++c)
        if (std::abs(m.components(k, c)) > std::abs(best)) best = m.components(k, c);
      EXPECT_GT(best, 0.0);
    }
    if (q == p) {
      double trace = 0.0;
      for (std::size_t c = 0; c < p; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
        mean /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
        trace += var / static_cast<double>(n);
      }
      double total = 0.0;
      for (double v : m.explained_variance) total += v;
      EXPECT_NEAR(total, trace, 1e-8);
    }
  }
}

TEST(PcaTest, SyntheticOutputsToThreeDimensions) {
  const auto data = generate(GenConfig{});
  const auto x = data.table.output_matrix();
  ASSERT_EQ(x.rows(), 603u);
  ASSERT_EQ(x.cols(), 15u);
  const auto m = pca_fit(x, 3);
  const auto s = pca_transform(m, x);
  EXPECT_EQ(s.rows(), 603u);
  EXPECT_EQ(s.cols(), 3u);
}

TEST(PcaTest, Errors) {
  const Matrix x{{1, 2}, {3, 4}, {5, 7}};
  EXPECT_THROW(pca_fit(x, 0), Error);
  EXPECT_THROW(pca_fit(x, 3), Error);
  EXPECT_THROW(pca_fit(Matrix{{1, 2}}, 1), Error);
  const auto m = pca_fit(x, 1);
  try {
    pca_transform(m, Matrix{{1, 2, 3}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDimensionMismatch);
  }
}

}  // namespace
}  // namespace critproc
