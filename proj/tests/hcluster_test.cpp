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

#include "critproc/hcluster.hpp"

#include <set>

#include "critproc/synthgen.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"
#include "ward_oracle.hpp"

namespace critproc {
namespace {

using testing::brute_force_ward;
using testing::random_matrix;

TEST(PairwiseTest, PythagoreanTriple) {
  const auto d = pairwise_sq_euclidean(Matrix{{0, 0}, {3, 4}});
  EXPECT_EQ(d(0, 1), 25.0);
  EXPECT_EQ(d(1, 0), 25.0);
  EXPECT_EQ(d(1, 1), 0.0);
}

TEST(PairwiseTest, DuplicatedRowIsZero) {
  const auto d = pairwise_sq_euclidean(Matrix{{1.5, -2}, {7, 7}, {1.5, -2}});
  EXPECT_EQ(d(0, 2), 0.0);
}

TEST(PairwiseTest, MatchesNaiveDoubleLoop) {
  Rng rng(1);
  const auto x = random_matrix(rng, 5, 4, -10, 10);
  const auto d = pairwise_sq_euclidean(x);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += std::pow(x(i, k) - x(j, k), 2);
      EXPECT_NEAR(d(i, j), s, 1e-12);
    }
}

TEST(PairwiseTest, RejectsNonFinite) {
  try {
    pairwise_sq_euclidean(Matrix{{0, 0}, {NAN, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNonFiniteInput);
  }
}

TEST(WardTest, ThreePointExample) {
  const Matrix x{{0, 0}, {0, 1}, {5, 5}};
  const auto d = ward_linkage(x);
  ASSERT_EQ(d.merges.size(), 2u);
  EXPECT_EQ(d.merges[0], (Merge{0, 1, 1.0, 2}));
  EXPECT_EQ(d.merges[1].left, 2u);
  EXPECT_EQ(d.merges[1].right, 3u);
  EXPECT_EQ(d.merges[1].size, 3u);
  // Oracle: height^2 / 2 is the SSE increase of the merge.
  const double inc = testing::cluster_sse(x, {0, 1, 2}) - testing::cluster_sse(x, {0, 1});
  EXPECT_NEAR(d.merges[1].height, std::sqrt(2.0 * inc), 1e-12);
  EXPECT_NEAR(d.merges[1].height, 7.7675, 5e-5);
}

TEST(WardTest, MatchesBruteForceOracleOnSmallInputs) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_matrix(rng, 8, 3);
    const auto d = ward_linkage(x);
    const auto oracle = brute_force_ward(x);
    ASSERT_TRUE(testing::same_merge_sequence(d, oracle)) << "trial " << trial;
    for (std::size_t k = 0; k < oracle.size(); ++k)
      EXPECT_NEAR(d.merges[k].height * d.merges[k].height / 2.0, oracle[k].sse_increase, 1e-9);
  }
}

TEST(WardTest, TieBreakUsesSmallestIds) {
  // Unit square: four equal nearest-neighbour distances.
  const auto d = ward_linkage(Matrix{{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  EXPECT_EQ(d.merges[0].left, 0u);
  EXPECT_EQ(d.merges[0].right, 1u);
  EXPECT_EQ(d.merges[1].left, 2u);
  EXPECT_EQ(d.merges[1].right, 3u);
  EXPECT_TRUE(testing::same_merge_sequence(d, brute_force_ward(Matrix{{0, 0}, {1, 0}, {0, 1}, {1, 1}})));
}

// Integer grids give exact ties in later merges (e.g. 2/3 vs 2/3 reached
// through different roundings), which must still go to the smallest ids.
TEST(WardTest, GridTiesMatchExactOracle) {
  Rng rng(77);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 3 + rng.below(6);
    Matrix x(n, 1 + rng.below(3));
    for (auto& v : x.data()) v = static_cast<double>(rng.below(3));
    EXPECT_TRUE(testing::same_merge_sequence(ward_linkage(x), brute_force_ward(x))) << "trial " << t;
  }
  // {1, 2, 2, 0, 0}: the duplicate pairs form nodes 5 and 6, after which
  // leaf 0 is 2/3 away from both. Node 5 wins.
  const auto d = ward_linkage(Matrix{{1}, {2}, {2}, {0}, {0}});
  ASSERT_EQ(d.merges.size(), 4u);
  EXPECT_EQ(d.merges[2].left, 0u);
  EXPECT_EQ(d.merges[2].right, 5u);
  EXPECT_DOUBLE_EQ(d.merges[2].height * d.merges[2].height / 2.0, 2.0 / 3.0);
}

TEST(WardTest, HeightsMonotoneAndSizesConsistent) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_matrix(rng, 60, 4);
    const auto d = ward_linkage(x);
    std::vector<std::size_t> size(d.n_leaves + d.merges.size(), 1);
    for (std::size_t k = 0; k < d.merges.size(); ++k) {
      if (k > 0) {
        EXPECT_GE(d.merges[k].height, d.merges[k - 1].height);
      }
      EXPECT_LT(d.merges[k].left, d.merges[k].right);
      EXPECT_LT(d.merges[k].right, d.n_leaves + k);
      size[d.n_leaves + k] = size[d.merges[k].left] + size[d.merges[k].right];
      EXPECT_EQ(d.merges[k].size, size[d.n_leaves + k]);
    }
    EXPECT_EQ(d.merges.back().size, 60u);
  }
}

TEST(WardTest, NeedsTwoRows) {
  EXPECT_THROW(ward_linkage(Matrix{{1, 2}}), Error);
}

std::set<std::set<std::size_t>> as_partition(const ClusterLabels& l,
                                             const std::vector<std::size_t>& original_index) {
  std::vector<std::set<std::size_t>> groups(l.k);
  for (std::size_t i = 0; i < l.labels.size(); ++i)
    groups[static_cast<std::size_t>(l.labels[i])].insert(original_index[i]);
  return {groups.begin(), groups.end()};
}

TEST(WardTest, PermutationEquivariance) {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 30;
    const auto x = random_matrix(rng, n, 3);
    std::vector<std::size_t> perm(n), ident(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::iota(ident.begin(), ident.end(), std::size_t{0});
    rng.shuffle(std::span(perm));
    const auto xp = x.select_rows(perm);
    const auto d = ward_linkage(x);
    const auto dp = ward_linkage(xp);
    for (std::size_t k = 1; k <= n; ++k)
      EXPECT_EQ(as_partition(cut_k(d, k), ident), as_partition(cut_k(dp, k), perm)) << "k=" << k;
  }
}

TEST(CutTest, ExtremesAndRange) {
  Rng rng(3);
  const auto x = random_matrix(rng, 12, 2);
  const auto d = ward_linkage(x);
  const auto one = cut_k(d, 1);
  EXPECT_EQ(one.k, 1u);
  for (int l : one.labels) EXPECT_EQ(l, 0);
  const auto all = cut_k(d, 12);
  EXPECT_EQ(all.k, 12u);
  EXPECT_EQ(std::set<int>(all.labels.begin(), all.labels.end()).size(), 12u);
  for (std::size_t bad : {std::size_t{0}, std::size_t{13}}) {
    try {
      cut_k(d, bad);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kKOutOfRange);
    }
  }
}

TEST(CutTest, RefinementChainAndExactCounts) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_matrix(rng, 40, 3);
    const auto d = ward_linkage(x);
    for (std::size_t k = 1; k <= 40; ++k) {
      const auto l = cut_k(d, k, x);
      EXPECT_EQ(l.k, k);
      for (auto s : l.sizes()) EXPECT_GE(s, 1u);
      if (k > 1) {
        EXPECT_TRUE(testing::refines(l, cut_k(d, k - 1, x)));
      }
    }
  }
}

TEST(CutTest, HeightCuts) {
  Rng rng(4);
  const auto x = random_matrix(rng, 25, 3);
  const auto d = ward_linkage(x);
  EXPECT_EQ(cut_height(d, d.merges.front().height / 2).k, 25u);
  EXPECT_EQ(cut_height(d, d.merges.back().height).k, 1u);
  for (std::size_t m = 1; m + 1 < d.merges.size(); ++m) {
    const double h = 0.5 * (d.merges[m - 1].height + d.merges[m].height);
    const auto l = cut_height(d, h);
    EXPECT_EQ(l.k, 25u - m);
    EXPECT_EQ(l, cut_k(d, 25 - m));
  }
}

TEST(CutTest, RelabelPutsHighestOutputFirst) {
  const Matrix x{{1, 1}, {1.1, 1}, {9, 9}, {9.2, 9}, {5, 5}};
  const auto d = ward_linkage(x);
  const auto l = cut_k(d, 3, x);
  EXPECT_EQ(l.labels[2], 0);
  EXPECT_EQ(l.labels[3], 0);
  EXPECT_EQ(l.labels[4], 1);
  EXPECT_EQ(l.labels[0], 2);
}

// Table 2 parameters: at k=3 the two lower-mean clusters are the ones that
// join at k=2.
TEST(CutTest, SyntheticLowerClustersMergeFirst) {
  for (std::uint64_t seed : {1, 2, 3}) {
    GenConfig cfg;
    cfg.seed = seed;
    const auto data = generate(cfg);
    const auto x = data.table.output_matrix();
    const auto d = ward_linkage(x);
    const auto three = cut_k(d, 3, x);
    const auto two = cut_k(d, 2, x);
    ASSERT_TRUE(testing::refines(three, two));
    std::vector<int> image(3);
    for (std::size_t i = 0; i < x.rows(); ++i) image[static_cast<std::size_t>(three.labels[i])] = two.labels[i];
    EXPECT_EQ(image[0], 0);
    EXPECT_EQ(image[1], 1);
    EXPECT_EQ(image[2], 1);
  }
}

TEST(ExportTest, JsonRoundTripAndDot) {
  Rng rng(6);
  const auto d = ward_linkage(random_matrix(rng, 10, 2));
  EXPECT_EQ(dendrogram_from_json(dendrogram_to_json(d)), d);
  const auto dot = dendrogram_to_dot(d);
  EXPECT_NE(dot.find("digraph"), std::string::npos);
  EXPECT_NE(dot.find("n18 -> "), std::string::npos);
  auto order = leaf_order(d);
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(order[i], i);
}

}  // namespace
}  // namespace critproc
