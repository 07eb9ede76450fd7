// Copyright 2026 The synctrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "synctrack/nn/gradcheck.hpp"
#include "synctrack/nn/gradcheck_suite.hpp"
#include "synctrack/nn/ops.hpp"
#include "synctrack/sampling.hpp"
#include "support/oracles.hpp"

namespace synctrack::sampling {
namespace {

using Td = nn::Tensor<double>;

std::vector<Vec3> uniform_cloud(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

PointCloud cloud_of(const std::vector<Vec3>& pts) {
  PointCloud c;
  c.points = pts;
  return c;
}

const std::vector<Vec3> kSquare{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};

TEST(ResizeToCount, ExactCountIsIdentity) {
  const PointCloud c = cloud_of({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}, {0, 0, 0}});
  for (std::uint64_t seed : {0ull, 1ull, 12345ull}) EXPECT_EQ(resize_to_count(c, 4, seed), c);
}

TEST(ResizeToCount, SinglePointIsRepeated) {
  const PointCloud out = resize_to_count(cloud_of({{1, -1, 2}}), 3, 7);
  ASSERT_EQ(out.size(), 3u);
  for (const Vec3& p : out.points) EXPECT_EQ(p, (Vec3{1, -1, 2}));
}

TEST(ResizeToCount, SeededSubsetIsFrozen) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({double(i), 0, 0});
  const PointCloud out = resize_to_count(cloud_of(pts), 5, 42);
  std::vector<double> xs;
  for (const Vec3& p : out.points) xs.push_back(p.x);
  EXPECT_EQ(xs, (std::vector<double>{1, 3, 5, 6, 9}));
  EXPECT_EQ(resize_to_count(cloud_of(pts), 5, 42), out);
}

TEST(ResizeToCount, SubsampleIsUniqueAndUpsampleKeepsOriginals) {
  std::mt19937_64 rng(1);
  PointCloud c = cloud_of(uniform_cloud(50, rng));
  c.channels = 1;
  for (std::size_t i = 0; i < 50; ++i) c.features.push_back(double(i));
  const PointCloud down = resize_to_count(c, 20, 3);
  std::set<double> ids(down.features.begin(), down.features.end());
  EXPECT_EQ(ids.size(), 20u);
  for (std::size_t i = 0; i < down.size(); ++i)
    EXPECT_EQ(down.points[i], c.points[std::size_t(down.features[i])]);

  const PointCloud up = resize_to_count(c, 80, 3);
  ASSERT_EQ(up.size(), 80u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(up.features[i], double(i));
}

TEST(ResizeToCount, EmptyCloudThrows) {
  EXPECT_THROW(resize_to_count(PointCloud{}, 4, 0), std::invalid_argument);
}

TEST(Fps, SingleSelectionIsStart) {
  EXPECT_EQ(farthest_point_sampling(kSquare, 1, 2).indices, (std::vector<std::size_t>{2}));
}

TEST(Fps, UnitSquareCorners) {
  EXPECT_EQ(farthest_point_sampling(kSquare, 2, 0).indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(farthest_point_sampling(kSquare, 3, 0).indices,
            (std::vector<std::size_t>{0, 2, 1}));
}

TEST(Fps, TooManyThrows) {
  EXPECT_THROW(farthest_point_sampling(kSquare, 5, 0), std::invalid_argument);
  EXPECT_THROW(farthest_point_sampling(kSquare, 1, 4), std::invalid_argument);
}

TEST(Fps, MatchesExhaustiveGreedyOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 9;
    auto pts = uniform_cloud(n, rng);
    // Snap to a coarse lattice so exact ties occur.
    if (trial % 2 == 0)
      for (Vec3& p : pts) p = {std::round(p.x * 2), std::round(p.y * 2), std::round(p.z * 2)};
    const std::size_t k = 1 + rng() % n;
    const std::size_t start = rng() % n;
    const auto got = farthest_point_sampling(pts, k, start).indices;
    EXPECT_EQ(got, oracle::greedy_fps(pts, k, start)) << "trial " << trial;
  }
}

TEST(Fps, SubsetUniqueStartFirstEvenWithDuplicates) {
  const std::vector<Vec3> pts(6, Vec3{1, 1, 1});
  const auto idx = farthest_point_sampling(pts, 6, 3).indices;
  EXPECT_EQ(idx, (std::vector<std::size_t>{3, 0, 1, 2, 4, 5}));
}

TEST(Fps, SpreadsBetterThanRandomSubsets) {
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(500 + trial);
    const auto pts = uniform_cloud(256, rng);
    const auto fps = farthest_point_sampling(pts, 32, 0).indices;
    std::vector<std::size_t> all(256), rnd;
    std::iota(all.begin(), all.end(), 0);
    std::sample(all.begin(), all.end(), std::back_inserter(rnd), 32, rng);
    if (oracle::min_pairwise_distance(pts, fps) >= oracle::min_pairwise_distance(pts, rnd)) ++wins;
  }
  EXPECT_GE(wins, 95);
}

TEST(Knn, SelfNeighbour) {
  std::mt19937_64 rng(4);
  const auto pts = uniform_cloud(30, rng);
  const auto idx = knn_indices(pts, pts, 1);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(idx[i], i);
}

TEST(Knn, OrderedLineAndTies) {
  const std::vector<Vec3> q{{0, 0, 0}};
  EXPECT_EQ(knn_indices(q, std::vector<Vec3>{{1, 0, 0}, {2, 0, 0}, {3, 0, 0}}, 2),
            (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(knn_indices(q, std::vector<Vec3>{{1, 0, 0}, {-1, 0, 0}}, 1),
            (std::vector<std::size_t>{0}));
  EXPECT_EQ(knn_indices(q, std::vector<Vec3>{{-1, 0, 0}, {1, 0, 0}}, 2),
            (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(knn_indices(q, std::vector<Vec3>{{1, 0, 0}}, 2), std::invalid_argument);
}

TEST(Knn, MatchesFullSort) {
  std::mt19937_64 rng(8);
  const auto refs = uniform_cloud(40, rng);
  const auto qs = uniform_cloud(10, rng);
  const auto idx = knn_indices(qs, refs, 7);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    std::vector<std::size_t> order(refs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return (refs[a] - qs[i]).norm() < (refs[b] - qs[i]).norm();
    });
    for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(idx[i * 7 + j], order[j]);
  }
}

// Per-row affine map on explicit [rel ; feats] rows, then max over a
// neighbour order given by the caller.
std::vector<double> naive_group(const std::vector<Vec3>& pts, const std::vector<double>& feats,
                                std::size_t c_in, const std::vector<std::size_t>& nb,
                                std::size_t k, const Td& w, const Td& b) {
  const std::size_t c_out = w.dim(1);
  std::vector<double> out(pts.size() * c_out, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t r = nb[i * k + j];
      const Vec3 d = pts[r] - pts[i];
      std::vector<double> row{d.x, d.y, d.z};
      for (std::size_t c = 0; c < c_in; ++c) row.push_back(feats[r * c_in + c]);
      for (std::size_t o = 0; o < c_out; ++o) {
        double acc = b[o];
        for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * w[c * c_out + o];
        out[i * c_out + o] = std::max(out[i * c_out + o], std::max(acc, 0.0));
      }
    }
  return out;
}

TEST(QueryAndGroup, TwoPointsIdentityParams) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, -2, 0.5}};
  const Td w({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const TokenSet<double> t = query_and_group<double>(pts, Td(), 2, w, Td::zeros({3}));
  const std::vector<double> got(t.feats.values().begin(), t.feats.values().end());
  EXPECT_EQ(got, (std::vector<double>{1, 0, 0.5, 0, 2, 0}));
  EXPECT_EQ(t.coords, pts);
}

TEST(QueryAndGroup, SelfGroupSeesOnlyOwnFeatures) {
  std::mt19937_64 rng(12);
  const auto pts = uniform_cloud(6, rng);
  const Td f = nn::random_tensor({6, 2}, rng, -1, 1, false);
  const Td w = nn::random_tensor({5, 4}, rng, -1, 1, false);
  const Td b = nn::random_tensor({4}, rng, -1, 1, false);
  const TokenSet<double> t = query_and_group(pts, f, 1, w, b);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t o = 0; o < 4; ++o) {
      const double pre = b[o] + f[i * 2] * w[3 * 4 + o] + f[i * 2 + 1] * w[4 * 4 + o];
      EXPECT_NEAR(t.feats[i * 4 + o], std::max(pre, 0.0), 1e-14);
    }
}

TEST(QueryAndGroup, IdenticalFeaturesAndCoordinatesGiveIdenticalRows) {
  const std::vector<Vec3> pts(5, Vec3{0.3, 0.1, -0.2});
  const Td f = Td::full({5, 3}, 0.7);
  std::mt19937_64 rng(13);
  const Td w = nn::random_tensor({6, 4}, rng, -1, 1, false);
  const TokenSet<double> t = query_and_group(pts, f, 3, w, Td::zeros({4}));
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t o = 0; o < 4; ++o) EXPECT_EQ(t.feats[i * 4 + o], t.feats[o]);
}

TEST(QueryAndGroup, MatchesRowWiseOracleUnderNeighbourPermutation) {
  std::mt19937_64 rng(14);
  const auto pts = uniform_cloud(20, rng);
  const Td f = nn::random_tensor({20, 3}, rng, -1, 1, false);
  const Td w = nn::random_tensor({6, 5}, rng, -1, 1, false);
  const Td b = nn::random_tensor({5}, rng, -1, 1, false);
  const std::size_t k = 4;
  auto nb = knn_indices(pts, pts, k);
  for (std::size_t i = 0; i < 20; ++i)
    std::shuffle(nb.begin() + std::ptrdiff_t(i * k), nb.begin() + std::ptrdiff_t((i + 1) * k), rng);
  const std::vector<double> fv(f.values().begin(), f.values().end());
  const auto want = naive_group(pts, fv, 3, nb, k, w, b);
  const TokenSet<double> t = query_and_group(pts, f, k, w, b);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.feats[i], want[i], 1e-13);
}

TEST(QueryAndGroup, SeparateQueriesUseReferenceNeighbourhoods) {
  std::mt19937_64 rng(15);
  const auto refs = uniform_cloud(12, rng);
  const std::vector<Vec3> qs{refs[3], refs[7]};
  const Td f = nn::random_tensor({12, 2}, rng, -1, 1, false);
  const Td w = nn::random_tensor({5, 3}, rng, -1, 1, false);
  const Td b = nn::random_tensor({3}, rng, -1, 1, false);
  const TokenSet<double> full = query_and_group(refs, f, 4, w, b);
  const TokenSet<double> sub = query_and_group<double>(qs, refs, f, 4, w, b);
  for (std::size_t o = 0; o < 3; ++o) {
    EXPECT_DOUBLE_EQ(sub.feats[o], full.feats[3 * 3 + o]);
    EXPECT_DOUBLE_EQ(sub.feats[3 + o], full.feats[7 * 3 + o]);
  }
}

TEST(QueryAndGroup, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(16);
  const auto pts = uniform_cloud(8, rng);
  const auto r = nn::finite_diff_gradcheck(
      [&](const std::vector<Td>& in) {
        return nn::random_projection(query_and_group(pts, in[0], 3, in[1], in[2]).feats, 3);
      },
      {nn::random_tensor({8, 2}, rng, -1, 1), nn::random_tensor({5, 4}, rng, -1, 1),
       nn::random_tensor({4}, rng, 0.2, 1)});
  EXPECT_LT(r.max_rel_error, 1e-4);
}

}  // namespace
}  // namespace synctrack::sampling
