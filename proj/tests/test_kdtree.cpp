#include <gtest/gtest.h>

#include <random>

#include "meniscus/error.hpp"
#include "meniscus/kdtree.hpp"
#include "oracles.hpp"

using namespace meniscus;

namespace {

void expect_matches_oracle(const std::vector<Eigen::Vector2d>& pts, const Eigen::Vector2d& q, std::size_t k) {
  const KdTree2<double> tree(pts);
  const auto got = tree.nearest(q, k);
  const auto want = oracle::knn(pts, q, k);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].index, want[i].first);
    EXPECT_EQ(got[i].squared_distance, want[i].second);
  }
}

}  // namespace

TEST(KdTree, MatchesExhaustiveSearchOnRandomClouds) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> n(1, 400), kk(1, 20);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Eigen::Vector2d> pts(static_cast<std::size_t>(n(rng)));
    for (auto& p : pts) p = {u(rng), u(rng)};
    expect_matches_oracle(pts, {u(rng), u(rng)}, static_cast<std::size_t>(kk(rng)));
  }
}

TEST(KdTree, BreaksDistanceTiesByIndexOnIntegerGrids) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> c(0, 6), kk(1, 30);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Eigen::Vector2d> pts(120);
    for (auto& p : pts) p = Eigen::Vector2d(c(rng), c(rng));  // many duplicates and equal distances
    expect_matches_oracle(pts, Eigen::Vector2d(c(rng), c(rng)), static_cast<std::size_t>(kk(rng)));
  }
}

TEST(KdTree, KLargerThanCloudReturnsEverything) {
  const std::vector<Eigen::Vector2d> pts{{0, 0}, {1, 0}, {0, 2}};
  EXPECT_EQ(KdTree2<double>(pts).nearest({0, 0}, 10).size(), 3u);
  EXPECT_TRUE(KdTree2<double>(pts).nearest({0, 0}, 0).empty());
}

TEST(KdTree, FilterAndRadiusAreRespected) {
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(i, 0);
  const KdTree2<double> tree(pts);
  const auto odd = tree.nearest({10, 0}, 3, [](std::size_t i) { return i % 2 == 1; });
  ASSERT_EQ(odd.size(), 3u);
  EXPECT_EQ(odd[0].index, 9u);
  EXPECT_EQ(odd[1].index, 11u);
  EXPECT_EQ(odd[2].index, 7u);
  const auto near = tree.nearest({10, 0}, 50, [](std::size_t) { return true; }, 4.0);
  EXPECT_EQ(near.size(), 5u);  // distances 0, 1, 1, 2, 2
}

TEST(KdTree, EmptyCloudIsAnError) {
  EXPECT_THROW(KdTree2<double>(std::vector<Eigen::Vector2d>{}), Error);
}

TEST(KdTree, FloatScalarWorks) {
  std::vector<Eigen::Vector2f> pts{{0, 0}, {3, 4}, {1, 1}};
  const auto r = KdTree2<float>(pts).nearest({3, 3}, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].index, 1u);
}
