#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "meniscus/edge.hpp"
#include "meniscus/error.hpp"
#include "oracles.hpp"

using namespace meniscus;

TEST(Kernels, EdoSumsToMinusFourAndFoToOne) {
  for (int k = 3; k <= 21; k += 2) {
    const Kernel edo = build_edo(k);
    EXPECT_DOUBLE_EQ(edo.weights().sum(), -4.0) << k;
    EXPECT_DOUBLE_EQ(edo(k / 2, k / 2), k * k - 5.0);
    EXPECT_DOUBLE_EQ(edo(0, 0), -1.0);
    const Kernel fo = build_fo(k);
    EXPECT_NEAR(fo.weights().sum(), 1.0, 1e-15) << k;
    EXPECT_DOUBLE_EQ(fo(k / 2, 0), 1.0 / k);
    EXPECT_DOUBLE_EQ(fo.weights().row(0).cwiseAbs().sum(), 0.0);
  }
}

TEST(Kernels, RejectEvenOrTinySizes) {
  EXPECT_THROW(build_edo(4), Error);
  EXPECT_THROW(build_fo(1), Error);
  EXPECT_THROW(Kernel(Eigen::MatrixXd::Ones(3, 5)), Error);
  EdgeConfig cfg;
  cfg.k1 = 8;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Kernels, TextFormOneRowPerLine) {
  std::ostringstream out;
  write_kernel_text(out, build_fo(3));
  std::istringstream in(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(Reflect, MatchesBounceOracle) {
  for (int n : {1, 2, 3, 7})
    for (int i = -20; i < 30; ++i) EXPECT_EQ(reflect_index(i, n), oracle::mirror(i, n)) << i << " " << n;
}

TEST(Convolve, MatchesNaiveOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> half(1, 7);
  std::uniform_real_distribution<double> w(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const RealPlane img = oracle::random_plane(rng, 32, 32);
    const int k = 2 * half(rng) + 1;
    Eigen::MatrixXd weights(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) weights(i, j) = w(rng);
    const RealPlane got = convolve(img, Kernel(weights));
    const RealPlane want = oracle::convolve(img, weights);
    EXPECT_LE((got - want).abs().maxCoeff(), 1e-9) << "trial " << trial << " k " << k;
  }
}

TEST(Convolve, IsATrueConvolution) {
  RealPlane delta = RealPlane::Zero(9, 9);
  delta(4, 4) = 1.0;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
  w(0, 0) = 1.0;  // an impulse reproduces the kernel around it, unflipped
  const RealPlane out = convolve(delta, Kernel(w));
  EXPECT_DOUBLE_EQ(out(3, 3), 1.0);
  EXPECT_DOUBLE_EQ(out.sum(), 1.0);
}

TEST(Convolve, BitwiseIdenticalAcrossThreadCounts) {
  std::mt19937_64 rng(12);
  const RealPlane img = oracle::random_plane(rng, 61, 47);
  const Kernel k = build_edo(13);
  const RealPlane one = convolve(img, k, 1);
  for (unsigned t : {2u, 3u, 7u, 64u}) EXPECT_TRUE((convolve(img, k, t) == one).all()) << t;
}

TEST(Convolve, KernelLargerThanReflectableExtentFails) {
  EXPECT_THROW(convolve(RealPlane::Ones(3, 3), build_edo(9)), Error);
}

TEST(EdgeEnhance, FlatImageRespondsWithMinusFourTimesIntensity) {
  const RealPlane out = edge_enhance(RealPlane::Constant(40, 40, 90.0));
  EXPECT_LE((out + 360.0).abs().maxCoeff(), 1e-9);
}

TEST(EdgeEnhance, LumaWeights) {
  RasterImage img(1, 1, 3);
  img.channel(0)(0, 0) = 100;
  img.channel(1)(0, 0) = 50;
  img.channel(2)(0, 0) = 10;
  EXPECT_NEAR(to_gray(img)(0, 0), 0.299 * 100 + 0.587 * 50 + 0.114 * 10, 1e-12);
  EXPECT_EQ(to_gray(RasterImage(2, 2, 1, 9))(1, 1), 9.0);
}

TEST(EdgeEnhance, BrightThinBandHasPositiveResponse) {
  RealPlane img = RealPlane::Constant(64, 64, 90.0);
  img.middleRows(30, 6).setConstant(150.0);
  const RealPlane out = edge_enhance(img);
  for (int y = 30; y < 36; ++y) EXPECT_GT(out(y, 32), 0.0) << y;
  EXPECT_LT(out(10, 32), 0.0);
  EXPECT_LT(out(29, 32), 0.0);
  EXPECT_LT(out(36, 32), 0.0);
}
