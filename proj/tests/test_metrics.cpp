#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "meniscus/error.hpp"
#include "meniscus/metrics.hpp"
#include "oracles.hpp"

using namespace meniscus;

namespace {

RealPlane random_prob(std::mt19937_64& rng, int h, int w) { return oracle::random_plane(rng, h, w, 0.05, 0.95); }

}  // namespace

TEST(Confusion, CountsMatchCellScan) {
  std::mt19937_64 rng(3);
  const BinaryMask p = oracle::random_mask(rng, 20, 30), t = oracle::random_mask(rng, 20, 30);
  ConfusionCounts want;
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 30; ++x) {
      const bool a = p.test(y, x), b = t.test(y, x);
      want.tp += a && b;
      want.fp += a && !b;
      want.fn += !a && b;
      want.tn += !a && !b;
    }
  EXPECT_EQ(confusion(p, t), want);
  EXPECT_THROW(confusion(p, BinaryMask(20, 31)), Error);
}

TEST(Miou, IdenticalAndDisjoint) {
  std::mt19937_64 rng(5);
  const BinaryMask m = oracle::random_mask(rng, 16, 16);
  EXPECT_EQ(miou(m, m), 1.0);
  EXPECT_EQ(miou(BinaryMask(8, 8), BinaryMask(8, 8)), 1.0);
  EXPECT_EQ(miou(BinaryMask(8, 8), BinaryMask(8, 8), MiouClasses::kForegroundOnly), 1.0);
  BinaryMask a(2, 2), b(2, 2);
  a.set(0, 0, true);
  b.set(1, 1, true);
  EXPECT_EQ(miou(a, b, MiouClasses::kForegroundOnly), 0.0);
  EXPECT_DOUBLE_EQ(miou(a, b), (0.0 + 2.0 / 4.0) / 2.0);
}

TEST(PrecisionRecall, EdgeCases) {
  const auto none = precision_recall_f1(ConfusionCounts{0, 0, 0, 10});
  EXPECT_EQ(none.precision, 1.0);
  EXPECT_EQ(none.recall, 1.0);
  EXPECT_EQ(none.f1, 1.0);
  const auto miss = precision_recall_f1(ConfusionCounts{0, 0, 4, 6});
  EXPECT_EQ(miss.recall, 0.0);
  const auto half = precision_recall_f1(ConfusionCounts{2, 2, 2, 0});
  EXPECT_DOUBLE_EQ(half.f1, 0.5);
}

TEST(Losses, IdenticalInputsGiveZero) {
  std::mt19937_64 rng(9);
  const BinaryMask m = oracle::random_mask(rng, 24, 24);
  const RealPlane p = to_probability(m);
  EXPECT_NEAR(bce_loss(p, m), 0.0, 1e-6);
  EXPECT_NEAR(dice_loss(p, m), 0.0, 1e-12);
  EXPECT_EQ(dice_loss(m, m), 0.0);
  EXPECT_NEAR(matrix_norm_loss(p, m), 0.0, 1e-12);
  EXPECT_NEAR(combined_loss(p, m).combined, 0.0, 1e-6);
}

TEST(Losses, DiceOfTwoEmptyMasksIsZeroLoss) {
  const BinaryMask e(8, 8);
  EXPECT_EQ(dice_loss(e, e), 0.0);
  BinaryMask one(8, 8);
  one.set(0, 0, true);
  EXPECT_DOUBLE_EQ(dice_loss(e, one), 1.0 - 1.0 / 2.0);
}

TEST(Losses, BceClampsSaturatedPredictions) {
  BinaryMask t(1, 2);
  t.set(0, 0, true);
  RealPlane p(1, 2);
  p << 0.0, 1.0;
  EXPECT_NEAR(bce_loss(p, t), -std::log(kBceEpsilon), 1e-6);
  EXPECT_TRUE(std::isfinite(bce_loss(p, t)));
}

TEST(Losses, BceGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    RealPlane p = random_prob(rng, 6, 7);
    const BinaryMask y = oracle::random_mask(rng, 6, 7);
    const double n = static_cast<double>(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double yi = y.data().data()[i] ? 1.0 : 0.0, pi = p.data()[i];
      const double analytic = -(yi / pi - (1 - yi) / (1 - pi)) / n;
      const double h = 1e-6;
      RealPlane a = p, b = p;
      a.data()[i] += h;
      b.data()[i] -= h;
      EXPECT_NEAR((bce_loss(a, y) - bce_loss(b, y)) / (2 * h), analytic, 1e-5);
    }
  }
}

TEST(Losses, DiceGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    RealPlane p = random_prob(rng, 5, 8);
    const BinaryMask y = oracle::random_mask(rng, 5, 8);
    const double s = 1.0;
    double sp = 0, st = 0, inter = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      sp += p.data()[i];
      st += y.data().data()[i] ? 1 : 0;
      inter += (y.data().data()[i] ? 1 : 0) * p.data()[i];
    }
    const double den = sp + st + s;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double yi = y.data().data()[i] ? 1.0 : 0.0;
      const double analytic = -(2 * yi * den - (2 * inter + s)) / (den * den);
      const double h = 1e-6;
      RealPlane a = p, b = p;
      a.data()[i] += h;
      b.data()[i] -= h;
      EXPECT_NEAR((dice_loss(a, y) - dice_loss(b, y)) / (2 * h), analytic, 1e-5);
    }
  }
}

TEST(Losses, MatrixNormMatchesEigensolve) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const RealPlane a = oracle::random_plane(rng, 16, 16, 0, 1), b = oracle::random_plane(rng, 16, 16, 0, 1);
    const double want = oracle::spectral_norm((a - b).matrix());
    EXPECT_NEAR(matrix_norm_loss(a, b), want, 1e-6 * std::max(1.0, want));
  }
}

TEST(Losses, MatrixNormNonSquareAndScaling) {
  std::mt19937_64 rng(19);
  const RealPlane a = oracle::random_plane(rng, 9, 23, 0, 1), z = RealPlane::Zero(9, 23);
  EXPECT_NEAR(matrix_norm_loss(a, z), oracle::spectral_norm(a.matrix()), 1e-6);
  EXPECT_NEAR(matrix_norm_loss(RealPlane(3.0 * a), z), 3.0 * matrix_norm_loss(a, z), 1e-6);
}

TEST(Losses, CombinedIsWeightedSum) {
  std::mt19937_64 rng(23);
  const RealPlane p = random_prob(rng, 12, 12);
  const BinaryMask y = oracle::random_mask(rng, 12, 12);
  const LossBreakdown l = combined_loss(p, y);
  EXPECT_NEAR(l.combined, 0.45 * l.bce + 0.45 * l.dice + 0.1 * l.matrix, 1e-12);
  LossWeights bad;
  bad.bce = -1;
  EXPECT_THROW(combined_loss(p, y, bad), Error);
}

TEST(Csv, HeaderAndRowFieldCount) {
  EXPECT_EQ(metrics_csv_header(), "image_id,miou,precision,recall,f1,bce,dice,matrix,combined");
  const std::string row = metrics_csv_row("x", 1.0, {}, {});
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 8);
}
