#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <random>
#include <sstream>

#include "meniscus/error.hpp"
#include "meniscus/stats.hpp"
#include "oracles.hpp"

using namespace meniscus;

namespace {

RaterTable table(const Eigen::MatrixXd& v) {
  RaterTable t;
  t.values = v;
  return t;
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(10, 3);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(Anova, MatchesSumsOfSquaresOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dn(3, 30), dk(2, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dn(rng), k = dk(rng);
    Eigen::MatrixXd x = oracle::random_plane(rng, n, k, 0, 50).matrix();
    const auto got = anova_two_way(table(x));
    const auto want = oracle::anova(x);
    EXPECT_NEAR(got.msr, want.msr, 1e-10 * std::max(1.0, want.msr));
    EXPECT_NEAR(got.msc, want.msc, 1e-10 * std::max(1.0, want.msc));
    EXPECT_NEAR(got.mse, want.mse, 1e-10 * std::max(1.0, want.mse));
    const auto ic = icc(table(x));
    const auto [c1, c2] = oracle::icc(x);
    ASSERT_TRUE(ic.c1 && ic.c2);
    EXPECT_NEAR(*ic.c1, c1, 1e-10);
    EXPECT_NEAR(*ic.c2, c2, 1e-10);
  }
}

TEST(Icc, PerfectAgreementIsOne) {
  std::mt19937_64 rng(2);
  const auto v = random_vec(rng, 20);
  Eigen::MatrixXd x(20, 3);
  for (int i = 0; i < 20; ++i) x.row(i).setConstant(v[i]);
  const auto ic = icc(table(x));
  EXPECT_EQ(*ic.c1, 1.0);
  EXPECT_EQ(*ic.c2, 1.0);
}

TEST(Icc, UndefinedForConstantTable) {
  const auto ic = icc(table(Eigen::MatrixXd::Constant(5, 2, 4.0)));
  EXPECT_FALSE(ic.c1.has_value());
  EXPECT_FALSE(ic.c2.has_value());
}

TEST(Icc, RejectsTooSmallTables) {
  EXPECT_THROW(icc(table(Eigen::MatrixXd::Zero(1, 3))), Error);
  EXPECT_THROW(icc(table(Eigen::MatrixXd::Zero(5, 1))), Error);
}

TEST(Correlation, PearsonSpearmanLinregMatchOracles) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + trial % 40;
    const auto x = random_vec(rng, n), noise = random_vec(rng, n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 0.7 * x[i] + 0.5 * noise[i];
    EXPECT_NEAR(pearson(x, y).r, oracle::pearson(x, y), 1e-10);
    EXPECT_NEAR(spearman(x, y).r, oracle::spearman_no_ties(x, y), 1e-10);
    const auto [slope, intercept, r2] = oracle::linreg(x, y);
    const LinearFit f = linreg(x, y);
    EXPECT_NEAR(f.slope, slope, 1e-10);
    EXPECT_NEAR(f.intercept, intercept, 1e-9);
    EXPECT_NEAR(f.r2, r2, 1e-10);
  }
}

TEST(Correlation, PValueMatchesStudentT) {
  std::mt19937_64 rng(4);
  const auto x = random_vec(rng, 30), y = random_vec(rng, 30);
  const Correlation c = pearson(x, y);
  const double df = 28, t = c.r * std::sqrt(df / (1 - c.r * c.r));
  boost::math::students_t dist(df);
  EXPECT_NEAR(c.p, 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 1e-10);
}

TEST(Correlation, PerfectMonotoneIsExactlyOne) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6}, y{2, 4, 6, 8, 10, 12}, z{1, 8, 27, 64, 125, 216};
  EXPECT_EQ(pearson(x, y).r, 1.0);
  EXPECT_EQ(pearson(x, y).p, 0.0);
  EXPECT_EQ(spearman(x, z).r, 1.0);
  std::vector<double> rev(y.rbegin(), y.rend());
  EXPECT_EQ(spearman(x, rev).r, -1.0);
}

TEST(Correlation, SpearmanWithTiesUsesMidRanks) {
  const std::vector<double> x{1, 2, 2, 3, 4}, y{1, 3, 2, 4, 5};
  const auto rx = mid_ranks(x), ry = mid_ranks(y);
  EXPECT_NEAR(spearman(x, y).r, oracle::pearson(rx, ry), 1e-12);
}

TEST(Ranks, TiesShareAverage) {
  const std::vector<double> v{3, 1, 3, 2, 3};
  EXPECT_EQ(mid_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
}

TEST(SpecialFunctions, IncompleteBetaAndTailAgreeWithBoost) {
  for (double a : {0.5, 1.0, 2.5, 14.0})
    for (double b : {0.5, 3.0, 20.0})
      for (double x : {0.0, 0.01, 0.3, 0.5, 0.9, 1.0})
        EXPECT_NEAR(incomplete_beta(a, b, x), boost::math::ibeta(a, b, x), 1e-10) << a << ' ' << b << ' ' << x;
  for (double df : {1.0, 4.0, 30.0, 200.0})
    for (double t : {0.0, 0.5, 2.0, 7.0}) {
      boost::math::students_t dist(df);
      EXPECT_NEAR(student_t_two_sided_p(t, df), 2 * boost::math::cdf(boost::math::complement(dist, t)), 1e-10);
      EXPECT_EQ(student_t_two_sided_p(-t, df), student_t_two_sided_p(t, df));
    }
}

TEST(Acc, BoundaryIsInclusive) {
  const std::vector<double> truth{10, 10, 10, 10};
  const std::vector<double> measured{13, 7, 14, 10.5};
  EXPECT_DOUBLE_EQ(acc_tmh(measured, truth), 0.75);
  EXPECT_EQ(acc_tmh(std::vector<double>{14}, std::vector<double>{10}), 0.0);
  EXPECT_EQ(acc_tmh(std::vector<double>{13}, std::vector<double>{10}), 1.0);
  EXPECT_THROW(acc_tmh(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST(Linreg, ConstantResponseHasZeroR2) {
  const std::vector<double> x{1, 2, 3, 4}, y{5, 5, 5, 5};
  const LinearFit f = linreg(x, y);
  EXPECT_EQ(f.slope, 0.0);
  EXPECT_EQ(f.intercept, 5.0);
  EXPECT_EQ(f.r2, 0.0);
}

TEST(BlandAltman, LimitsAndPoints) {
  const std::vector<double> a{10, 12, 11, 15}, b{9, 12, 13, 14};
  const BlandAltman ba = bland_altman(a, b);
  EXPECT_DOUBLE_EQ(ba.mean_diff, 0.0);
  const double sd = std::sqrt((1 + 0 + 4 + 1) / 3.0);
  EXPECT_NEAR(ba.sd_diff, sd, 1e-12);
  EXPECT_NEAR(ba.upper_loa, 1.96 * sd, 1e-12);
  EXPECT_NEAR(ba.lower_loa, -1.96 * sd, 1e-12);
  ASSERT_EQ(ba.points.size(), 4u);
  EXPECT_EQ(ba.points[2], std::make_pair(12.0, -2.0));
  EXPECT_EQ(ba.pct_within, 1.0);
}

TEST(RaterCsv, ParsesWithAndWithoutSubjectColumn) {
  std::istringstream with("subject,r1,r2\na,1,2\nb,3,4\n");
  const RaterTable t = read_rater_csv(with);
  EXPECT_EQ(t.rater_ids, (std::vector<std::string>{"r1", "r2"}));
  EXPECT_EQ(t.subject_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.values(1, 0), 3.0);
  std::istringstream without("r1,r2,r3\n1,2,3\n4,5,6\n");
  const RaterTable u = read_rater_csv(without);
  EXPECT_EQ(u.values.cols(), 3);
  EXPECT_EQ(u.subject_ids.front(), "1");
  std::istringstream bad("r1,r2\n1,x\n");
  EXPECT_THROW(read_rater_csv(bad), Error);
}

TEST(Report, AgreementJsonCarriesAllFields) {
  std::mt19937_64 rng(5);
  const auto t = random_vec(rng, 25);
  auto m = t;
  for (auto& v : m) v += 0.5;
  const AgreementReport r = agreement_report(m, t);
  EXPECT_EQ(r.acc, 1.0);
  EXPECT_NEAR(r.regression.slope, 1.0, 1e-12);
  EXPECT_NEAR(r.bland_altman.mean_diff, 0.5, 1e-12);
  const auto doc = to_json(r);
  for (const char* key : {"icc_c1", "icc_c2", "pearson_r", "spearman_rho", "acc", "regression", "bland_altman", "n"})
    EXPECT_TRUE(doc.contains(key)) << key;
  std::ostringstream svg;
  write_bland_altman_svg(svg, r.bland_altman);
  EXPECT_NE(svg.str().find("<svg"), std::string::npos);
}
