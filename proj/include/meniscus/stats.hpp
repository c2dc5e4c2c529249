#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace meniscus {

/// n subjects (rows) by k raters (columns).
struct RaterTable {
  Eigen::MatrixXd values;
  std::vector<std::string> subject_ids;
  std::vector<std::string> rater_ids;

  void validate() const;
};

/// Header row holds rater ids. A leading "subject"/"subject_id"/"id" column,
/// when present, supplies subject ids; otherwise rows are numbered from 1.
RaterTable read_rater_csv(std::istream& in);

struct AnovaDecomposition {
  double msr = 0, msc = 0, mse = 0;
};

/// Two-way ANOVA mean squares for rows (subjects), columns (raters) and
/// residual error.
AnovaDecomposition anova_two_way(const RaterTable& t);

struct IccResult {
  std::optional<double> c1;  // single rater, absolute agreement
  std::optional<double> c2;  // mean of k raters
  AnovaDecomposition anova;
};

IccResult icc(const RaterTable& t);

struct Correlation {
  double r = 0;
  double p = 0;  // two-sided
};

Correlation pearson(std::span<const double> x, std::span<const double> y);
/// Rank formula without ties, Pearson on mid-ranks otherwise.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// Mid-ranks (1-based), ties share the average rank.
std::vector<double> mid_ranks(std::span<const double> v);

/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);
/// Regularized incomplete beta I_x(a, b), continued fraction to 1e-10.
double incomplete_beta(double a, double b, double x);

inline constexpr double kAccTolerancePx = 3.0;

/// Fraction of |measured - truth| <= tol_px. The boundary is inclusive.
double acc_tmh(std::span<const double> measured, std::span<const double> truth, double tol_px = kAccTolerancePx);

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};

/// Ordinary least squares y = slope * x + intercept; r2 is 0 when y is constant.
LinearFit linreg(std::span<const double> x, std::span<const double> y);

struct BlandAltman {
  double mean_diff = 0, sd_diff = 0, lower_loa = 0, upper_loa = 0, pct_within = 0;
  std::vector<std::pair<double, double>> points;  // (pair mean, a - b)
};

BlandAltman bland_altman(std::span<const double> a, std::span<const double> b);

struct AgreementReport {
  std::optional<double> icc_c1, icc_c2;
  Correlation pearson_r, spearman_rho;
  double acc = 0;
  LinearFit regression;
  BlandAltman bland_altman;
  std::size_t n = 0;
};

/// Agreement of measured values against ground truth. Regression is
/// measured = slope * truth + intercept; Bland-Altman differences are
/// measured - truth.
AgreementReport agreement_report(std::span<const double> measured, std::span<const double> truth,
                                 double tol_px = kAccTolerancePx);

nlohmann::json to_json(const AgreementReport& r);
std::string agreement_csv_header();
std::string agreement_csv_row(const AgreementReport& r);
void write_bland_altman_csv(std::ostream& out, const BlandAltman& ba);
void write_bland_altman_svg(std::ostream& out, const BlandAltman& ba);

}  // namespace meniscus
