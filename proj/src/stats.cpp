#include "meniscus/stats.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "meniscus/error.hpp"
#include "meniscus/version.hpp"

namespace meniscus {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void require_equal_length(std::size_t a, std::size_t b) {
  if (a != b)
    fail(ErrorKind::kDimensionMismatch,
         "sequence lengths differ: " + std::to_string(a) + " vs " + std::to_string(b));
}

bool has_ties(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return std::adjacent_find(s.begin(), s.end()) != s.end();
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

void RaterTable::validate() const {
  if (values.rows() < 2 || values.cols() < 2)
    fail(ErrorKind::kInvalidArgument, "rater table needs n >= 2 subjects and k >= 2 raters");
  if (!values.allFinite()) fail(ErrorKind::kInvalidArgument, "rater table has missing or non-finite cells");
}

RaterTable read_rater_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kDecode, "rater CSV is empty");
  auto header = split_csv_line(line);
  bool has_ids = false;
  if (!header.empty()) {
    std::string first = header.front();
    std::transform(first.begin(), first.end(), first.begin(), [](unsigned char ch) { return std::tolower(ch); });
    has_ids = first == "subject" || first == "subject_id" || first == "id";
  }
  RaterTable t;
  t.rater_ids.assign(header.begin() + (has_ids ? 1 : 0), header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorKind::kDecode, "rater CSV row " + std::to_string(rows.size() + 2) + " has " +
                                   std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
    std::vector<double> row;
    for (std::size_t c = has_ids ? 1 : 0; c < cells.size(); ++c) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cells[c], &used));
        if (used != cells[c].size()) throw std::invalid_argument(cells[c]);
      } catch (const std::exception&) {
        fail(ErrorKind::kDecode, "rater CSV cell is not a number: \"" + cells[c] + "\"");
      }
    }
    t.subject_ids.push_back(has_ids ? cells[0] : std::to_string(rows.size() + 1));
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.rater_ids.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  t.validate();
  return t;
}

AnovaDecomposition anova_two_way(const RaterTable& t) {
  t.validate();
  const auto n = static_cast<double>(t.values.rows());
  const auto k = static_cast<double>(t.values.cols());
  const double grand = t.values.mean();
  const Eigen::VectorXd row_means = t.values.rowwise().mean();
  const Eigen::RowVectorXd col_means = t.values.colwise().mean();

  AnovaDecomposition a;
  a.msr = k * (row_means.array() - grand).square().sum() / (n - 1);
  a.msc = n * (col_means.array() - grand).square().sum() / (k - 1);
  const Eigen::MatrixXd resid =
      (t.values.colwise() - row_means).rowwise() - (col_means.array() - grand).matrix();
  a.mse = resid.squaredNorm() / ((n - 1) * (k - 1));
  return a;
}

IccResult icc(const RaterTable& t) {
  IccResult r;
  r.anova = anova_two_way(t);
  const double n = static_cast<double>(t.values.rows());
  const double k = static_cast<double>(t.values.cols());
  const auto& a = r.anova;
  const double d1 = a.msr + (k - 1) * a.mse + (k / n) * (a.msc - a.mse);
  const double d2 = a.msr + (a.msc - a.mse) / n;
  if (d1 != 0.0) r.c1 = (a.msr - a.mse) / d1;
  if (d2 != 0.0) r.c2 = (a.msr - a.mse) / d2;
  return r;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) fail(ErrorKind::kInvalidArgument, "incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Use the symmetry relation where the continued fraction converges fastest.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(b, a, 1.0 - x);

  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front) / a;

  // Modified Lentz evaluation of the continued fraction.
  constexpr double kTiny = 1e-300;
  constexpr double kTol = 1e-10;
  double f = 1.0, c = 1.0, d = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const int m = i / 2;
    double numerator;
    if (i == 0) numerator = 1.0;
    else if (i % 2 == 0) numerator = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    else numerator = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    d = 1.0 + numerator * d;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    c = 1.0 + numerator / c;
    if (std::abs(c) < kTiny) c = kTiny;
    const double cd = c * d;
    f *= cd;
    if (std::abs(1.0 - cd) < kTol) return front * (f - 1.0);
  }
  fail(ErrorKind::kNotConverged, "incomplete beta continued fraction did not converge");
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0)) fail(ErrorKind::kInvalidArgument, "degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

namespace {

Correlation correlation_with_p(double r, std::size_t n) {
  Correlation c;
  c.r = std::clamp(r, -1.0, 1.0);
  const double df = static_cast<double>(n) - 2.0;
  if (std::abs(c.r) >= 1.0) {
    c.p = 0.0;
  } else {
    const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
    c.p = student_t_two_sided_p(t, df);
  }
  return c;
}

}  // namespace

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  require_equal_length(x.size(), y.size());
  if (x.size() < 3) fail(ErrorKind::kInvalidArgument, "Pearson correlation needs at least 3 pairs");
  const Eigen::ArrayXd dx = as_vector(x).array() - as_vector(x).mean();
  const Eigen::ArrayXd dy = as_vector(y).array() - as_vector(y).mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::kUndefined, "Pearson correlation of a constant sequence");
  return correlation_with_p((dx * dy).sum() / std::sqrt(sxx * syy), x.size());
}

std::vector<double> mid_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = rank;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  require_equal_length(x.size(), y.size());
  if (x.size() < 3) fail(ErrorKind::kInvalidArgument, "Spearman correlation needs at least 3 pairs");
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  if (has_ties(x) || has_ties(y)) return pearson(rx, ry);

  const auto n = static_cast<double>(x.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return correlation_with_p(1.0 - 6.0 * d2 / (n * (n * n - 1.0)), x.size());
}

double acc_tmh(std::span<const double> measured, std::span<const double> truth, double tol_px) {
  require_equal_length(measured.size(), truth.size());
  if (measured.empty()) fail(ErrorKind::kEmptyInput, "ACC of an empty sequence");
  // Slack keeps differences such as 13.1 - 10.1 on the accurate side.
  const double limit = tol_px + 1e-9;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < measured.size(); ++i)
    if (std::abs(measured[i] - truth[i]) <= limit) ++hits;
  return static_cast<double>(hits) / static_cast<double>(measured.size());
}

LinearFit linreg(std::span<const double> x, std::span<const double> y) {
  require_equal_length(x.size(), y.size());
  if (x.size() < 2) fail(ErrorKind::kInvalidArgument, "linear regression needs at least 2 points");
  const auto vx = as_vector(x);
  const auto vy = as_vector(y);
  const Eigen::ArrayXd dx = vx.array() - vx.mean();
  const Eigen::ArrayXd dy = vy.array() - vy.mean();
  const double sxx = dx.square().sum();
  if (sxx == 0.0) fail(ErrorKind::kUndefined, "linear regression with constant x");
  LinearFit f;
  f.slope = (dx * dy).sum() / sxx;
  f.intercept = vy.mean() - f.slope * vx.mean();
  const double ss_tot = dy.square().sum();
  const double ss_res = (vy.array() - (f.slope * vx.array() + f.intercept)).square().sum();
  f.r2 = ss_tot == 0.0 ? 0.0 : 1.0 - ss_res / ss_tot;
  return f;
}

BlandAltman bland_altman(std::span<const double> a, std::span<const double> b) {
  require_equal_length(a.size(), b.size());
  if (a.size() < 2) fail(ErrorKind::kInvalidArgument, "Bland-Altman needs at least 2 pairs");
  const Eigen::ArrayXd d = as_vector(a).array() - as_vector(b).array();
  const auto n = static_cast<double>(d.size());
  BlandAltman ba;
  ba.mean_diff = d.mean();
  ba.sd_diff = std::sqrt((d - ba.mean_diff).square().sum() / (n - 1.0));
  const double half = 1.96 * ba.sd_diff;
  ba.lower_loa = ba.mean_diff - half;
  ba.upper_loa = ba.mean_diff + half;
  std::size_t inside = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) >= ba.lower_loa && d(i) <= ba.upper_loa) ++inside;
    ba.points.emplace_back(0.5 * (a[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(i)]), d(i));
  }
  ba.pct_within = static_cast<double>(inside) / n;
  return ba;
}

AgreementReport agreement_report(std::span<const double> measured, std::span<const double> truth,
                                 double tol_px) {
  require_equal_length(measured.size(), truth.size());
  AgreementReport r;
  r.n = measured.size();
  RaterTable table;
  table.values.resize(static_cast<Eigen::Index>(r.n), 2);
  table.values.col(0) = as_vector(measured);
  table.values.col(1) = as_vector(truth);
  const IccResult ic = icc(table);
  r.icc_c1 = ic.c1;
  r.icc_c2 = ic.c2;
  r.pearson_r = pearson(truth, measured);
  r.spearman_rho = spearman(truth, measured);
  r.acc = acc_tmh(measured, truth, tol_px);
  r.regression = linreg(truth, measured);
  r.bland_altman = bland_altman(measured, truth);
  return r;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const AgreementReport& r) {
  return {
      {"version", kVersion},
      {"n", r.n},
      {"icc_c1", optional_number(r.icc_c1)},
      {"icc_c2", optional_number(r.icc_c2)},
      {"pearson_r", r.pearson_r.r},
      {"pearson_p", r.pearson_r.p},
      {"spearman_rho", r.spearman_rho.r},
      {"spearman_p", r.spearman_rho.p},
      {"acc", r.acc},
      {"regression", {{"slope", r.regression.slope}, {"intercept", r.regression.intercept}, {"r2", r.regression.r2}}},
      {"bland_altman",
       {{"mean_diff", r.bland_altman.mean_diff},
        {"sd_diff", r.bland_altman.sd_diff},
        {"lower_loa", r.bland_altman.lower_loa},
        {"upper_loa", r.bland_altman.upper_loa},
        {"pct_within", r.bland_altman.pct_within}}},
  };
}

std::string agreement_csv_header() {
  return "n,icc_c1,icc_c2,pearson_r,pearson_p,spearman_rho,spearman_p,acc,slope,intercept,r2,"
         "mean_diff,lower_loa,upper_loa,pct_within";
}

std::string agreement_csv_row(const AgreementReport& r) {
  std::ostringstream out;
  out.precision(10);
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  out << r.n << ',';
  opt(r.icc_c1);
  out << ',';
  opt(r.icc_c2);
  out << ',' << r.pearson_r.r << ',' << r.pearson_r.p << ',' << r.spearman_rho.r << ',' << r.spearman_rho.p << ','
      << r.acc << ',' << r.regression.slope << ',' << r.regression.intercept << ',' << r.regression.r2 << ','
      << r.bland_altman.mean_diff << ',' << r.bland_altman.lower_loa << ',' << r.bland_altman.upper_loa << ','
      << r.bland_altman.pct_within;
  return out.str();
}

void write_bland_altman_csv(std::ostream& out, const BlandAltman& ba) {
  out << "mean,diff\n";
  const auto saved = out.precision(12);
  for (const auto& [m, d] : ba.points) out << m << ',' << d << '\n';
  out.precision(saved);
}

void write_bland_altman_svg(std::ostream& out, const BlandAltman& ba) {
  constexpr double kW = 640, kH = 420, kPad = 50;
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = std::min(ba.lower_loa, 0.0), y_hi = std::max(ba.upper_loa, 0.0);
  for (const auto& [m, d] : ba.points) {
    x_lo = std::min(x_lo, m);
    x_hi = std::max(x_hi, m);
    y_lo = std::min(y_lo, d);
    y_hi = std::max(y_hi, d);
  }
  if (ba.points.empty()) x_lo = 0, x_hi = 1;
  if (x_hi == x_lo) x_hi = x_lo + 1;
  if (y_hi == y_lo) y_hi = y_lo + 1;
  auto sx = [&](double v) { return kPad + (v - x_lo) / (x_hi - x_lo) * (kW - 2 * kPad); };
  auto sy = [&](double v) { return kH - kPad - (v - y_lo) / (y_hi - y_lo) * (kH - 2 * kPad); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto hline = [&](double v, const char* colour, const char* label) {
    out << "<line x1=\"" << kPad << "\" x2=\"" << kW - kPad << "\" y1=\"" << sy(v) << "\" y2=\"" << sy(v)
        << "\" stroke=\"" << colour << "\" stroke-dasharray=\"6,4\"/>\n";
    out << "<text x=\"" << kW - kPad + 4 << "\" y=\"" << sy(v) + 4 << "\" font-size=\"11\">" << label << "</text>\n";
  };
  hline(ba.mean_diff, "black", "mean");
  hline(ba.upper_loa, "red", "+1.96 SD");
  hline(ba.lower_loa, "red", "-1.96 SD");
  for (const auto& [m, d] : ba.points)
    out << "<circle cx=\"" << sx(m) << "\" cy=\"" << sy(d) << "\" r=\"2.5\" fill=\"steelblue\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << "mean of pair (px)</text>\n";
  out << "<text x=\"14\" y=\"" << kH / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << kH / 2
      << ")\" text-anchor=\"middle\">difference (px)</text>\n";
  out << "</svg>\n";
}

}  // namespace meniscus
