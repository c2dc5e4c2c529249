#include "meniscus/height.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "meniscus/error.hpp"
#include "meniscus/version.hpp"

namespace meniscus {

PupilCenter locate_pupil(const BinaryMask& mask, int box_size) {
  if (box_size < 1) fail(ErrorKind::kInvalidArgument, "pupil box size must be >= 1");
  const int h = mask.height(), w = mask.width();
  int top = -1;
  for (int y = 0; y < h && top < 0; ++y)
    if (mask.data().row(y).any()) top = y;
  if (top < 0) fail(ErrorKind::kMissingPupil, "mask has no foreground, cannot locate the pupil");

  double sum_x = 0.0;
  int n_top = 0;
  for (int x = 0; x < w; ++x)
    if (mask.test(top, x)) {
      sum_x += x;
      ++n_top;
    }
  const int anchor_x = static_cast<int>(std::lround(sum_x / n_top));

  PupilCenter pc;
  pc.box_size = box_size;
  pc.box_top = top;
  pc.box_left = anchor_x - box_size / 2;
  const int x0 = std::max(0, pc.box_left);
  const int x1 = std::min(w, pc.box_left + box_size);
  const int y1 = std::min(h, top + box_size);
  pc.clamped = x0 != pc.box_left || x1 != pc.box_left + box_size || y1 != top + box_size;
  if (x1 <= x0 || y1 <= top) fail(ErrorKind::kMissingPupil, "pupil box is empty after clamping");

  double cx = 0.0, cy = 0.0;
  std::int64_t n = 0;
  for (int y = top; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      if (mask.test(y, x)) {
        cx += x;
        cy += y;
        ++n;
      }
  pc.x = static_cast<int>(std::lround(cx / static_cast<double>(n)));
  pc.y = static_cast<int>(std::lround(cy / static_cast<double>(n)));
  return pc;
}

std::size_t TmrsSet::point_count() const {
  std::size_t n = 0;
  for (const auto& c : columns) n += c.ys.size();
  return n;
}

const TmrsColumn* TmrsSet::find(int x) const {
  auto it = std::lower_bound(columns.begin(), columns.end(), x,
                             [](const TmrsColumn& c, int v) { return c.x < v; });
  return it != columns.end() && it->x == x ? &*it : nullptr;
}

TmrsSet tmrs_from_mask(const BinaryMask& mask) {
  TmrsSet out;
  for (int x = 0; x < mask.width(); ++x) {
    TmrsColumn col{x, {}};
    for (int y = 0; y < mask.height(); ++y)
      if (mask.test(y, x)) col.ys.push_back(y);
    if (!col.ys.empty()) out.columns.push_back(std::move(col));
  }
  return out;
}

TmrsSet extract_tmrs(const BinaryMask& mask, const PupilCenter& pupil) {
  const auto comps = label_components(mask, Connectivity::k8);
  if (comps.count == 0) fail(ErrorKind::kMissingPupil, "mask has no foreground");

  int seed = 0;
  if (mask.contains(pupil.y, pupil.x) && mask.test(pupil.y, pupil.x)) {
    seed = comps.labels(pupil.y, pupil.x);
  } else {
    for (Eigen::Index i = 0; i < comps.labels.size() && seed == 0; ++i) seed = comps.labels.data()[i];
  }

  int row_lo = mask.height(), row_hi = -1;
  for (int y = 0; y < mask.height(); ++y)
    if ((comps.labels.row(y) == seed).any()) {
      row_lo = std::min(row_lo, y);
      row_hi = std::max(row_hi, y);
    }

  BytePlane rest = mask.data();
  rest.middleRows(row_lo, row_hi - row_lo + 1).setZero();
  const TmrsSet out = tmrs_from_mask(BinaryMask(std::move(rest), MaskClass::kMeniscus));
  if (out.columns.empty())
    fail(ErrorKind::kMissingMeniscus, "no tear-meniscus foreground left after removing the pupil rows");
  return out;
}

SectionSpec make_section(int center_x, double length_mm, double mm_per_pixel, int image_width,
                         std::vector<std::string>* warnings) {
  if (!(mm_per_pixel > 0)) fail(ErrorKind::kInvalidArgument, "mm_per_pixel must be positive");
  if (!(length_mm > 0) || length_mm > image_width * mm_per_pixel)
    fail(ErrorKind::kInvalidArgument, "section length " + std::to_string(length_mm) +
                                          " mm outside (0, image width]");
  SectionSpec s;
  s.length_mm = length_mm;
  // The epsilon keeps exact multiples of c from flooring one pixel short.
  s.length_px = static_cast<int>(std::floor(length_mm / mm_per_pixel + 1e-9));
  s.center_x = center_x;
  if (s.length_px < 1) fail(ErrorKind::kInvalidArgument, "section shorter than one pixel");
  if (warnings && (length_mm < 0.5 || length_mm > 4.0))
    warnings->push_back("section length " + std::to_string(length_mm) +
                        " mm is outside the robust range [0.5, 4] mm");
  return s;
}

namespace {

TmhResult make_result(int method, double px, double c, const SectionSpec& section) {
  TmhResult r;
  r.method = method;
  r.tmh_px = px;
  r.tmh_mm = px * c;
  r.section = section;
  return r;
}

std::vector<const TmrsColumn*> columns_between(const TmrsSet& tmrs, int first, int last) {
  std::vector<const TmrsColumn*> out;
  for (const auto& c : tmrs.columns)
    if (c.x >= first && c.x <= last) out.push_back(&c);
  return out;
}

// Boundaries use pixel edges: the upper boundary is the top edge of the
// topmost pixel, the lower boundary the bottom edge of the lowest one, so a
// band of rows a..b is b - a + 1 thick, as in method 1.
double upper_edge(const TmrsColumn& c) { return *std::min_element(c.ys.begin(), c.ys.end()); }
double lower_edge(const TmrsColumn& c) { return *std::max_element(c.ys.begin(), c.ys.end()) + 1.0; }

double poly_eval(const Eigen::VectorXd& coef, double t) {
  double v = 0.0;
  for (Eigen::Index i = coef.size(); i-- > 0;) v = v * t + coef(i);
  return v;
}

double poly_slope(const Eigen::VectorXd& coef, double t) {
  double v = 0.0;
  for (Eigen::Index i = coef.size(); i-- > 1;) v = v * t + static_cast<double>(i) * coef(i);
  return v;
}

Eigen::VectorXd fit_polynomial(const Eigen::VectorXd& t, const Eigen::VectorXd& y, int degree) {
  Eigen::MatrixXd vander(t.size(), degree + 1);
  vander.col(0).setOnes();
  for (int d = 1; d <= degree; ++d) vander.col(d) = vander.col(d - 1).cwiseProduct(t);
  const auto qr = vander.colPivHouseholderQr();
  if (qr.rank() < degree + 1)
    fail(ErrorKind::kUnderdetermined, "boundary fit of degree " + std::to_string(degree) + " is rank deficient");
  return qr.solve(y);
}

}  // namespace

TmhResult tmh_method1(const TmrsSet& tmrs, const SectionSpec& section, double mm_per_pixel) {
  const auto cols = columns_between(tmrs, section.first_column(), section.last_column());
  if (cols.empty()) fail(ErrorKind::kEmptySection, "measurement section holds no tear-meniscus columns");
  TmhResult r = make_result(1, 0.0, mm_per_pixel, section);
  double sum = 0.0;
  for (const TmrsColumn* c : cols) {
    const double height = lower_edge(*c) - upper_edge(*c);
    r.diagnostics.column_heights.emplace_back(c->x, height);
    sum += height;
  }
  r.tmh_px = sum / static_cast<double>(cols.size());
  r.tmh_mm = r.tmh_px * mm_per_pixel;
  return r;
}

TmhResult tmh_method2(const TmrsSet& tmrs, const SectionSpec& section, double mm_per_pixel,
                      const Method2Options& opts) {
  if (opts.fit_degree < 1) fail(ErrorKind::kInvalidArgument, "fit degree must be >= 1");
  if (opts.window_half_width < 0) fail(ErrorKind::kInvalidArgument, "window half width must be >= 0");
  if (!(opts.sample_step > 0)) fail(ErrorKind::kInvalidArgument, "sample step must be > 0");
  if (!(opts.slope_tolerance >= 0)) fail(ErrorKind::kInvalidArgument, "slope tolerance must be >= 0");

  const int win_lo = std::max(section.first_column(), section.center_x - opts.window_half_width);
  const int win_hi = std::min(section.last_column(), section.center_x + opts.window_half_width);
  const auto fit_cols = opts.fit_range == FitRange::kSection
                            ? columns_between(tmrs, section.first_column(), section.last_column())
                            : columns_between(tmrs, win_lo, win_hi);
  if (fit_cols.empty()) fail(ErrorKind::kEmptySection, "measurement section holds no tear-meniscus columns");
  if (static_cast<int>(fit_cols.size()) < opts.fit_degree + 1)
    fail(ErrorKind::kUnderdetermined, "boundary fit of degree " + std::to_string(opts.fit_degree) + " needs " +
                                          std::to_string(opts.fit_degree + 1) + " columns, got " +
                                          std::to_string(fit_cols.size()));

  const auto n = static_cast<Eigen::Index>(fit_cols.size());
  Eigen::VectorXd t(n), up(n), low(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = *fit_cols[static_cast<std::size_t>(i)];
    t(i) = c.x - section.center_x;
    up(i) = upper_edge(c);
    low(i) = lower_edge(c);
  }
  TmhResult r = make_result(2, 0.0, mm_per_pixel, section);
  r.diagnostics.upper_fit = fit_polynomial(t, up, opts.fit_degree);
  r.diagnostics.lower_fit = fit_polynomial(t, low, opts.fit_degree);
  const auto& f1 = r.diagnostics.upper_fit;
  const auto& f2 = r.diagnostics.lower_fit;

  const auto upper_cols = columns_between(tmrs, win_lo, win_hi);
  if (upper_cols.empty()) fail(ErrorKind::kEmptySection, "slope-search window holds no tear-meniscus columns");

  double match_lo = t.minCoeff(), match_hi = t.maxCoeff();
  if (opts.match_range == FitRange::kWindow) {
    match_lo = std::max(match_lo, static_cast<double>(win_lo - section.center_x));
    match_hi = std::min(match_hi, static_cast<double>(win_hi - section.center_x));
  }
  const auto samples = static_cast<int>(std::floor((match_hi - match_lo) / opts.sample_step + 1e-9)) + 1;
  std::vector<double> cand_t(static_cast<std::size_t>(samples)), cand_slope(cand_t.size());
  for (int s = 0; s < samples; ++s) {
    cand_t[static_cast<std::size_t>(s)] = match_lo + s * opts.sample_step;
    cand_slope[static_cast<std::size_t>(s)] = poly_slope(f2, cand_t[static_cast<std::size_t>(s)]);
  }

  double total = 0.0;
  for (const TmrsColumn* c : upper_cols) {
    const double ti = c->x - section.center_x;
    const double yi = poly_eval(f1, ti);
    const double target = poly_slope(f1, ti);
    double best_diff = std::numeric_limits<double>::infinity();
    for (double s : cand_slope) best_diff = std::min(best_diff, std::abs(s - target));
    // Partners within slope_tolerance of the best slope count as ties
    // (parallel or rasterization-bent boundaries); the closest one is taken.
    const double tie = best_diff + opts.slope_tolerance + 1e-9 * std::max(1.0, std::abs(target));
    double best_dist = std::numeric_limits<double>::infinity();
    double best_t = ti;
    for (std::size_t s = 0; s < cand_t.size(); ++s) {
      if (std::abs(cand_slope[s] - target) > tie) continue;
      const double dist = std::hypot(ti - cand_t[s], yi - poly_eval(f2, cand_t[s]));
      if (dist < best_dist) {
        best_dist = dist;
        best_t = cand_t[s];
      }
    }
    r.diagnostics.matches.emplace_back(c->x, best_t + section.center_x);
    total += best_dist;
  }
  r.tmh_px = total / static_cast<double>(upper_cols.size());
  r.tmh_mm = r.tmh_px * mm_per_pixel;
  return r;
}

TmhResult tmh_method3(const TmrsSet& tmrs, const SectionSpec& section, double mm_per_pixel) {
  const auto cols = columns_between(tmrs, section.first_column(), section.last_column());
  if (cols.empty()) fail(ErrorKind::kEmptySection, "measurement section holds no tear-meniscus columns");
  TmhResult r = make_result(3, 0.0, mm_per_pixel, section);
  auto& d = r.diagnostics;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    d.area += static_cast<double>(cols[i]->ys.size());
    if (i == 0) continue;
    const double dx = cols[i]->x - cols[i - 1]->x;
    d.upper_length += std::hypot(dx, upper_edge(*cols[i]) - upper_edge(*cols[i - 1]));
    d.lower_length += std::hypot(dx, lower_edge(*cols[i]) - lower_edge(*cols[i - 1]));
  }
  if (d.upper_length + d.lower_length == 0.0)
    fail(ErrorKind::kUndefined, "boundary lengths are zero; method 3 needs at least two columns");
  r.tmh_px = 2.0 * d.area / (d.upper_length + d.lower_length);
  r.tmh_mm = r.tmh_px * mm_per_pixel;
  return r;
}

TmhResult measure(const BinaryMask& mask, int method, const GeometryConfig& cfg, double section_mm,
                  const MeasureOptions& opts) {
  if (method < 1 || method > 3) fail(ErrorKind::kInvalidArgument, "method must be 1, 2 or 3");
  if (!(cfg.mm_per_pixel > 0)) fail(ErrorKind::kInvalidArgument, "mm_per_pixel must be positive");
  const PupilCenter pupil = locate_pupil(mask, opts.pupil_box);
  const TmrsSet tmrs = extract_tmrs(mask, pupil);
  std::vector<std::string> warnings;
  const SectionSpec section = make_section(pupil.x, section_mm, cfg.mm_per_pixel, mask.width(), &warnings);
  TmhResult r;
  switch (method) {
    case 1: r = tmh_method1(tmrs, section, cfg.mm_per_pixel); break;
    case 2: r = tmh_method2(tmrs, section, cfg.mm_per_pixel, opts.method2); break;
    default: r = tmh_method3(tmrs, section, cfg.mm_per_pixel); break;
  }
  r.pupil = pupil;
  for (auto& w : warnings) r.diagnostics.warnings.push_back(std::move(w));
  return r;
}

nlohmann::json to_json(const TmhResult& r) {
  nlohmann::json doc{
      {"version", kVersion},
      {"method", r.method},
      {"tmh_px", r.tmh_px},
      {"tmh_mm", r.tmh_mm},
      {"section",
       {{"length_mm", r.section.length_mm},
        {"length_px", r.section.length_px},
        {"center_x", r.section.center_x},
        {"first_column", r.section.first_column()},
        {"last_column", r.section.last_column()}}},
  };
  if (r.pupil) {
    doc["pupil"] = {{"x", r.pupil->x},          {"y", r.pupil->y},
                    {"box_top", r.pupil->box_top}, {"box_left", r.pupil->box_left},
                    {"box_size", r.pupil->box_size}, {"clamped", r.pupil->clamped}};
  } else {
    doc["pupil"] = nullptr;
  }
  auto& diag = doc["diagnostics"];
  diag = nlohmann::json::object();
  const auto& d = r.diagnostics;
  if (!d.column_heights.empty()) {
    diag["column_heights"] = nlohmann::json::array();
    for (const auto& [x, h] : d.column_heights) diag["column_heights"].push_back({x, h});
  }
  if (d.upper_fit.size() > 0) {
    diag["upper_fit"] = std::vector<double>(d.upper_fit.data(), d.upper_fit.data() + d.upper_fit.size());
    diag["lower_fit"] = std::vector<double>(d.lower_fit.data(), d.lower_fit.data() + d.lower_fit.size());
    diag["matches"] = nlohmann::json::array();
    for (const auto& [x, xm] : d.matches) diag["matches"].push_back({x, xm});
  }
  if (r.method == 3) {
    diag["area"] = d.area;
    diag["upper_length"] = d.upper_length;
    diag["lower_length"] = d.lower_length;
  }
  diag["warnings"] = d.warnings;
  return doc;
}

std::string tmh_csv_header() { return "image_id,method,tmh_px,tmh_mm,pupil_x,pupil_y,section_px"; }

std::string tmh_csv_row(const std::string& image_id, const TmhResult& r) {
  std::ostringstream out;
  out.precision(12);
  out << image_id << ',' << r.method << ',' << r.tmh_px << ',' << r.tmh_mm << ',';
  if (r.pupil) out << r.pupil->x << ',' << r.pupil->y;
  else out << ',';
  out << ',' << r.section.length_px;
  return out.str();
}

}  // namespace meniscus
