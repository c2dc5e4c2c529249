#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meniscus/raster.hpp"

namespace meniscus {

struct PupilCenter {
  int x = 0;
  int y = 0;
  int box_top = 0;
  int box_left = 0;
  int box_size = 160;
  bool clamped = false;  // the box was cut by the image border
};

/// Finds the topmost foreground row, hangs a box_size square below it
/// (horizontally centred on the topmost pixels) and returns the rounded
/// centroid of the foreground inside that box.
PupilCenter locate_pupil(const BinaryMask& mask, int box_size = 160);

struct TmrsColumn {
  int x;
  std::vector<int> ys;  // ascending
};

/// Tear-meniscus coordinate set: foreground left after the pupil is removed,
/// grouped by column.
struct TmrsSet {
  std::vector<TmrsColumn> columns;  // ascending x, each non-empty

  std::size_t span() const { return columns.size(); }
  std::size_t point_count() const;
  const TmrsColumn* find(int x) const;
};

TmrsSet tmrs_from_mask(const BinaryMask& mask);

/// Removes the 8-connected component holding the pupil centre (or, when the
/// centre is background, the topmost pixel) and any foreground on the rows
/// that component spans.
TmrsSet extract_tmrs(const BinaryMask& mask, const PupilCenter& pupil);

struct SectionSpec {
  double length_mm = 0.5;
  int length_px = 0;
  int center_x = 0;

  int half_width() const { return length_px / 2; }
  int first_column() const { return center_x - half_width(); }
  int last_column() const { return center_x + half_width(); }
};

/// Section of `length_mm` centred on center_x. Lengths outside [0.5, 4] mm are
/// accepted with a warning; lengths outside (0, image_width * c] are errors.
SectionSpec make_section(int center_x, double length_mm, double mm_per_pixel, int image_width,
                         std::vector<std::string>* warnings = nullptr);

enum class FitRange { kSection, kWindow };

struct Method2Options {
  int fit_degree = 2;
  int window_half_width = 5;             // pixels around the pupil column holding the upper points
  FitRange fit_range = FitRange::kSection;
  FitRange match_range = FitRange::kSection;  // where the lower-boundary partner may lie
  double sample_step = 1.0 / 64.0;
  double slope_tolerance = 0.02;         // slopes this close to the best match tie; ties go to the nearest
};

struct TmhDiagnostics {
  std::vector<std::pair<int, double>> column_heights;   // method 1
  Eigen::VectorXd upper_fit, lower_fit;                 // method 2, coefficients in (x - center_x)
  std::vector<std::pair<double, double>> matches;       // method 2, (x_i, matched x)
  double area = 0.0, upper_length = 0.0, lower_length = 0.0;  // method 3
  std::vector<std::string> warnings;
};

struct TmhResult {
  int method = 1;
  double tmh_px = 0.0;
  double tmh_mm = 0.0;
  SectionSpec section;
  std::optional<PupilCenter> pupil;
  TmhDiagnostics diagnostics;
};

TmhResult tmh_method1(const TmrsSet& tmrs, const SectionSpec& section, double mm_per_pixel);
TmhResult tmh_method2(const TmrsSet& tmrs, const SectionSpec& section, double mm_per_pixel,
                      const Method2Options& opts = {});
TmhResult tmh_method3(const TmrsSet& tmrs, const SectionSpec& section, double mm_per_pixel);

struct MeasureOptions {
  int pupil_box = 160;
  Method2Options method2;
};

TmhResult measure(const BinaryMask& mask, int method, const GeometryConfig& cfg,
                  double section_mm = 0.5, const MeasureOptions& opts = {});

nlohmann::json to_json(const TmhResult& result);

/// image_id,method,tmh_px,tmh_mm,pupil_x,pupil_y,section_px
std::string tmh_csv_header();
std::string tmh_csv_row(const std::string& image_id, const TmhResult& result);

}  // namespace meniscus
