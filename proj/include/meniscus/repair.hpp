#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "meniscus/raster.hpp"

namespace meniscus {

/// Closed polygon in pixel-corner coordinates: pixel (x, y) covers
/// [x, x+1) x [y, y+1) and its centre sits at (x + 0.5, y + 0.5).
struct Polygon {
  std::vector<Eigen::Vector2d> vertices;

  double signed_area() const;
  /// At least three vertices and non-zero area.
  void validate() const;
  /// Every vertex within [0, width] x [0, height].
  void validate_bounds(int height, int width) const;

  friend bool operator==(const Polygon&, const Polygon&) = default;
};

/// {"vertices": [[x, y], ...]}
nlohmann::json to_json(const Polygon& poly);
Polygon polygon_from_json(const nlohmann::json& doc);

/// Axis-aligned rectangle covering columns [x0, x1) and rows [y0, y1).
Polygon rectangle(double x0, double y0, double x1, double y1);

/// Pixels whose centres are inside the polygon under the even-odd rule.
BinaryMask rasterize(const Polygon& poly, int height, int width,
                     MaskClass tag = MaskClass::kMeniscus);

BinaryMask clip_to_polygon(const BinaryMask& mask, const Polygon& poly);
/// Union of the per-polygon clips.
BinaryMask clip_to_polygons(const BinaryMask& mask, const std::vector<Polygon>& polys);

/// Which foreground points are eligible as link targets.
enum class NeighborScope {
  kAnyPoint,        // the k nearest foreground points, whatever fragment they lie in
  kOtherComponent,  // the k nearest points outside the query's own 8-connected fragment
};

struct RepairConfig {
  int k_neighbors = 8;
  double max_link_distance = 15.0;  // pixels; infinity disables the cap
  int stroke_width = 1;
  NeighborScope scope = NeighborScope::kOtherComponent;
  bool iterate_to_fixpoint = false;
  int max_passes = 3;

  void validate() const;
};

nlohmann::json to_json(const RepairConfig& cfg);
/// Missing keys keep their defaults. Throws on invalid values.
RepairConfig repair_config_from_json(const nlohmann::json& doc);

struct RepairStats {
  int passes = 0;
  std::int64_t links = 0;
  std::int64_t added_pixels = 0;
  bool reached_fixpoint = false;
};

/// Links every foreground pixel to its k nearest eligible foreground pixels
/// within max_link_distance by rasterized segments. Output is a superset of
/// the input.
BinaryMask repair_band(const BinaryMask& mask, const RepairConfig& cfg = {},
                       RepairStats* stats = nullptr);

/// Bresenham segment between two pixels, endpoints included.
std::vector<Eigen::Vector2i> bresenham(const Eigen::Vector2i& from, const Eigen::Vector2i& to);

/// Pixelwise OR, tagged combined.
BinaryMask merge_masks(const BinaryMask& meniscus, const BinaryMask& pupil);

}  // namespace meniscus
