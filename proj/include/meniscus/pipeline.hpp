#pragma once

#include <Eigen/Dense>

#include <optional>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "meniscus/edge.hpp"
#include "meniscus/error.hpp"
#include "meniscus/quality.hpp"
#include "meniscus/raster.hpp"
#include "meniscus/repair.hpp"

namespace meniscus {

/// CLI exit code for a failure kind: 1 bad input, 2 pipeline failure.
int exit_code(ErrorKind kind);
/// HTTP status for a failure kind: 400 for undecodable or empty payloads, 500
/// for I/O and internal failures, 422 otherwise.
int http_status(ErrorKind kind);

/// Pupil annotation: a polygon or a clicked point inside the pupil.
using PupilAnnotation = std::variant<Polygon, Eigen::Vector2i>;

/// {"vertices": [...]} or {"point": [x, y]}.
PupilAnnotation pupil_annotation_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PupilAnnotation& pupil);

/// {"vertices": [...]} or {"polygons": [{"vertices": [...]}, ...]}.
std::vector<Polygon> roi_from_json(const nlohmann::json& doc);
nlohmann::json roi_to_json(const std::vector<Polygon>& roi);

/// Grows a 4-connected region from `seed` over pixels no brighter than the
/// seed by more than `delta`.
BinaryMask pupil_from_point(const RealPlane& gray, const Eigen::Vector2i& seed, double delta = 30.0);
BinaryMask pupil_mask(const RealPlane& gray, const PupilAnnotation& pupil);

/// Binarizes the edge response at the Otsu threshold of the ROI pixels (never
/// below zero) and clips the result to the ROI.
BinaryMask binarize_roi(const RealPlane& edge, const std::vector<Polygon>& roi, double* threshold = nullptr);

struct AnnotateResult {
  BinaryMask meniscus;  // repaired
  BinaryMask pupil;
  BinaryMask combined;
  double threshold = 0.0;
  RepairStats repair;
};

/// ROI binarization, repair and pupil merge on a precomputed edge map.
AnnotateResult annotate_from_edge(const RealPlane& gray, const RealPlane& edge, const std::vector<Polygon>& roi,
                                  const std::optional<PupilAnnotation>& pupil, const RepairConfig& repair);

/// Full annotation path from the source image.
AnnotateResult annotate_apply(const RasterImage& img, const std::vector<Polygon>& roi,
                              const std::optional<PupilAnnotation>& pupil, const RepairConfig& repair = {},
                              const EdgeConfig& edge = {}, unsigned threads = 0);

EdgeConfig edge_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const EdgeConfig& cfg);
nlohmann::json to_json(const RepairStats& stats);

}  // namespace meniscus
