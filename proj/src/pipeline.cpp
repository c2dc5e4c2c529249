#include "meniscus/pipeline.hpp"

#include <algorithm>
#include <deque>

namespace meniscus {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kDimensionMismatch:
    case ErrorKind::kIo:
    case ErrorKind::kDecode:
    case ErrorKind::kEmptyInput:
    case ErrorKind::kGeometry:
      return 1;
    default:
      return 2;
  }
}

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDecode:
    case ErrorKind::kEmptyInput:
      return 400;
    case ErrorKind::kIo:
    case ErrorKind::kNotConverged:
    case ErrorKind::kUndefined:
      return 500;
    default:
      return 422;
  }
}

PupilAnnotation pupil_annotation_from_json(const nlohmann::json& doc) {
  if (doc.is_object() && doc.contains("point")) {
    const auto& p = doc["point"];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer())
      fail(ErrorKind::kGeometry, "pupil point must be an [x, y] integer pair");
    return Eigen::Vector2i(p[0].get<int>(), p[1].get<int>());
  }
  return polygon_from_json(doc);
}

nlohmann::json to_json(const PupilAnnotation& pupil) {
  if (const auto* p = std::get_if<Eigen::Vector2i>(&pupil)) return {{"point", {p->x(), p->y()}}};
  return to_json(std::get<Polygon>(pupil));
}

std::vector<Polygon> roi_from_json(const nlohmann::json& doc) {
  if (doc.is_object() && doc.contains("polygons")) {
    if (!doc["polygons"].is_array() || doc["polygons"].empty())
      fail(ErrorKind::kGeometry, "\"polygons\" must be a non-empty array");
    std::vector<Polygon> out;
    for (const auto& p : doc["polygons"]) out.push_back(polygon_from_json(p));
    return out;
  }
  return {polygon_from_json(doc)};
}

nlohmann::json roi_to_json(const std::vector<Polygon>& roi) {
  nlohmann::json polys = nlohmann::json::array();
  for (const auto& p : roi) polys.push_back(to_json(p));
  return {{"polygons", polys}};
}

BinaryMask pupil_from_point(const RealPlane& gray, const Eigen::Vector2i& seed, double delta) {
  const int h = static_cast<int>(gray.rows()), w = static_cast<int>(gray.cols());
  const int sx = seed.x(), sy = seed.y();
  if (sx < 0 || sy < 0 || sx >= w || sy >= h)
    fail(ErrorKind::kGeometry, "pupil point outside the image");
  const double limit = gray(sy, sx) + delta;
  BinaryMask out(h, w, MaskClass::kPupil);
  std::deque<Eigen::Vector2i> queue{seed};
  out.set(sy, sx);
  while (!queue.empty()) {
    const Eigen::Vector2i p = queue.front();
    queue.pop_front();
    static constexpr int kDx[] = {1, -1, 0, 0}, kDy[] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const int x = p.x() + kDx[d], y = p.y() + kDy[d];
      if (!out.contains(y, x) || out.test(y, x) || gray(y, x) > limit) continue;
      out.set(y, x);
      queue.emplace_back(x, y);
    }
  }
  return out;
}

BinaryMask pupil_mask(const RealPlane& gray, const PupilAnnotation& pupil) {
  const int h = static_cast<int>(gray.rows()), w = static_cast<int>(gray.cols());
  if (const auto* p = std::get_if<Eigen::Vector2i>(&pupil)) return pupil_from_point(gray, *p);
  const auto& poly = std::get<Polygon>(pupil);
  poly.validate_bounds(h, w);
  return rasterize(poly, h, w, MaskClass::kPupil);
}

BinaryMask binarize_roi(const RealPlane& edge, const std::vector<Polygon>& roi, double* threshold) {
  const int h = static_cast<int>(edge.rows()), w = static_cast<int>(edge.cols());
  const BinaryMask all(BytePlane::Ones(h, w), MaskClass::kMeniscus);
  const BinaryMask inside = clip_to_polygons(all, roi);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(inside.count()));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (inside.test(y, x)) values.push_back(edge(y, x));
  if (values.empty()) fail(ErrorKind::kGeometry, "region of interest covers no pixel centre");
  // Flat regions respond with -4 * intensity, so only positive responses can
  // belong to a structure brighter than its surroundings.
  const double t = std::max(0.0, otsu_threshold(values));
  if (threshold) *threshold = t;
  const BinaryMask fg = binarize(edge, t, MaskClass::kMeniscus);
  return BinaryMask(BytePlane(fg.data() * inside.data()), MaskClass::kMeniscus);
}

AnnotateResult annotate_from_edge(const RealPlane& gray, const RealPlane& edge, const std::vector<Polygon>& roi,
                                  const std::optional<PupilAnnotation>& pupil, const RepairConfig& repair) {
  if (gray.rows() != edge.rows() || gray.cols() != edge.cols())
    fail(ErrorKind::kDimensionMismatch, "edge map and image differ in size");
  AnnotateResult r;
  const BinaryMask raw = binarize_roi(edge, roi, &r.threshold);
  r.meniscus = repair_band(raw, repair, &r.repair);
  r.pupil = pupil ? pupil_mask(gray, *pupil)
                  : BinaryMask(static_cast<int>(gray.rows()), static_cast<int>(gray.cols()), MaskClass::kPupil);
  r.combined = merge_masks(r.meniscus, r.pupil);
  return r;
}

AnnotateResult annotate_apply(const RasterImage& img, const std::vector<Polygon>& roi,
                              const std::optional<PupilAnnotation>& pupil, const RepairConfig& repair,
                              const EdgeConfig& edge, unsigned threads) {
  const RealPlane gray = to_gray(img);
  return annotate_from_edge(gray, edge_enhance(gray, edge, threads), roi, pupil, repair);
}

EdgeConfig edge_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::kInvalidArgument, "edge config must be a JSON object");
  EdgeConfig cfg;
  try {
    if (doc.contains("k1")) cfg.k1 = doc.at("k1").get<int>();
    if (doc.contains("k2")) cfg.k2 = doc.at("k2").get<int>();
    if (doc.contains("edo_center_offset")) cfg.edo_center_offset = doc.at("edo_center_offset").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("malformed edge config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const EdgeConfig& cfg) {
  return {{"k1", cfg.k1}, {"k2", cfg.k2}, {"edo_center_offset", cfg.edo_center_offset}};
}

nlohmann::json to_json(const RepairStats& s) {
  return {{"passes", s.passes},
          {"links", s.links},
          {"added_pixels", s.added_pixels},
          {"reached_fixpoint", s.reached_fixpoint}};
}

}  // namespace meniscus
