#include "meniscus/repair.hpp"

#include <algorithm>
#include <cmath>

#include "meniscus/error.hpp"
#include "meniscus/kdtree.hpp"

namespace meniscus {

double Polygon::signed_area() const {
  double twice = 0.0;
  for (std::size_t i = 0, n = vertices.size(); i < n; ++i) {
    const auto& a = vertices[i];
    const auto& b = vertices[(i + 1) % n];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

void Polygon::validate() const {
  if (vertices.size() < 3)
    fail(ErrorKind::kGeometry, "polygon needs at least 3 vertices, got " + std::to_string(vertices.size()));
  for (const auto& v : vertices)
    if (!v.allFinite()) fail(ErrorKind::kGeometry, "polygon vertex is not finite");
  if (signed_area() == 0.0) fail(ErrorKind::kGeometry, "polygon has zero area");
}

void Polygon::validate_bounds(int height, int width) const {
  for (const auto& v : vertices) {
    if (v.x() < 0 || v.y() < 0 || v.x() > width || v.y() > height)
      fail(ErrorKind::kGeometry, "polygon vertex (" + std::to_string(v.x()) + ", " +
                                     std::to_string(v.y()) + ") outside the image");
  }
}

nlohmann::json to_json(const Polygon& poly) {
  nlohmann::json verts = nlohmann::json::array();
  for (const auto& v : poly.vertices) verts.push_back({v.x(), v.y()});
  return {{"vertices", verts}};
}

Polygon polygon_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("vertices") || !doc["vertices"].is_array())
    fail(ErrorKind::kGeometry, "polygon JSON needs a \"vertices\" array");
  Polygon poly;
  for (const auto& v : doc["vertices"]) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      fail(ErrorKind::kGeometry, "polygon vertices must be [x, y] number pairs");
    poly.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
  }
  poly.validate();
  return poly;
}

Polygon rectangle(double x0, double y0, double x1, double y1) {
  return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

BinaryMask rasterize(const Polygon& poly, int height, int width, MaskClass tag) {
  poly.validate();
  BinaryMask out(height, width, tag);
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  std::vector<double> crossings;
  for (int y = 0; y < height; ++y) {
    const double yc = y + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      if ((v[i].y() > yc) != (v[j].y() > yc))
        crossings.push_back(v[i].x() + (yc - v[i].y()) * (v[j].x() - v[i].x()) / (v[j].y() - v[i].y()));
    }
    std::sort(crossings.begin(), crossings.end());
    // A centre is inside iff an odd number of crossings lie strictly to its right.
    for (std::size_t c = 0; c + 1 < crossings.size(); c += 2) {
      const double lo = crossings[c], hi = crossings[c + 1];
      const int x_begin = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
      for (int x = x_begin; x < width && x + 0.5 < hi; ++x) {
        if (x + 0.5 >= lo) out.set(y, x);
      }
    }
  }
  return out;
}

BinaryMask clip_to_polygon(const BinaryMask& mask, const Polygon& poly) {
  poly.validate_bounds(mask.height(), mask.width());
  const BinaryMask roi = rasterize(poly, mask.height(), mask.width());
  return BinaryMask(BytePlane(mask.data() * roi.data()), mask.tag());
}

BinaryMask clip_to_polygons(const BinaryMask& mask, const std::vector<Polygon>& polys) {
  if (polys.empty()) fail(ErrorKind::kGeometry, "no polygon given");
  BytePlane keep = BytePlane::Zero(mask.height(), mask.width());
  for (const auto& p : polys) keep = keep.max(clip_to_polygon(mask, p).data());
  return BinaryMask(std::move(keep), mask.tag());
}

void RepairConfig::validate() const {
  if (k_neighbors < 1) fail(ErrorKind::kInvalidArgument, "k_neighbors must be >= 1");
  if (!(max_link_distance > 0)) fail(ErrorKind::kInvalidArgument, "max_link_distance must be > 0");
  if (stroke_width < 1) fail(ErrorKind::kInvalidArgument, "stroke_width must be >= 1");
  if (max_passes < 1) fail(ErrorKind::kInvalidArgument, "max_passes must be >= 1");
}

nlohmann::json to_json(const RepairConfig& cfg) {
  nlohmann::json doc{{"k_neighbors", cfg.k_neighbors},
                     {"stroke_width", cfg.stroke_width},
                     {"scope", cfg.scope == NeighborScope::kAnyPoint ? "any" : "other_component"},
                     {"iterate_to_fixpoint", cfg.iterate_to_fixpoint},
                     {"max_passes", cfg.max_passes}};
  // JSON has no infinity; null stands for "no cap".
  if (std::isfinite(cfg.max_link_distance)) doc["max_link_distance"] = cfg.max_link_distance;
  else doc["max_link_distance"] = nullptr;
  return doc;
}

RepairConfig repair_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::kInvalidArgument, "repair config must be a JSON object");
  RepairConfig cfg;
  try {
    if (doc.contains("k_neighbors")) cfg.k_neighbors = doc.at("k_neighbors").get<int>();
    if (doc.contains("max_link_distance")) {
      const auto& d = doc.at("max_link_distance");
      cfg.max_link_distance = d.is_null() ? std::numeric_limits<double>::infinity() : d.get<double>();
    }
    if (doc.contains("stroke_width")) cfg.stroke_width = doc.at("stroke_width").get<int>();
    if (doc.contains("iterate_to_fixpoint")) cfg.iterate_to_fixpoint = doc.at("iterate_to_fixpoint").get<bool>();
    if (doc.contains("max_passes")) cfg.max_passes = doc.at("max_passes").get<int>();
    if (doc.contains("scope")) {
      const auto scope = doc.at("scope").get<std::string>();
      if (scope == "any") cfg.scope = NeighborScope::kAnyPoint;
      else if (scope == "other_component") cfg.scope = NeighborScope::kOtherComponent;
      else fail(ErrorKind::kInvalidArgument, "unknown neighbor scope: " + scope);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("malformed repair config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::vector<Eigen::Vector2i> bresenham(const Eigen::Vector2i& from, const Eigen::Vector2i& to) {
  std::vector<Eigen::Vector2i> out;
  int x = from.x(), y = from.y();
  const int dx = std::abs(to.x() - x), dy = -std::abs(to.y() - y);
  const int sx = x < to.x() ? 1 : -1, sy = y < to.y() ? 1 : -1;
  int err = dx + dy;
  while (true) {
    out.emplace_back(x, y);
    if (x == to.x() && y == to.y()) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return out;
}

namespace {

BinaryMask repair_pass(const BinaryMask& mask, const RepairConfig& cfg, RepairStats& stats) {
  const int h = mask.height(), w = mask.width();
  std::vector<Eigen::Vector2d> points;
  std::vector<Eigen::Vector2i> pixels;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.test(y, x)) {
        points.emplace_back(x, y);
        pixels.emplace_back(x, y);
      }

  std::vector<int> component(points.size(), 0);
  if (cfg.scope == NeighborScope::kOtherComponent) {
    const auto labels = label_components(mask, Connectivity::k8);
    for (std::size_t i = 0; i < pixels.size(); ++i) component[i] = labels.labels(pixels[i].y(), pixels[i].x());
  }

  const KdTree2<double> tree(std::move(points));
  const double max_d2 = std::isfinite(cfg.max_link_distance)
                            ? cfg.max_link_distance * cfg.max_link_distance
                            : std::numeric_limits<double>::infinity();
  const int lo = -(cfg.stroke_width - 1) / 2;
  const int hi = cfg.stroke_width / 2;

  BinaryMask out = mask;
  auto paint = [&](const Eigen::Vector2i& p) {
    for (int oy = lo; oy <= hi; ++oy)
      for (int ox = lo; ox <= hi; ++ox) {
        const int y = p.y() + oy, x = p.x() + ox;
        if (out.contains(y, x)) out.set(y, x);
      }
  };

  const auto k = static_cast<std::size_t>(cfg.k_neighbors);
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const int own = component[i];
    auto eligible = [&](std::size_t j) {
      return j != i && (cfg.scope == NeighborScope::kAnyPoint || component[j] != own);
    };
    for (const auto& nb : tree.nearest(tree.point(i), k, eligible, max_d2)) {
      ++stats.links;
      for (const auto& p : bresenham(pixels[i], pixels[nb.index])) paint(p);
    }
  }
  return out;
}

}  // namespace

BinaryMask repair_band(const BinaryMask& mask, const RepairConfig& cfg, RepairStats* stats) {
  cfg.validate();
  if (mask.count() == 0) fail(ErrorKind::kEmptyInput, "repair needs at least one foreground pixel");
  RepairStats local;
  const std::int64_t before = mask.count();
  BinaryMask current = mask;
  const int passes = cfg.iterate_to_fixpoint ? cfg.max_passes : 1;
  for (int pass = 0; pass < passes; ++pass) {
    BinaryMask next = repair_pass(current, cfg, local);
    ++local.passes;
    const bool unchanged = next == current;
    current = std::move(next);
    if (unchanged) {
      local.reached_fixpoint = true;
      break;
    }
  }
  local.added_pixels = current.count() - before;
  if (stats) *stats = local;
  return current;
}

BinaryMask merge_masks(const BinaryMask& meniscus, const BinaryMask& pupil) {
  if (!meniscus.same_shape(pupil))
    fail(ErrorKind::kDimensionMismatch, "cannot merge masks of different dimensions");
  return BinaryMask(BytePlane(meniscus.data().max(pupil.data())), MaskClass::kCombined);
}

}  // namespace meniscus
