#include "meniscus/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <random>
#include <sstream>

#include "meniscus/error.hpp"

namespace meniscus {

const char* to_string(BandProfile profile) {
  switch (profile) {
    case BandProfile::kFlat: return "flat";
    case BandProfile::kWedge: return "wedge";
    case BandProfile::kArc: return "arc";
  }
  return "flat";
}

namespace {

constexpr int kRingOffsets[2] = {20, 45};
constexpr int kRingWidth = 3;

std::int64_t sq(std::int64_t v) { return v * v; }

}  // namespace

bool PhantomSpec::in_pupil(int y, int x) const {
  return sq(x - pupil_x) + sq(y - pupil_y) <= sq(pupil_radius);
}

bool PhantomSpec::in_band(int y, int x) const {
  const int dx = x - pupil_x;
  if (std::abs(dx) > band_half_span) return false;
  switch (profile) {
    case BandProfile::kFlat:
      return y >= band_row && y < band_row + thickness;
    case BandProfile::kWedge: {
      const double t = wedge_start + static_cast<double>(wedge_end - wedge_start) * (dx + band_half_span) /
                                         (2.0 * band_half_span);
      return y >= band_row && y < band_row + t;
    }
    case BandProfile::kArc: {
      const std::int64_t dy = y - (band_row - arc_radius);
      if (dy <= 0) return false;
      const std::int64_t r2 = sq(dx) + sq(dy);
      return r2 >= sq(arc_radius) && r2 < sq(arc_radius + arc_gap);
    }
  }
  return false;
}

bool PhantomSpec::in_dash_gap(int x) const {
  if (dash_gap <= 0) return false;
  const int offset = x - (pupil_x - band_half_span);
  const int phase = ((offset % dash_period) + dash_period) % dash_period;
  return phase >= dash_period - dash_gap;
}

bool PhantomSpec::in_rings(int y, int x) const {
  if (!placido_rings) return false;
  const std::int64_t r2 = sq(x - pupil_x) + sq(y - pupil_y);
  for (int off : kRingOffsets) {
    const int inner = pupil_radius + off;
    if (r2 >= sq(inner) && r2 < sq(inner + kRingWidth)) return true;
  }
  return false;
}

double PhantomSpec::truth_thickness() const {
  switch (profile) {
    case BandProfile::kFlat: return thickness;
    case BandProfile::kWedge: return 0.5 * (wedge_start + wedge_end);
    case BandProfile::kArc: return arc_gap;
  }
  return thickness;
}

void PhantomSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::kGeometry, "phantom: " + what);
  };
  require(height >= 1 && width >= 1, "image size must be positive");
  require(channels == 1 || channels == 3, "channels must be 1 or 3");
  require(pupil_radius >= 1, "pupil radius must be >= 1");
  require(pupil_x - pupil_radius >= 0 && pupil_x + pupil_radius < width && pupil_y - pupil_radius >= 0 &&
              pupil_y + pupil_radius < height,
          "pupil disk must lie inside the image");
  require(band_half_span >= 1, "band half span must be >= 1");
  require(pupil_x - band_half_span >= 0 && pupil_x + band_half_span < width, "band columns outside the image");
  switch (profile) {
    case BandProfile::kFlat: require(thickness >= 1, "thickness must be >= 1"); break;
    case BandProfile::kWedge: require(wedge_start >= 1 && wedge_end >= 1, "wedge thickness must be >= 1"); break;
    case BandProfile::kArc:
      require(arc_gap >= 1, "arc gap must be >= 1");
      require(arc_radius > band_half_span, "arc radius must exceed the band half span");
      break;
  }
  require(dash_period >= 1 && dash_gap >= 0 && dash_gap < dash_period, "dash gap must lie in [0, period)");
  require(noise_sigma >= 0, "noise sigma must be >= 0");
  require(band_row >= 0, "band row must be >= 0");

  int max_extent = thickness;
  if (profile == BandProfile::kWedge) max_extent = std::max(wedge_start, wedge_end) + 1;
  if (profile == BandProfile::kArc) max_extent = arc_gap + 1;
  require(band_row + max_extent <= height, "band leaves the image at the bottom");
  const BandBounds b = band_bounds(*this);
  require(b.y0 > pupil_y + pupil_radius, "band intersects the pupil rows");
  if (placido_rings) {
    const int outer = pupil_radius + kRingOffsets[1] + kRingWidth;
    require(pupil_y + outer < b.y0, "Placido rings reach the band rows");
  }
}

BandBounds band_bounds(const PhantomSpec& spec) {
  BandBounds b{spec.pupil_x + spec.band_half_span, spec.height, spec.pupil_x - spec.band_half_span, -1};
  for (int x = spec.pupil_x - spec.band_half_span; x <= spec.pupil_x + spec.band_half_span; ++x) {
    for (int y = 0; y < spec.height; ++y) {
      if (!spec.in_band(y, x)) continue;
      b.x0 = std::min(b.x0, x);
      b.x1 = std::max(b.x1, x);
      b.y0 = std::min(b.y0, y);
      b.y1 = std::max(b.y1, y);
    }
  }
  if (b.y1 < 0) fail(ErrorKind::kGeometry, "phantom band is empty");
  return b;
}

BinaryMask render_truth(const PhantomSpec& spec) {
  spec.validate();
  BinaryMask out(spec.height, spec.width, MaskClass::kCombined);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      if (spec.in_pupil(y, x) || spec.in_band(y, x)) out.set(y, x);
  return out;
}

RasterImage render_image(const PhantomSpec& spec) {
  spec.validate();
  RealPlane level = RealPlane::Constant(spec.height, spec.width, spec.background);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (spec.in_pupil(y, x)) level(y, x) = spec.pupil_level;
      else if (spec.in_rings(y, x)) level(y, x) = spec.ring_level;
      else if (spec.in_band(y, x) && !spec.in_dash_gap(x)) level(y, x) = spec.background + spec.band_contrast;
    }
  }
  level += spec.brightness;
  if (spec.noise_sigma > 0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (Eigen::Index i = 0; i < level.size(); ++i) level.data()[i] += noise(rng);
  }
  const BytePlane gray = level.round().max(0.0).min(255.0).cast<std::uint8_t>();
  return spec.channels == 1 ? RasterImage(gray) : RasterImage(std::vector<BytePlane>{gray, gray, gray});
}

BinaryMask PhantomCase::truth_pupil() const {
  BinaryMask out(spec.height, spec.width, MaskClass::kPupil);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      if (spec.in_pupil(y, x)) out.set(y, x);
  return out;
}

BinaryMask PhantomCase::truth_meniscus() const {
  BinaryMask out(spec.height, spec.width, MaskClass::kMeniscus);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      if (spec.in_band(y, x)) out.set(y, x);
  return out;
}

PhantomCase generate(const PhantomSpec& spec) {
  PhantomCase c;
  c.spec = spec;
  c.truth_combined = render_truth(spec);
  c.image = render_image(spec);
  c.truth_tmh_px = spec.truth_thickness();
  c.truth_pupil_x = spec.pupil_x;
  c.truth_pupil_y = spec.pupil_y;
  return c;
}

PhantomSuite::PhantomSuite(std::size_t n, std::uint64_t seed, int height, int width) {
  if (n < 1) fail(ErrorKind::kInvalidArgument, "suite size must be >= 1");
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  for (std::size_t i = 0; i < n; ++i) {
    PhantomSpec s;
    s.height = height;
    s.width = width;
    s.seed = seed + i;
    s.pupil_radius = uniform(40, 75);
    s.pupil_x = width / 2 + uniform(-120, 120);
    s.pupil_y = uniform(s.pupil_radius + 120, s.pupil_radius + 220);
    s.profile = std::array{BandProfile::kFlat, BandProfile::kWedge, BandProfile::kArc,
                           BandProfile::kFlat}[(i / 2) % 4];
    s.dash_gap = static_cast<int>(i % 7);
    s.placido_rings = (i % 5) == 3;

    const bool noisy = i % 2 == 1;
    s.noise_sigma = noisy ? uniform(1, 10) : 0.0;
    s.brightness = noisy ? uniform(-20, 20) : 0.0;

    const int max_half = std::min(s.pupil_x, width - 1 - s.pupil_x) - 20;
    s.band_half_span = std::min(max_half, uniform(300, 380));
    double rise = 0.0;
    switch (s.profile) {
      case BandProfile::kFlat:
        s.thickness = uniform(5, 25);
        break;
      case BandProfile::kWedge: {
        const int mid = uniform(7, 23);
        const int delta = uniform(1, 4);
        s.wedge_start = mid - delta;
        s.wedge_end = mid + delta;
        if (uniform(0, 1)) std::swap(s.wedge_start, s.wedge_end);
        break;
      }
      case BandProfile::kArc:
        s.band_half_span = std::min(s.band_half_span, 250);
        s.arc_radius = uniform(900, 1200);
        s.arc_gap = uniform(5, 25);
        rise = s.arc_radius - std::sqrt(static_cast<double>(s.arc_radius) * s.arc_radius -
                                        static_cast<double>(s.band_half_span) * s.band_half_span);
        break;
    }
    // Below the 160 px pupil box, clear of the pupil (and ring) rows at the band ends.
    const int ring_clear = s.placido_rings ? kRingOffsets[1] + kRingWidth : 0;
    const int lowest_start = std::max(s.pupil_y - s.pupil_radius + 180,
                                      s.pupil_y + s.pupil_radius + ring_clear + static_cast<int>(std::ceil(rise)) + 15);
    s.band_row = lowest_start + uniform(0, 80);
    s.validate();
    specs_.push_back(s);
  }
}

PhantomSuite generate_suite(std::size_t n, std::uint64_t seed) { return PhantomSuite(n, seed); }

std::string manifest_header() {
  return "id,truth_tmh_px,pupil_x,pupil_y,profile,thickness,wedge_start,wedge_end,arc_radius,arc_gap,"
         "band_row,band_half_span,dash_gap,noise_sigma,brightness,seed";
}

std::string manifest_row(const std::string& id, const PhantomSpec& s) {
  std::ostringstream out;
  out << id << ',' << s.truth_thickness() << ',' << s.pupil_x << ',' << s.pupil_y << ',' << to_string(s.profile)
      << ',' << s.thickness << ',' << s.wedge_start << ',' << s.wedge_end << ',' << s.arc_radius << ','
      << s.arc_gap << ',' << s.band_row << ',' << s.band_half_span << ',' << s.dash_gap << ',' << s.noise_sigma
      << ',' << s.brightness << ',' << s.seed;
  return out.str();
}

std::vector<ManifestEntry> read_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kDecode, "manifest is empty");
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream s(l);
    while (std::getline(s, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      cells.push_back(cell);
    }
    return cells;
  };
  const auto header = split(line);
  auto column = [&](const char* name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorKind::kDecode, std::string("manifest lacks column ") + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = column("id"), c_tmh = column("truth_tmh_px"), c_px = column("pupil_x"),
                    c_py = column("pupil_y");
  std::vector<ManifestEntry> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) fail(ErrorKind::kDecode, "manifest row has the wrong number of cells");
    try {
      out.push_back({cells[c_id], std::stod(cells[c_tmh]), std::stoi(cells[c_px]), std::stoi(cells[c_py])});
    } catch (const std::exception&) {
      fail(ErrorKind::kDecode, "manifest row is not numeric: " + line);
    }
  }
  return out;
}

}  // namespace meniscus
