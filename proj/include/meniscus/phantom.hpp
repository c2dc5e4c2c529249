#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "meniscus/raster.hpp"

namespace meniscus {

enum class BandProfile { kFlat, kWedge, kArc };

const char* to_string(BandProfile profile);

/// Synthetic eye image: dark pupil disk, bright tear-meniscus band below it,
/// optional Placido-style rings, Gaussian noise and a brightness offset.
struct PhantomSpec {
  int height = 1024;
  int width = 1024;
  int channels = 3;

  int pupil_x = 512;
  int pupil_y = 300;
  int pupil_radius = 60;
  bool placido_rings = false;

  BandProfile profile = BandProfile::kFlat;
  int thickness = 10;                    // flat
  int wedge_start = 8, wedge_end = 12;   // thickness at the left and right band ends
  int arc_radius = 900, arc_gap = 10;    // inner radius and radial width
  int band_row = 600;                    // top row of the band at the pupil column
  int band_half_span = 300;              // band covers pupil_x +- band_half_span
  int dash_period = 24, dash_gap = 0;    // image-only gaps, 0 = solid

  double noise_sigma = 0.0;
  double brightness = 0.0;
  std::uint64_t seed = 0;

  int background = 90;
  int band_contrast = 60;
  int pupil_level = 20;
  int ring_level = 200;

  void validate() const;

  /// Analytic vertical thickness of the band at the pupil column.
  double truth_thickness() const;
  bool in_pupil(int y, int x) const;
  bool in_band(int y, int x) const;
  /// Column inside a dash gap (image only, never the truth).
  bool in_dash_gap(int x) const;
  bool in_rings(int y, int x) const;
};

struct BandBounds {
  int x0, y0, x1, y1;  // inclusive
};

BandBounds band_bounds(const PhantomSpec& spec);

struct PhantomCase {
  PhantomSpec spec;
  RasterImage image;
  BinaryMask truth_combined;
  double truth_tmh_px = 0;
  int truth_pupil_x = 0, truth_pupil_y = 0;

  BinaryMask truth_pupil() const;
  BinaryMask truth_meniscus() const;
};

BinaryMask render_truth(const PhantomSpec& spec);
RasterImage render_image(const PhantomSpec& spec);
PhantomCase generate(const PhantomSpec& spec);

/// Deterministic suite of specs covering flat (5-25 px), wedge and arc bands,
/// dash gaps 0-6 px and noise sigmas 0-10. Even indices are noiseless. Cases
/// are rendered on demand.
class PhantomSuite {
 public:
  PhantomSuite(std::size_t n, std::uint64_t seed, int height = 1024, int width = 1024);

  std::size_t size() const { return specs_.size(); }
  const PhantomSpec& spec(std::size_t i) const { return specs_.at(i); }
  const std::vector<PhantomSpec>& specs() const { return specs_; }
  PhantomCase operator[](std::size_t i) const { return generate(spec(i)); }

 private:
  std::vector<PhantomSpec> specs_;
};

PhantomSuite generate_suite(std::size_t n, std::uint64_t seed);

/// id,truth_tmh_px,pupil_x,pupil_y,profile,thickness,wedge_start,wedge_end,
/// arc_radius,arc_gap,band_row,band_half_span,dash_gap,noise_sigma,brightness,seed
std::string manifest_header();
std::string manifest_row(const std::string& id, const PhantomSpec& spec);

struct ManifestEntry {
  std::string id;
  double truth_tmh_px = 0;
  int pupil_x = 0, pupil_y = 0;
};

std::vector<ManifestEntry> read_manifest(std::istream& in);

}  // namespace meniscus
