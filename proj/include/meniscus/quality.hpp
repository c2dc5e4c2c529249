#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meniscus/raster.hpp"

namespace meniscus {

enum class QualityReason { kTooDark, kTooBright, kBlurred, kNoisy, kNoPupilCandidate, kNoBandCandidate };

const char* to_string(QualityReason reason);

// Defaults are calibrated so the noiseless phantom suite passes in full.
struct QualityThresholds {
  double min_mean = 25.0;
  double max_mean = 230.0;
  double min_sharpness = 50.0;       // Laplacian variance over the strongest responses
  double sharpness_fraction = 0.02;  // share of pixels with the strongest |Laplacian|
  double max_noise_sigma = 25.0;     // robust noise estimate from the median |Laplacian|
  double pupil_dark_level = 50.0;
  int min_pupil_area = 1200;
  double min_pupil_fill = 0.6, max_pupil_fill = 0.95;
  double max_pupil_aspect = 1.6;
  double band_delta = 30.0;          // above the median intensity
  double min_band_row_fraction = 0.15;
};

struct QualityReport {
  bool good = true;
  std::vector<QualityReason> reasons;
  std::map<std::string, double> scores;
};

QualityReport assess(const RasterImage& img, const QualityThresholds& t = {});

nlohmann::json to_json(const QualityReport& report);

}  // namespace meniscus
