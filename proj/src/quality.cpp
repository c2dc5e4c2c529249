#include "meniscus/quality.hpp"

#include <algorithm>
#include <cmath>

#include "meniscus/edge.hpp"

namespace meniscus {

const char* to_string(QualityReason reason) {
  switch (reason) {
    case QualityReason::kTooDark: return "too_dark";
    case QualityReason::kTooBright: return "too_bright";
    case QualityReason::kBlurred: return "blurred";
    case QualityReason::kNoisy: return "noisy";
    case QualityReason::kNoPupilCandidate: return "no_pupil_candidate";
    case QualityReason::kNoBandCandidate: return "no_band_candidate";
  }
  return "unknown";
}

namespace {

struct PupilCandidate {
  double area = 0, fill = 0, aspect = 0;
};

// Largest 8-connected dark blob and how disk-like its bounding box is.
PupilCandidate largest_dark_blob(const RealPlane& gray, double level) {
  const BinaryMask dark((gray < level).cast<std::uint8_t>(), MaskClass::kPupil);
  const auto comps = label_components(dark, Connectivity::k8);
  if (comps.count == 0) return {};
  struct Box {
    std::int64_t area = 0;
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
  };
  std::vector<Box> boxes(static_cast<std::size_t>(comps.count) + 1);
  for (int y = 0; y < gray.rows(); ++y)
    for (int x = 0; x < gray.cols(); ++x) {
      const int l = comps.labels(y, x);
      if (l == 0) continue;
      Box& b = boxes[static_cast<std::size_t>(l)];
      ++b.area;
      b.x0 = std::min(b.x0, x);
      b.x1 = std::max(b.x1, x);
      b.y0 = std::min(b.y0, y);
      b.y1 = std::max(b.y1, y);
    }
  const Box& best = *std::max_element(boxes.begin() + 1, boxes.end(),
                                      [](const Box& a, const Box& b) { return a.area < b.area; });
  const double bw = best.x1 - best.x0 + 1, bh = best.y1 - best.y0 + 1;
  return {static_cast<double>(best.area), static_cast<double>(best.area) / (bw * bh),
          std::max(bw, bh) / std::min(bw, bh)};
}

}  // namespace

QualityReport assess(const RasterImage& img, const QualityThresholds& t) {
  QualityReport report;
  const RealPlane gray = to_gray(img);
  const Eigen::Index h = gray.rows(), w = gray.cols();

  const double mean = gray.mean();
  report.scores["mean_intensity"] = mean;
  if (mean < t.min_mean) report.reasons.push_back(QualityReason::kTooDark);
  if (mean > t.max_mean) report.reasons.push_back(QualityReason::kTooBright);

  std::vector<double> lap;
  if (h >= 3 && w >= 3) {
    const RealPlane l = 4.0 * gray.block(1, 1, h - 2, w - 2) - gray.block(0, 1, h - 2, w - 2) -
                        gray.block(2, 1, h - 2, w - 2) - gray.block(1, 0, h - 2, w - 2) -
                        gray.block(1, 2, h - 2, w - 2);
    lap.assign(l.data(), l.data() + l.size());
  }
  double sharpness = 0.0, noise = 0.0;
  if (!lap.empty()) {
    std::vector<double> mag(lap.size());
    std::transform(lap.begin(), lap.end(), mag.begin(), [](double v) { return std::abs(v); });
    const auto top = std::max<std::size_t>(1, static_cast<std::size_t>(t.sharpness_fraction * static_cast<double>(mag.size())));
    std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(top - 1), mag.end(), std::greater<>());
    // Variance about zero of the strongest responses; depends only on the
    // multiset of magnitudes, so it is mirror invariant.
    double ss = 0.0;
    for (std::size_t i = 0; i < top; ++i) ss += mag[i] * mag[i];
    sharpness = ss / static_cast<double>(top);

    const auto mid = mag.size() / 2;
    std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(mid), mag.end());
    // For i.i.d. noise of deviation s the 5-point Laplacian has deviation
    // s * sqrt(20); 1.4826 * MAD estimates a Gaussian deviation.
    noise = 1.4826 * mag[mid] / std::sqrt(20.0);
  }
  report.scores["sharpness"] = sharpness;
  report.scores["noise_sigma"] = noise;
  if (sharpness < t.min_sharpness) report.reasons.push_back(QualityReason::kBlurred);
  if (noise > t.max_noise_sigma) report.reasons.push_back(QualityReason::kNoisy);

  const PupilCandidate pupil = largest_dark_blob(gray, t.pupil_dark_level);
  report.scores["pupil_area"] = pupil.area;
  report.scores["pupil_fill"] = pupil.fill;
  report.scores["pupil_aspect"] = pupil.aspect;
  const bool pupil_ok = pupil.area >= t.min_pupil_area && pupil.fill >= t.min_pupil_fill &&
                        pupil.fill <= t.max_pupil_fill && pupil.aspect <= t.max_pupil_aspect;
  if (!pupil_ok) report.reasons.push_back(QualityReason::kNoPupilCandidate);

  std::vector<double> sorted(gray.data(), gray.data() + gray.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const auto bright_per_row = (gray >= median + t.band_delta).cast<double>().rowwise().sum();
  const double band_fraction = bright_per_row.maxCoeff() / static_cast<double>(w);
  report.scores["median_intensity"] = median;
  report.scores["band_row_fraction"] = band_fraction;
  if (band_fraction < t.min_band_row_fraction) report.reasons.push_back(QualityReason::kNoBandCandidate);

  report.good = report.reasons.empty();
  return report;
}

nlohmann::json to_json(const QualityReport& report) {
  nlohmann::json reasons = nlohmann::json::array();
  for (auto r : report.reasons) reasons.push_back(to_string(r));
  return {{"verdict", report.good ? "good" : "poor"}, {"reasons", reasons}, {"scores", report.scores}};
}

}  // namespace meniscus
