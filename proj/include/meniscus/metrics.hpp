#pragma once

#include <cstdint>
#include <string>

#include "meniscus/raster.hpp"

namespace meniscus {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth);

enum class MiouClasses { kForegroundOnly, kForegroundAndBackground };

/// Mean IoU over the selected classes. A class absent from both masks scores 1.
double miou(const BinaryMask& pred, const BinaryMask& truth,
            MiouClasses classes = MiouClasses::kForegroundAndBackground);

struct PrecisionRecallF1 {
  double precision = 0, recall = 0, f1 = 0;
};

/// Zero denominators score 1 when there is nothing to find and nothing was
/// predicted, 0 otherwise.
PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c);

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy; predictions are clamped to [eps, 1 - eps].
double bce_loss(const RealPlane& pred, const BinaryMask& truth, double eps = kBceEpsilon);

/// 1 - (2 sum(y y') + smooth) / (sum(y) + sum(y') + smooth).
double dice_loss(const RealPlane& pred, const BinaryMask& truth, double smooth = 1.0);
double dice_loss(const BinaryMask& pred, const BinaryMask& truth, double smooth = 1.0);

struct PowerIterationOptions {
  double tolerance = 1e-8;
  int max_iterations = 10000;
};

/// Largest singular value of (pred - truth), by power iteration on D^T D.
double matrix_norm_loss(const RealPlane& pred, const RealPlane& truth, const PowerIterationOptions& opts = {});
double matrix_norm_loss(const RealPlane& pred, const BinaryMask& truth, const PowerIterationOptions& opts = {});

struct LossWeights {
  double bce = 0.45;
  double dice = 0.45;
  double matrix = 0.1;

  void validate() const;
};

struct LossBreakdown {
  double bce = 0, dice = 0, matrix = 0, combined = 0;
};

LossBreakdown combined_loss(const RealPlane& pred, const BinaryMask& truth, const LossWeights& w = {});

RealPlane to_probability(const BinaryMask& mask);

/// image_id,miou,precision,recall,f1,bce,dice,matrix,combined
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& image_id, double miou_value, const PrecisionRecallF1& prf,
                            const LossBreakdown& losses);

}  // namespace meniscus
