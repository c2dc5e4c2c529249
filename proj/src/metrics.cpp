#include "meniscus/metrics.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "meniscus/error.hpp"

namespace meniscus {

namespace {

void require_same_shape(Eigen::Index h1, Eigen::Index w1, Eigen::Index h2, Eigen::Index w2) {
  if (h1 != h2 || w1 != w2)
    fail(ErrorKind::kDimensionMismatch, "shape mismatch: " + std::to_string(h1) + "x" + std::to_string(w1) +
                                            " vs " + std::to_string(h2) + "x" + std::to_string(w2));
}

double iou(std::int64_t inter, std::int64_t uni) {
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
  require_same_shape(pred.height(), pred.width(), truth.height(), truth.width());
  const auto p = pred.data().cast<std::int64_t>();
  const auto t = truth.data().cast<std::int64_t>();
  ConfusionCounts c;
  c.tp = (p * t).sum();
  c.fp = (p * (1 - t)).sum();
  c.fn = ((1 - p) * t).sum();
  c.tn = static_cast<std::int64_t>(pred.data().size()) - c.tp - c.fp - c.fn;
  return c;
}

double miou(const BinaryMask& pred, const BinaryMask& truth, MiouClasses classes) {
  const ConfusionCounts c = confusion(pred, truth);
  const double fg = iou(c.tp, c.tp + c.fp + c.fn);
  if (classes == MiouClasses::kForegroundOnly) return fg;
  const double bg = iou(c.tn, c.tn + c.fp + c.fn);
  return 0.5 * (fg + bg);
}

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c) {
  PrecisionRecallF1 r;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp == 0) r.precision = c.fn == 0 ? 1.0 : 0.0;
  else r.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn == 0) r.recall = c.fp == 0 ? 1.0 : 0.0;
  else r.recall = tp / static_cast<double>(c.tp + c.fn);
  r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

double bce_loss(const RealPlane& pred, const BinaryMask& truth, double eps) {
  require_same_shape(pred.rows(), pred.cols(), truth.height(), truth.width());
  if ((pred < 0.0).any() || (pred > 1.0).any() || !pred.allFinite())
    fail(ErrorKind::kInvalidArgument, "BCE predictions must lie in [0, 1]");
  const RealPlane p = pred.max(eps).min(1.0 - eps);
  const RealPlane y = truth.data().cast<double>();
  return (-(y * p.log()) - (1.0 - y) * (1.0 - p).log()).mean();
}

double dice_loss(const RealPlane& pred, const BinaryMask& truth, double smooth) {
  require_same_shape(pred.rows(), pred.cols(), truth.height(), truth.width());
  const RealPlane y = truth.data().cast<double>();
  const double inter = (y * pred).sum();
  return 1.0 - (2.0 * inter + smooth) / (y.sum() + pred.sum() + smooth);
}

double dice_loss(const BinaryMask& pred, const BinaryMask& truth, double smooth) {
  return dice_loss(to_probability(pred), truth, smooth);
}

double matrix_norm_loss(const RealPlane& pred, const RealPlane& truth, const PowerIterationOptions& opts) {
  require_same_shape(pred.rows(), pred.cols(), truth.rows(), truth.cols());
  const Eigen::MatrixXd d = (pred - truth).matrix();
  if (d.isZero(0.0)) return 0.0;

  // Deterministic start vector; a random direction is almost surely not
  // orthogonal to the top right-singular vector.
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(d.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  v.normalize();

  double lambda = 0.0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Eigen::VectorXd av = d.transpose() * (d * v);
    const double next = v.dot(av);  // Rayleigh quotient, v is unit length
    const double residual = (av - next * v).norm();
    const double norm = av.norm();
    if (norm == 0.0) return 0.0;
    const bool converged = residual <= opts.tolerance * next ||
                           std::abs(next - lambda) <= 4 * std::numeric_limits<double>::epsilon() * next;
    lambda = next;
    if (converged) return std::sqrt(lambda);
    v = av / norm;
  }
  fail(ErrorKind::kNotConverged,
       "power iteration did not converge within " + std::to_string(opts.max_iterations) + " iterations");
}

double matrix_norm_loss(const RealPlane& pred, const BinaryMask& truth, const PowerIterationOptions& opts) {
  return matrix_norm_loss(pred, to_probability(truth), opts);
}

void LossWeights::validate() const {
  if (bce < 0 || dice < 0 || matrix < 0) fail(ErrorKind::kInvalidArgument, "loss weights must be >= 0");
}

LossBreakdown combined_loss(const RealPlane& pred, const BinaryMask& truth, const LossWeights& w) {
  w.validate();
  LossBreakdown out;
  out.bce = bce_loss(pred, truth);
  out.dice = dice_loss(pred, truth);
  out.matrix = matrix_norm_loss(pred, truth);
  out.combined = w.bce * out.bce + w.dice * out.dice + w.matrix * out.matrix;
  return out;
}

RealPlane to_probability(const BinaryMask& mask) { return mask.data().cast<double>(); }

std::string metrics_csv_header() { return "image_id,miou,precision,recall,f1,bce,dice,matrix,combined"; }

std::string metrics_csv_row(const std::string& image_id, double miou_value, const PrecisionRecallF1& prf,
                            const LossBreakdown& losses) {
  std::ostringstream out;
  out.precision(10);
  out << image_id << ',' << miou_value << ',' << prf.precision << ',' << prf.recall << ',' << prf.f1 << ','
      << losses.bce << ',' << losses.dice << ',' << losses.matrix << ',' << losses.combined;
  return out.str();
}

}  // namespace meniscus
