#pragma once

#include <Eigen/Dense>

#include <iosfwd>

#include "meniscus/raster.hpp"

namespace meniscus {

/// Square convolution kernel with odd edge length >= 3.
class Kernel {
 public:
  explicit Kernel(Eigen::MatrixXd weights);

  int size() const { return static_cast<int>(weights_.rows()); }
  int radius() const { return size() / 2; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double operator()(int i, int j) const { return weights_(i, j); }

 private:
  Eigen::MatrixXd weights_;
};

/// Edge-detection operator: every entry is -1 except the centre, which is
/// k^2 + center_offset. With the default offset the entries sum to -4.
Kernel build_edo(int k1, double center_offset = -5.0);

/// Filtering operator: the middle row holds 1/k, every other row is zero.
Kernel build_fo(int k2);

struct EdgeConfig {
  int k1 = 13;
  int k2 = 7;
  double edo_center_offset = -5.0;

  void validate() const;
  friend bool operator==(const EdgeConfig&, const EdgeConfig&) = default;
};

/// Luma (0.299 R + 0.587 G + 0.114 B) on the 0-255 scale.
RealPlane to_gray(const RasterImage& img);

/// 2-D convolution (kernel flipped) with reflect-101 padding: the border
/// sample is not repeated, matching the "reflect" mode of common tensor
/// libraries. Output has the input's shape and is not clamped. Rows are
/// split across `threads` workers; results do not depend on the split.
RealPlane convolve(const RealPlane& img, const Kernel& kernel, unsigned threads = 0);

/// convolve(convolve(gray(img), EDO), FO).
RealPlane edge_enhance(const RasterImage& img, const EdgeConfig& cfg = {}, unsigned threads = 0);
RealPlane edge_enhance(const RealPlane& gray, const EdgeConfig& cfg = {}, unsigned threads = 0);

/// One row per line, entries separated by single spaces.
void write_kernel_text(std::ostream& out, const Kernel& kernel);

/// Index into [0, n) after mirroring about the first and last sample.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace meniscus
