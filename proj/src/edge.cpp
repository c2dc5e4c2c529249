#include "meniscus/edge.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <thread>
#include <vector>

#include "meniscus/error.hpp"

namespace meniscus {

namespace {

void check_kernel_size(int k, const char* name) {
  if (k < 3 || k % 2 == 0)
    fail(ErrorKind::kInvalidArgument,
         std::string(name) + " must be odd and >= 3, got " + std::to_string(k));
}

}  // namespace

Kernel::Kernel(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
  if (weights_.rows() != weights_.cols())
    fail(ErrorKind::kInvalidArgument, "kernel must be square");
  check_kernel_size(static_cast<int>(weights_.rows()), "kernel size");
}

Kernel build_edo(int k1, double center_offset) {
  check_kernel_size(k1, "k1");
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(k1, k1, -1.0);
  w(k1 / 2, k1 / 2) = static_cast<double>(k1) * k1 + center_offset;
  return Kernel(std::move(w));
}

Kernel build_fo(int k2) {
  check_kernel_size(k2, "k2");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k2, k2);
  w.row(k2 / 2).setConstant(1.0 / k2);
  return Kernel(std::move(w));
}

void EdgeConfig::validate() const {
  check_kernel_size(k1, "k1");
  check_kernel_size(k2, "k2");
}

RealPlane to_gray(const RasterImage& img) {
  if (img.channels() == 3) {
    return 0.299 * img.channel(0).cast<double>() + 0.587 * img.channel(1).cast<double>() +
           0.114 * img.channel(2).cast<double>();
  }
  return img.channel(0).cast<double>();
}

RealPlane convolve(const RealPlane& img, const Kernel& kernel, unsigned threads) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  const int k = kernel.size();
  const int r = kernel.radius();
  if (h < 1 || w < 1) fail(ErrorKind::kInvalidArgument, "cannot convolve an empty image");
  if (k > 2 * h || k > 2 * w)
    fail(ErrorKind::kInvalidArgument, "kernel of size " + std::to_string(k) +
                                          " exceeds twice the image extent");

  // Pad once, then accumulate whole shifted rows so Eigen can vectorize the
  // inner loop.
  RealPlane padded(h + 2 * r, w + 2 * r);
  for (int y = 0; y < h + 2 * r; ++y) {
    const int sy = reflect_index(y - r, h);
    for (int x = 0; x < w + 2 * r; ++x) padded(y, x) = img(sy, reflect_index(x - r, w));
  }

  struct Tap {
    int dy, dx;
    double weight;
  };
  std::vector<Tap> taps;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (kernel(i, j) != 0.0) taps.push_back({k - 1 - i, k - 1 - j, kernel(i, j)});

  RealPlane out = RealPlane::Zero(h, w);
  auto run_rows = [&](int begin, int end) {
    for (int y = begin; y < end; ++y) {
      auto row = out.row(y);
      for (const Tap& t : taps) row += t.weight * padded.row(y + t.dy).segment(t.dx, w);
    }
  };

  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(h));
  if (workers <= 1) {
    run_rows(0, h);
    return out;
  }
  std::vector<std::jthread> pool;
  const int chunk = (h + static_cast<int>(workers) - 1) / static_cast<int>(workers);
  for (int begin = 0; begin < h; begin += chunk) pool.emplace_back(run_rows, begin, std::min(h, begin + chunk));
  pool.clear();
  return out;
}

RealPlane edge_enhance(const RealPlane& gray, const EdgeConfig& cfg, unsigned threads) {
  cfg.validate();
  return convolve(convolve(gray, build_edo(cfg.k1, cfg.edo_center_offset), threads), build_fo(cfg.k2),
                  threads);
}

RealPlane edge_enhance(const RasterImage& img, const EdgeConfig& cfg, unsigned threads) {
  return edge_enhance(to_gray(img), cfg, threads);
}

void write_kernel_text(std::ostream& out, const Kernel& kernel) {
  const auto saved = out.precision(17);
  for (int i = 0; i < kernel.size(); ++i) {
    for (int j = 0; j < kernel.size(); ++j) {
      if (j) out << ' ';
      out << kernel(i, j);
    }
    out << '\n';
  }
  out.precision(saved);
}

}  // namespace meniscus
