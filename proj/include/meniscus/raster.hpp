#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace meniscus {

/// Row-major 2-D grid, the storage type behind every image, mask and
/// response map in the library. Indexing is (row, col) == (y, x).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BytePlane = Plane<std::uint8_t>;
using RealPlane = Plane<double>;
using LabelPlane = Plane<int>;

/// 8-bit image with one (gray) or three (RGB) channels stored as planes.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int height, int width, int channels, std::uint8_t fill = 0);
  explicit RasterImage(BytePlane gray);
  explicit RasterImage(std::vector<BytePlane> planes);

  int height() const { return planes_.empty() ? 0 : static_cast<int>(planes_[0].rows()); }
  int width() const { return planes_.empty() ? 0 : static_cast<int>(planes_[0].cols()); }
  int channels() const { return static_cast<int>(planes_.size()); }
  bool empty() const { return planes_.empty(); }

  const BytePlane& channel(int c) const { return planes_.at(static_cast<std::size_t>(c)); }
  BytePlane& channel(int c) { return planes_.at(static_cast<std::size_t>(c)); }

  std::uint8_t at(int y, int x, int c = 0) const { return channel(c)(y, x); }

  friend bool operator==(const RasterImage& a, const RasterImage& b);

 private:
  std::vector<BytePlane> planes_;
};

enum class MaskClass { kPupil, kMeniscus, kCombined };

const char* to_string(MaskClass tag);
MaskClass mask_class_from_string(std::string_view name);

/// Grid of {0,1} labels with a class tag.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, MaskClass tag = MaskClass::kCombined);
  /// Throws if any element is outside {0,1}.
  BinaryMask(BytePlane data, MaskClass tag);

  int height() const { return static_cast<int>(data_.rows()); }
  int width() const { return static_cast<int>(data_.cols()); }
  MaskClass tag() const { return tag_; }
  void set_tag(MaskClass tag) { tag_ = tag; }

  const BytePlane& data() const { return data_; }

  bool test(int y, int x) const { return data_(y, x) != 0; }
  void set(int y, int x, bool on = true) { data_(y, x) = on ? 1 : 0; }
  bool contains(int y, int x) const { return y >= 0 && x >= 0 && y < height() && x < width(); }

  std::int64_t count() const;
  bool same_shape(const BinaryMask& other) const {
    return height() == other.height() && width() == other.width();
  }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.tag_ == b.tag_ && a.same_shape(b) && (a.data_ == b.data_).all();
  }

 private:
  BytePlane data_;
  MaskClass tag_ = MaskClass::kCombined;
};

struct GeometryConfig {
  static constexpr double kDefaultMmPerPixel = 0.011575;

  int target_width = 1024;
  int network_size = 512;
  double mm_per_pixel = kDefaultMmPerPixel;

  void validate(int source_width) const;
};

double px_to_mm(double px, const GeometryConfig& cfg);
double mm_to_px(double mm, const GeometryConfig& cfg);

// PNG I/O: gray or RGB, 8 bits per sample. 16-bit sources are rescaled to 8
// bits; sources with an alpha channel are rejected.
RasterImage load_png(const std::filesystem::path& path);
RasterImage decode_png(std::span<const std::uint8_t> bytes);
void save_png(const RasterImage& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const RasterImage& img);

// Masks persist as single-channel {0,255} PNG plus a `<name>.json` sidecar
// holding {"class": "..."}.
std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);
BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes, MaskClass tag);
void save_mask(const BinaryMask& mask, const std::filesystem::path& png_path);
BinaryMask load_mask(const std::filesystem::path& png_path);
std::filesystem::path sidecar_path(const std::filesystem::path& png_path);

/// Keeps the centered window of `target_width` columns. When the surplus is
/// odd the left side loses the extra column.
RasterImage crop_symmetric(const RasterImage& img, int target_width);
BinaryMask crop_symmetric(const BinaryMask& mask, int target_width);

enum class Interpolation { kBilinear, kNearest };

RasterImage resize(const RasterImage& img, int new_height, int new_width,
                   Interpolation mode = Interpolation::kBilinear);
/// Masks are always resampled with nearest neighbour.
BinaryMask resize(const BinaryMask& mask, int new_height, int new_width);

/// Foreground iff value > threshold.
BinaryMask binarize(const RasterImage& img, double threshold,
                    MaskClass tag = MaskClass::kMeniscus);

template <typename Derived>
BinaryMask binarize(const Eigen::DenseBase<Derived>& values, double threshold,
                    MaskClass tag = MaskClass::kMeniscus) {
  BytePlane out = (values.derived().template cast<double>() > threshold).template cast<std::uint8_t>();
  return BinaryMask(std::move(out), tag);
}

/// Exact Otsu threshold over the empirical distribution of `values`: every
/// split between consecutive distinct values is evaluated. Returns the largest
/// value of the lower class, so `binarize(values, t)` yields the upper class.
double otsu_threshold(std::span<const double> values);

/// Real-valued [0,1] gray view of channel 0 (or luma for RGB).
RealPlane normalized(const RasterImage& img);

/// Maps a real plane onto [0,255] by min-max scaling; constant planes map to 0.
RasterImage to_display(const RealPlane& values);

RasterImage mask_to_image(const BinaryMask& mask);

enum class Connectivity { k4, k8 };

struct ComponentLabels {
  LabelPlane labels;  // 0 = background, components numbered from 1
  int count = 0;
};

ComponentLabels label_components(const BinaryMask& mask,
                                 Connectivity conn = Connectivity::k8);

}  // namespace meniscus
