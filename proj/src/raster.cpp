#include "meniscus/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include <nlohmann/json.hpp>

#include "meniscus/error.hpp"

namespace meniscus {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kDecode: return "decode";
    case ErrorKind::kEmptyInput: return "empty_input";
    case ErrorKind::kGeometry: return "geometry";
    case ErrorKind::kMissingPupil: return "missing_pupil";
    case ErrorKind::kMissingMeniscus: return "missing_meniscus";
    case ErrorKind::kEmptySection: return "empty_section";
    case ErrorKind::kUnderdetermined: return "underdetermined";
    case ErrorKind::kNotConverged: return "not_converged";
    case ErrorKind::kUndefined: return "undefined";
  }
  return "unknown";
}

RasterImage::RasterImage(int height, int width, int channels, std::uint8_t fill) {
  if (height < 1 || width < 1) fail(ErrorKind::kInvalidArgument, "image dimensions must be >= 1");
  if (channels != 1 && channels != 3)
    fail(ErrorKind::kInvalidArgument, "unsupported channel count: " + std::to_string(channels));
  planes_.assign(static_cast<std::size_t>(channels), BytePlane::Constant(height, width, fill));
}

RasterImage::RasterImage(BytePlane gray) {
  if (gray.rows() < 1 || gray.cols() < 1)
    fail(ErrorKind::kInvalidArgument, "image dimensions must be >= 1");
  planes_.push_back(std::move(gray));
}

RasterImage::RasterImage(std::vector<BytePlane> planes) : planes_(std::move(planes)) {
  if (planes_.size() != 1 && planes_.size() != 3)
    fail(ErrorKind::kInvalidArgument, "unsupported channel count: " + std::to_string(planes_.size()));
  for (const auto& p : planes_) {
    if (p.rows() < 1 || p.cols() < 1 || p.rows() != planes_[0].rows() || p.cols() != planes_[0].cols())
      fail(ErrorKind::kInvalidArgument, "channel planes must share non-empty dimensions");
  }
}

bool operator==(const RasterImage& a, const RasterImage& b) {
  if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width()) return false;
  for (int c = 0; c < a.channels(); ++c)
    if (!(a.channel(c) == b.channel(c)).all()) return false;
  return true;
}

const char* to_string(MaskClass tag) {
  switch (tag) {
    case MaskClass::kPupil: return "pupil";
    case MaskClass::kMeniscus: return "meniscus";
    case MaskClass::kCombined: return "combined";
  }
  return "combined";
}

MaskClass mask_class_from_string(std::string_view name) {
  if (name == "pupil") return MaskClass::kPupil;
  if (name == "meniscus") return MaskClass::kMeniscus;
  if (name == "combined") return MaskClass::kCombined;
  fail(ErrorKind::kInvalidArgument, "unknown mask class: " + std::string(name));
}

BinaryMask::BinaryMask(int height, int width, MaskClass tag)
    : data_(BytePlane::Zero(height, width)), tag_(tag) {
  if (height < 1 || width < 1) fail(ErrorKind::kInvalidArgument, "mask dimensions must be >= 1");
}

BinaryMask::BinaryMask(BytePlane data, MaskClass tag) : data_(std::move(data)), tag_(tag) {
  if (data_.rows() < 1 || data_.cols() < 1)
    fail(ErrorKind::kInvalidArgument, "mask dimensions must be >= 1");
  if ((data_ > 1).any()) fail(ErrorKind::kInvalidArgument, "mask values must be 0 or 1");
}

std::int64_t BinaryMask::count() const {
  return data_.cast<std::int64_t>().sum();
}

void GeometryConfig::validate(int source_width) const {
  if (!(mm_per_pixel > 0)) fail(ErrorKind::kInvalidArgument, "mm_per_pixel must be positive");
  if (target_width < 1 || target_width > source_width)
    fail(ErrorKind::kInvalidArgument, "target width must lie in [1, source width]");
  if (network_size < 1) fail(ErrorKind::kInvalidArgument, "network size must be >= 1");
}

double px_to_mm(double px, const GeometryConfig& cfg) {
  if (!(cfg.mm_per_pixel > 0)) fail(ErrorKind::kInvalidArgument, "mm_per_pixel must be positive");
  if (px < 0) fail(ErrorKind::kInvalidArgument, "length must be non-negative");
  return px * cfg.mm_per_pixel;
}

double mm_to_px(double mm, const GeometryConfig& cfg) {
  if (!(cfg.mm_per_pixel > 0)) fail(ErrorKind::kInvalidArgument, "mm_per_pixel must be positive");
  if (mm < 0) fail(ErrorKind::kInvalidArgument, "length must be non-negative");
  return mm / cfg.mm_per_pixel;
}

// --- PNG ---------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    fail(ErrorKind::kDecode, std::string("malformed PNG: ") + image.message);

  int channels = 0;
  if (image.format & PNG_FORMAT_FLAG_COLORMAP) {
    // Palettes expand to RGB unless they carry transparency.
    channels = (image.format & PNG_FORMAT_FLAG_ALPHA) ? 4 : 3;
  } else {
    channels = ((image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1) +
               ((image.format & PNG_FORMAT_FLAG_ALPHA) ? 1 : 0);
  }
  if (channels != 1 && channels != 3) {
    png_image_free(&image);
    fail(ErrorKind::kDecode, "unsupported channel count: " + std::to_string(channels));
  }
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  // Without this flag 16-bit samples are treated as linear and gamma-encoded
  // on the way down to 8 bits; we want a plain rescale.
  image.flags |= PNG_IMAGE_FLAG_16BIT_sRGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr))
    fail(ErrorKind::kDecode, std::string("malformed PNG: ") + image.message);

  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  std::vector<BytePlane> planes(static_cast<std::size_t>(channels), BytePlane(h, w));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        planes[static_cast<std::size_t>(c)](y, x) =
            buffer[(static_cast<std::size_t>(y) * w + x) * channels + c];
  return RasterImage(std::move(planes));
}

RasterImage load_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kIo, "no such file: " + path.string());
  const auto bytes = read_file(path);
  return decode_png(bytes);
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  if (img.empty()) fail(ErrorKind::kInvalidArgument, "cannot encode an empty image");
  const int h = img.height(), w = img.width(), channels = img.channels();
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(h) * w * channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        pixels[(static_cast<std::size_t>(y) * w + x) * channels + c] = img.at(y, x, c);

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  image.flags = PNG_IMAGE_FLAG_FAST;

  png_alloc_size_t size = PNG_IMAGE_PNG_SIZE_MAX(image);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr))
    fail(ErrorKind::kIo, std::string("PNG encode failed: ") + image.message);
  out.resize(size);
  return out;
}

void save_png(const RasterImage& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img));
}

RasterImage mask_to_image(const BinaryMask& mask) {
  BytePlane plane = mask.data() * std::uint8_t{255};
  return RasterImage(std::move(plane));
}

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
  return encode_png(mask_to_image(mask));
}

BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes, MaskClass tag) {
  const RasterImage img = decode_png(bytes);
  if (img.channels() != 1) fail(ErrorKind::kDecode, "mask PNG must be single-channel");
  BytePlane data = (img.channel(0) > 127).cast<std::uint8_t>();
  return BinaryMask(std::move(data), tag);
}

std::filesystem::path sidecar_path(const std::filesystem::path& png_path) {
  auto p = png_path;
  p.replace_extension(".json");
  return p;
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& png_path) {
  write_file(png_path, encode_mask_png(mask));
  const std::string doc = nlohmann::json{{"class", to_string(mask.tag())}}.dump() + "\n";
  write_file(sidecar_path(png_path),
             std::span(reinterpret_cast<const std::uint8_t*>(doc.data()), doc.size()));
}

BinaryMask load_mask(const std::filesystem::path& png_path) {
  if (!std::filesystem::exists(png_path)) fail(ErrorKind::kIo, "no such file: " + png_path.string());
  MaskClass tag = MaskClass::kCombined;
  const auto side = sidecar_path(png_path);
  if (std::filesystem::exists(side)) {
    std::ifstream in(side);
    const auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("class") || !doc["class"].is_string())
      fail(ErrorKind::kDecode, "malformed mask sidecar: " + side.string());
    tag = mask_class_from_string(doc["class"].get<std::string>());
  }
  return decode_mask_png(read_file(png_path), tag);
}

// --- geometry ----------------------------------------------------------------

namespace {

int crop_offset(int width, int target_width) {
  if (target_width < 1 || target_width > width)
    fail(ErrorKind::kInvalidArgument, "crop target width " + std::to_string(target_width) +
                                          " outside [1, " + std::to_string(width) + "]");
  const int surplus = width - target_width;
  return surplus - surplus / 2;  // left takes the extra column
}

template <typename Scalar>
Plane<Scalar> resample_nearest(const Plane<Scalar>& src, int nh, int nw) {
  Plane<Scalar> out(nh, nw);
  const double sy = static_cast<double>(src.rows()) / nh;
  const double sx = static_cast<double>(src.cols()) / nw;
  for (int y = 0; y < nh; ++y) {
    const auto iy = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor((y + 0.5) * sy)), src.rows() - 1);
    for (int x = 0; x < nw; ++x) {
      const auto ix = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor((x + 0.5) * sx)), src.cols() - 1);
      out(y, x) = src(iy, ix);
    }
  }
  return out;
}

// Half-pixel-centre bilinear sampling with edge clamping.
BytePlane resample_bilinear(const BytePlane& src, int nh, int nw) {
  BytePlane out(nh, nw);
  const double sy = static_cast<double>(src.rows()) / nh;
  const double sx = static_cast<double>(src.cols()) / nw;
  const auto max_y = static_cast<double>(src.rows() - 1);
  const auto max_x = static_cast<double>(src.cols() - 1);
  for (int y = 0; y < nh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<Eigen::Index>(fy);
    const auto y1 = std::min<Eigen::Index>(y0 + 1, src.rows() - 1);
    const double ty = fy - static_cast<double>(y0);
    for (int x = 0; x < nw; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<Eigen::Index>(fx);
      const auto x1 = std::min<Eigen::Index>(x0 + 1, src.cols() - 1);
      const double tx = fx - static_cast<double>(x0);
      const double top = src(y0, x0) + (src(y0, x1) - static_cast<double>(src(y0, x0))) * tx;
      const double bot = src(y1, x0) + (src(y1, x1) - static_cast<double>(src(y1, x0))) * tx;
      out(y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(top + (bot - top) * ty, 0.0, 255.0)));
    }
  }
  return out;
}

}  // namespace

RasterImage crop_symmetric(const RasterImage& img, int target_width) {
  const int left = crop_offset(img.width(), target_width);
  std::vector<BytePlane> planes;
  for (int c = 0; c < img.channels(); ++c)
    planes.emplace_back(img.channel(c).middleCols(left, target_width));
  return RasterImage(std::move(planes));
}

BinaryMask crop_symmetric(const BinaryMask& mask, int target_width) {
  const int left = crop_offset(mask.width(), target_width);
  return BinaryMask(BytePlane(mask.data().middleCols(left, target_width)), mask.tag());
}

RasterImage resize(const RasterImage& img, int new_height, int new_width, Interpolation mode) {
  if (new_height < 1 || new_width < 1) fail(ErrorKind::kInvalidArgument, "resize dimensions must be >= 1");
  std::vector<BytePlane> planes;
  for (int c = 0; c < img.channels(); ++c) {
    planes.push_back(mode == Interpolation::kNearest
                         ? resample_nearest(img.channel(c), new_height, new_width)
                         : resample_bilinear(img.channel(c), new_height, new_width));
  }
  return RasterImage(std::move(planes));
}

BinaryMask resize(const BinaryMask& mask, int new_height, int new_width) {
  if (new_height < 1 || new_width < 1) fail(ErrorKind::kInvalidArgument, "resize dimensions must be >= 1");
  return BinaryMask(resample_nearest(mask.data(), new_height, new_width), mask.tag());
}

BinaryMask binarize(const RasterImage& img, double threshold, MaskClass tag) {
  if (img.channels() != 1)
    fail(ErrorKind::kInvalidArgument,
         "binarize needs a single-channel image, got " + std::to_string(img.channels()) + " channels");
  return binarize(img.channel(0), threshold, tag);
}

double otsu_threshold(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::kEmptyInput, "Otsu threshold of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);

  double best_score = -1.0;
  double best = v.back();
  double below = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    below += v[i];
    if (v[i] == v[i + 1]) continue;
    const double n0 = static_cast<double>(i + 1);
    const double n1 = n - n0;
    const double mean0 = below / n0;
    const double mean1 = (total - below) / n1;
    const double score = n0 * n1 * (mean0 - mean1) * (mean0 - mean1);
    if (score > best_score) {
      best_score = score;
      best = v[i];
    }
  }
  return best;
}

RealPlane normalized(const RasterImage& img) {
  if (img.channels() == 3) {
    return (0.299 * img.channel(0).cast<double>() + 0.587 * img.channel(1).cast<double>() +
            0.114 * img.channel(2).cast<double>()) / 255.0;
  }
  return img.channel(0).cast<double>() / 255.0;
}

RasterImage to_display(const RealPlane& values) {
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  BytePlane out = BytePlane::Zero(values.rows(), values.cols());
  if (hi > lo) {
    out = ((values - lo) * (255.0 / (hi - lo))).round().cast<std::uint8_t>();
  }
  return RasterImage(std::move(out));
}

// Two-pass labelling with union-find.
ComponentLabels label_components(const BinaryMask& mask, Connectivity conn) {
  const int h = mask.height(), w = mask.width();
  ComponentLabels out;
  out.labels = LabelPlane::Zero(h, w);
  std::vector<int> parent{0};

  auto find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.test(y, x)) continue;
      int label = 0;
      auto visit = [&](int ny, int nx) {
        if (ny < 0 || nx < 0 || nx >= w) return;
        const int l = out.labels(ny, nx);
        if (l == 0) return;
        if (label == 0) label = l;
        else unite(label, l);
      };
      visit(y, x - 1);
      visit(y - 1, x);
      if (conn == Connectivity::k8) {
        visit(y - 1, x - 1);
        visit(y - 1, x + 1);
      }
      if (label == 0) {
        label = static_cast<int>(parent.size());
        parent.push_back(label);
      }
      out.labels(y, x) = label;
    }
  }

  std::vector<int> compact(parent.size(), 0);
  for (std::size_t l = 1; l < parent.size(); ++l) {
    const int root = find(static_cast<int>(l));
    if (compact[static_cast<std::size_t>(root)] == 0) compact[static_cast<std::size_t>(root)] = ++out.count;
    compact[l] = compact[static_cast<std::size_t>(root)];
  }
  for (Eigen::Index i = 0; i < out.labels.size(); ++i) {
    auto& l = out.labels.data()[i];
    l = compact[static_cast<std::size_t>(l)];
  }
  return out;
}

}  // namespace meniscus
