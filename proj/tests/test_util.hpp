#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "meniscus/phantom.hpp"
#include "meniscus/repair.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("meniscus-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// 512 x 768 phantom with a flat 10 px band well below the pupil.
inline meniscus::PhantomSpec small_phantom() {
  meniscus::PhantomSpec s;
  s.height = 512;
  s.width = 768;
  s.pupil_x = 384;
  s.pupil_y = 150;
  s.band_row = 330;
  s.band_half_span = 300;
  return s;
}

/// Band bounding box grown by `margin` pixels, clamped to the image.
inline meniscus::Polygon band_roi(const meniscus::PhantomSpec& s, int margin = 10) {
  const auto b = meniscus::band_bounds(s);
  return meniscus::rectangle(std::max(0, b.x0 - margin), std::max(0, b.y0 - margin),
                             std::min(s.width, b.x1 + 1 + margin), std::min(s.height, b.y1 + 1 + margin));
}

}  // namespace testutil
