#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "meniscus/edge.hpp"
#include "meniscus/raster.hpp"

namespace meniscus {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> session_dir;  // persist sessions here when set
  std::optional<std::filesystem::path> static_dir;   // served under / when set
  EdgeConfig edge;
  GeometryConfig geometry;
  unsigned threads = 0;  // convolution workers per request
};

/// Local HTTP annotation service. Sessions are independent; requests on one
/// session are serialized, requests on different sessions run in parallel.
///
///   POST   /sessions                  PNG (multipart "image" or image/png body) -> {"id", ...}
///   GET    /sessions/{id}             session summary
///   DELETE /sessions/{id}
///   GET    /sessions/{id}/edge-map    PNG; k1, k2, edo_center_offset query overrides preview
///   POST   /sessions/{id}/repair      RepairConfig plus optional "edge" -> mask PNG,
///                                     stats in X-Repair-Stats
///   PUT    /sessions/{id}/roi         {"vertices"} | {"polygons"}
///   PUT    /sessions/{id}/pupil       {"vertices"} | {"point": [x, y]}
///   POST   /sessions/{id}/measure     {"method", "section_mm"} -> TmhResult
///   GET    /sessions/{id}/mask        combined mask PNG
///   GET    /health
class Service {
 public:
  explicit Service(ServiceOptions opts = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket and returns the port.
  int bind();
  /// Serves requests until stop(). Requires bind().
  void run();
  void stop();
  void wait_until_ready() const;

  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace meniscus
