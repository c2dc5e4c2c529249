#include "meniscus/service.hpp"

#include <httplib.h>

#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "meniscus/error.hpp"
#include "meniscus/height.hpp"
#include "meniscus/pipeline.hpp"
#include "meniscus/version.hpp"

namespace meniscus {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

struct Session {
  std::mutex mutex;
  std::string id;
  RasterImage image;
  RealPlane gray;
  EdgeConfig edge_cfg;
  std::optional<RealPlane> edge;
  std::vector<Polygon> roi;
  std::optional<PupilAnnotation> pupil;
  std::optional<BinaryMask> mask;
  std::optional<RepairStats> stats;
  std::vector<RepairConfig> history;

  const RealPlane& edge_map(const EdgeConfig& cfg, unsigned threads) {
    if (!edge || !(cfg == edge_cfg)) {
      edge = edge_enhance(gray, cfg, threads);
      edge_cfg = cfg;
    }
    return *edge;
  }

  RepairConfig current_repair() const { return history.empty() ? RepairConfig{} : history.back(); }

  void rebuild(unsigned threads) {
    const auto r = annotate_from_edge(gray, edge_map(edge_cfg, threads), roi, pupil, current_repair());
    mask = r.combined;
    stats = r.repair;
  }
};

json summary(const Session& s) {
  json doc{{"id", s.id},
           {"version", kVersion},
           {"height", s.image.height()},
           {"width", s.image.width()},
           {"channels", s.image.channels()},
           {"edge", to_json(s.edge_cfg)},
           {"has_mask", s.mask.has_value()}};
  doc["roi"] = s.roi.empty() ? json(nullptr) : roi_to_json(s.roi);
  doc["pupil"] = s.pupil ? to_json(*s.pupil) : json(nullptr);
  doc["repair_history"] = json::array();
  for (const auto& c : s.history) doc["repair_history"].push_back(to_json(c));
  doc["repair_stats"] = s.stats ? to_json(*s.stats) : json(nullptr);
  return doc;
}

std::string new_token() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  std::ostringstream out;
  out << std::hex;
  for (int i = 0; i < 2; ++i) out << rng();
  return out.str();
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw HttpError{400, "malformed_json", e.what()};
  }
}

void send_json(httplib::Response& res, const json& doc, int status = 200) {
  res.status = status;
  res.set_content(doc.dump(), "application/json");
}

void send_png(httplib::Response& res, std::vector<std::uint8_t> bytes) {
  res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

struct Service::Impl {
  ServiceOptions opts;
  httplib::Server server;
  mutable std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;

  explicit Impl(ServiceOptions o) : opts(std::move(o)) {
    opts.edge.validate();
    if (opts.session_dir) load_sessions();
    routes();
  }

  std::shared_ptr<Session> find(const httplib::Request& req) const {
    const auto& id = req.path_params.at("id");
    std::shared_lock lock(sessions_mutex);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "unknown_session", "no session " + id};
    return it->second;
  }

  // Runs `body` with the session locked; mutations are persisted on success.
  template <typename F>
  httplib::Server::Handler on_session(F body, bool mutates) {
    return guarded([this, body, mutates](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req);
      std::lock_guard lock(s->mutex);
      if (!mutates) return body(*s, req, res);
      // A failed mutation leaves the annotation state as it was.
      auto roi = s->roi;
      auto pupil = s->pupil;
      auto mask = s->mask;
      auto stats = s->stats;
      const auto edge_cfg = s->edge_cfg;
      const auto history = s->history.size();
      try {
        body(*s, req, res);
      } catch (...) {
        s->roi = std::move(roi);
        s->pupil = std::move(pupil);
        s->mask = std::move(mask);
        s->stats = stats;
        s->history.resize(history);
        if (!(s->edge_cfg == edge_cfg)) {
          s->edge_cfg = edge_cfg;
          s->edge.reset();
        }
        throw;
      }
      persist(*s);
    });
  }

  template <typename F>
  httplib::Server::Handler guarded(F body) {
    return [body](const httplib::Request& req, httplib::Response& res) {
      try {
        body(req, res);
      } catch (const HttpError& e) {
        send_json(res, {{"error", e.code}, {"message", e.message}}, e.status);
      } catch (const Error& e) {
        send_json(res, {{"error", to_string(e.kind())}, {"message", e.what()}}, http_status(e.kind()));
      } catch (const json::exception& e) {
        send_json(res, {{"error", "invalid_argument"}, {"message", e.what()}}, 422);
      } catch (const std::exception& e) {
        send_json(res, {{"error", "internal"}, {"message", e.what()}}, 500);
      }
    };
  }

  void routes() {
    if (opts.static_dir) server.set_mount_point("/", opts.static_dir->string());

    server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"status", "ok"}, {"version", kVersion}});
    }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string payload;
      if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) throw HttpError{400, "missing_image", "multipart field \"image\" is required"};
        payload = req.get_file_value("image").content;
      } else {
        payload = req.body;
      }
      if (payload.empty()) throw HttpError{400, "missing_image", "request carries no image"};
      auto s = std::make_shared<Session>();
      s->image = decode_png(as_bytes(payload));
      s->gray = to_gray(s->image);
      s->edge_cfg = opts.edge;
      s->id = new_token();
      {
        std::unique_lock lock(sessions_mutex);
        sessions.emplace(s->id, s);
      }
      std::lock_guard lock(s->mutex);
      persist(*s);
      send_json(res, summary(*s), 201);
    }));

    server.Get("/sessions/:id", on_session([](Session& s, const httplib::Request&, httplib::Response& res) {
      send_json(res, summary(s));
    }, false));

    server.Delete("/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find(req);
      {
        std::unique_lock lock(sessions_mutex);
        sessions.erase(s->id);
      }
      std::lock_guard lock(s->mutex);
      if (opts.session_dir) fs::remove_all(*opts.session_dir / s->id);
      res.status = 204;
    }));

    server.Get("/sessions/:id/edge-map", on_session([this](Session& s, const httplib::Request& req, httplib::Response& res) {
      EdgeConfig cfg = s.edge_cfg;
      try {
        if (req.has_param("k1")) cfg.k1 = std::stoi(req.get_param_value("k1"));
        if (req.has_param("k2")) cfg.k2 = std::stoi(req.get_param_value("k2"));
        if (req.has_param("edo_center_offset")) cfg.edo_center_offset = std::stod(req.get_param_value("edo_center_offset"));
      } catch (const std::logic_error&) {
        throw HttpError{422, "invalid_argument", "edge parameters must be numbers"};
      }
      cfg.validate();
      // Overrides render a preview and leave the session's edge map alone.
      const RealPlane edge = cfg == s.edge_cfg ? s.edge_map(cfg, opts.threads) : edge_enhance(s.gray, cfg, opts.threads);
      send_png(res, encode_png(to_display(edge)));
    }, false));

    server.Put("/sessions/:id/roi", on_session([this](Session& s, const httplib::Request& req, httplib::Response& res) {
      auto roi = roi_from_json(parse_body(req));
      for (const auto& p : roi) p.validate_bounds(s.image.height(), s.image.width());
      s.roi = std::move(roi);
      s.rebuild(opts.threads);
      send_json(res, summary(s));
    }, true));

    server.Put("/sessions/:id/pupil", on_session([this](Session& s, const httplib::Request& req, httplib::Response& res) {
      const auto pupil = pupil_annotation_from_json(parse_body(req));
      pupil_mask(s.gray, pupil);  // validates against the image
      s.pupil = pupil;
      if (!s.roi.empty()) s.rebuild(opts.threads);
      send_json(res, summary(s));
    }, true));

    server.Post("/sessions/:id/repair", on_session([this](Session& s, const httplib::Request& req, httplib::Response& res) {
      if (s.roi.empty()) throw HttpError{409, "missing_roi", "set a region of interest before repairing"};
      json doc = req.body.empty() ? json::object() : parse_body(req);
      if (doc.is_object() && doc.contains("edge")) {
        s.edge_map(edge_config_from_json(doc["edge"]), opts.threads);
        doc.erase("edge");
      }
      s.history.push_back(repair_config_from_json(doc));
      s.rebuild(opts.threads);
      res.set_header("X-Repair-Stats", to_json(*s.stats).dump());
      send_png(res, encode_mask_png(*s.mask));
    }, true));

    server.Post("/sessions/:id/measure", on_session([this](Session& s, const httplib::Request& req, httplib::Response& res) {
      if (!s.mask) throw HttpError{409, "missing_mask", "no mask yet; set a region of interest first"};
      const json doc = req.body.empty() ? json::object() : parse_body(req);
      const int method = doc.value("method", 1);
      if (method < 1 || method > 3) throw HttpError{422, "invalid_argument", "method must be 1, 2 or 3"};
      GeometryConfig geo = opts.geometry;
      geo.mm_per_pixel = doc.value("mm_per_pixel", geo.mm_per_pixel);
      send_json(res, to_json(measure(*s.mask, method, geo, doc.value("section_mm", 0.5))));
    }, false));

    server.Get("/sessions/:id/mask", on_session([](Session& s, const httplib::Request&, httplib::Response& res) {
      if (!s.mask) throw HttpError{409, "missing_mask", "no mask yet; set a region of interest first"};
      send_png(res, encode_mask_png(*s.mask));
    }, false));
  }

  void persist(const Session& s) const {
    if (!opts.session_dir) return;
    const fs::path dir = *opts.session_dir / s.id;
    fs::create_directories(dir);
    if (!fs::exists(dir / "image.png")) save_png(s.image, dir / "image.png");
    json doc = summary(s);
    if (s.mask) save_mask(*s.mask, dir / "mask.png");
    std::ofstream(dir / "session.json") << doc.dump(2) << '\n';
  }

  void load_sessions() {
    fs::create_directories(*opts.session_dir);
    for (const auto& entry : fs::directory_iterator(*opts.session_dir)) {
      const fs::path dir = entry.path();
      if (!fs::exists(dir / "session.json") || !fs::exists(dir / "image.png")) continue;
      json doc;
      std::ifstream(dir / "session.json") >> doc;
      auto s = std::make_shared<Session>();
      s->id = doc.at("id").get<std::string>();
      s->image = load_png(dir / "image.png");
      s->gray = to_gray(s->image);
      s->edge_cfg = edge_config_from_json(doc.at("edge"));
      if (!doc.at("roi").is_null()) s->roi = roi_from_json(doc["roi"]);
      if (!doc.at("pupil").is_null()) s->pupil = pupil_annotation_from_json(doc["pupil"]);
      for (const auto& c : doc.at("repair_history")) s->history.push_back(repair_config_from_json(c));
      if (fs::exists(dir / "mask.png")) s->mask = load_mask(dir / "mask.png");
      if (!doc.at("repair_stats").is_null()) {
        const auto& st = doc["repair_stats"];
        s->stats = RepairStats{st.at("passes").get<int>(), st.at("links").get<std::int64_t>(),
                               st.at("added_pixels").get<std::int64_t>(), st.at("reached_fixpoint").get<bool>()};
      }
      sessions.emplace(s->id, s);
    }
  }
};

Service::Service(ServiceOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}

Service::~Service() { stop(); }

int Service::bind() {
  auto& o = impl_->opts;
  const int port = o.port == 0 ? impl_->server.bind_to_any_port(o.host)
                               : (impl_->server.bind_to_port(o.host, o.port) ? o.port : -1);
  if (port < 0) fail(ErrorKind::kIo, "cannot bind " + o.host + ":" + std::to_string(o.port));
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

std::size_t Service::session_count() const {
  std::shared_lock lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

}  // namespace meniscus
