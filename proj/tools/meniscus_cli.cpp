// meniscus: batch command line and local annotation service.

#include <CLI11.hpp>
#include <pthread.h>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "meniscus/edge.hpp"
#include "meniscus/error.hpp"
#include "meniscus/height.hpp"
#include "meniscus/metrics.hpp"
#include "meniscus/phantom.hpp"
#include "meniscus/pipeline.hpp"
#include "meniscus/quality.hpp"
#include "meniscus/service.hpp"
#include "meniscus/stats.hpp"
#include "meniscus/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace meniscus;

namespace {

constexpr int kQualityRejected = 3;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kInvalidArgument, path.string() + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

// Writes to `path`, or to stdout when the path is empty.
template <typename F>
void emit(const std::string& path, F write) {
  if (path.empty()) {
    write(std::cout);
  } else {
    auto out = open_out(path);
    write(out);
  }
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kIo, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

unsigned job_count(unsigned requested) {
  return requested ? requested : std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) over `jobs` workers.
template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < std::min<std::size_t>(jobs, n); ++t) pool.emplace_back(worker);
  worker();
}

RasterImage load_image(const fs::path& path, int target_width) {
  RasterImage img = load_png(path);
  if (target_width > 0 && img.width() > target_width) img = crop_symmetric(img, target_width);
  return img;
}

void edge_options(CLI::App* cmd, EdgeConfig& cfg) {
  cmd->add_option("--k1", cfg.k1, "edge-detection kernel size")->capture_default_str();
  cmd->add_option("--k2", cfg.k2, "filtering kernel size")->capture_default_str();
  cmd->add_option("--edo-center-offset", cfg.edo_center_offset, "edge kernel centre is k1^2 + offset")
      ->capture_default_str();
}

// ---- phantom ---------------------------------------------------------------

struct PhantomArgs {
  std::size_t n = 250;
  std::uint64_t seed = 7;
  std::string out;
  int height = 1024, width = 1024;
  unsigned jobs = 0;
};

int run_phantom(const PhantomArgs& a) {
  const PhantomSuite suite(a.n, a.seed, a.height, a.width);
  const fs::path root(a.out);
  fs::create_directories(root / "images");
  fs::create_directories(root / "truth");
  std::vector<std::string> ids(suite.size());
  parallel_for(suite.size(), job_count(a.jobs), [&](std::size_t i) {
    std::ostringstream id;
    id << "phantom_" << std::setw(4) << std::setfill('0') << i;
    ids[i] = id.str();
    const PhantomCase c = suite[i];
    save_png(c.image, root / "images" / (ids[i] + ".png"));
    save_mask(c.truth_combined, root / "truth" / (ids[i] + ".png"));
  });
  auto manifest = open_out(root / "manifest.csv");
  manifest << manifest_header() << '\n';
  for (std::size_t i = 0; i < suite.size(); ++i) manifest << manifest_row(ids[i], suite.spec(i)) << '\n';
  std::cout << "wrote " << suite.size() << " phantoms to " << root.string() << '\n';
  return 0;
}

// ---- quality ---------------------------------------------------------------

struct QualityArgs {
  std::vector<std::string> images;
  bool strict = false;
  std::string json_out;
  int target_width = 0;
  QualityThresholds thresholds;
};

int run_quality(const QualityArgs& a) {
  json report = json::array();
  bool any_poor = false;
  for (const auto& path : a.images) {
    const QualityReport q = assess(load_image(path, a.target_width), a.thresholds);
    any_poor |= !q.good;
    std::cout << path << ": " << (q.good ? "good" : "poor");
    for (std::size_t i = 0; i < q.reasons.size(); ++i) std::cout << (i ? ", " : " (") << to_string(q.reasons[i]);
    std::cout << (q.reasons.empty() ? "" : ")") << '\n';
    json row = to_json(q);
    row["image"] = path;
    report.push_back(row);
  }
  if (!a.json_out.empty()) open_out(a.json_out) << report.dump(2) << '\n';
  return a.strict && any_poor ? kQualityRejected : 0;
}

// ---- edge ------------------------------------------------------------------

struct EdgeArgs {
  std::string image, out, kernels_out;
  EdgeConfig cfg;
  int target_width = 0;
  unsigned threads = 0;
};

int run_edge(const EdgeArgs& a) {
  a.cfg.validate();
  const RealPlane edge = edge_enhance(load_image(a.image, a.target_width), a.cfg, a.threads);
  save_png(to_display(edge), a.out);
  if (!a.kernels_out.empty()) {
    auto out = open_out(a.kernels_out);
    out << "# edo k1=" << a.cfg.k1 << '\n';
    write_kernel_text(out, build_edo(a.cfg.k1, a.cfg.edo_center_offset));
    out << "# fo k2=" << a.cfg.k2 << '\n';
    write_kernel_text(out, build_fo(a.cfg.k2));
  }
  return 0;
}

// ---- annotate-apply --------------------------------------------------------

struct AnnotateArgs {
  std::string image, roi, pupil, repair, out, meniscus_out;
  std::optional<std::vector<int>> pupil_point;
  std::string quality_gate = "warn";
  EdgeConfig cfg;
  int target_width = 0;
  unsigned threads = 0;
};

int run_annotate(const AnnotateArgs& a) {
  const RasterImage img = load_image(a.image, a.target_width);
  if (a.quality_gate != "off") {
    const QualityReport q = assess(img);
    if (!q.good) {
      std::cerr << "quality: poor";
      for (auto r : q.reasons) std::cerr << ' ' << to_string(r);
      std::cerr << '\n';
      if (a.quality_gate == "strict") return kQualityRejected;
    }
  }
  std::optional<PupilAnnotation> pupil;
  if (!a.pupil.empty()) pupil = pupil_annotation_from_json(read_json(a.pupil));
  if (a.pupil_point) pupil = Eigen::Vector2i((*a.pupil_point)[0], (*a.pupil_point)[1]);
  const RepairConfig repair = a.repair.empty() ? RepairConfig{} : repair_config_from_json(read_json(a.repair));
  const AnnotateResult r = annotate_apply(img, roi_from_json(read_json(a.roi)), pupil, repair, a.cfg, a.threads);
  save_mask(r.combined, a.out);
  if (!a.meniscus_out.empty()) save_mask(r.meniscus, a.meniscus_out);
  std::cout << json{{"threshold", r.threshold},
                    {"repair", to_json(r.repair)},
                    {"mask_pixels", r.combined.count()},
                    {"version", kVersion}}
                   .dump()
            << '\n';
  return 0;
}

// ---- measure ---------------------------------------------------------------

struct MeasureArgs {
  std::string input, manifest, csv_out, json_out;
  int method = 1;
  double section_mm = 0.5;
  double mm_per_pixel = GeometryConfig::kDefaultMmPerPixel;
  double tol_px = kAccTolerancePx;
  unsigned jobs = 0;
};

int run_measure(const MeasureArgs& a) {
  GeometryConfig geo;
  geo.mm_per_pixel = a.mm_per_pixel;
  if (!fs::is_directory(a.input)) {
    const TmhResult r = measure(load_mask(a.input), a.method, geo, a.section_mm);
    emit(a.json_out, [&](std::ostream& out) { out << to_json(r).dump(2) << '\n'; });
    if (!a.csv_out.empty()) open_out(a.csv_out) << tmh_csv_header() << '\n' << tmh_csv_row(fs::path(a.input).stem(), r) << '\n';
    return 0;
  }

  const auto files = png_files(a.input);
  if (files.empty()) fail(ErrorKind::kEmptyInput, "no PNG masks in " + a.input);
  std::vector<std::optional<TmhResult>> results(files.size());
  std::vector<std::string> errors(files.size());
  parallel_for(files.size(), job_count(a.jobs), [&](std::size_t i) {
    try {
      results[i] = measure(load_mask(files[i]), a.method, geo, a.section_mm);
    } catch (const Error& e) {
      errors[i] = std::string(to_string(e.kind())) + ": " + e.what();
    }
  });

  std::size_t failed = 0;
  for (std::size_t i = 0; i < files.size(); ++i)
    if (!results[i]) {
      ++failed;
      std::cerr << files[i].string() << ": " << errors[i] << '\n';
    }
  emit(a.csv_out, [&](std::ostream& out) {
    out << tmh_csv_header() << '\n';
    for (std::size_t i = 0; i < files.size(); ++i)
      if (results[i]) out << tmh_csv_row(files[i].stem(), *results[i]) << '\n';
  });
  if (!a.json_out.empty()) {
    json doc = json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
      json row = results[i] ? to_json(*results[i]) : json{{"error", errors[i]}};
      row["image_id"] = files[i].stem().string();
      doc.push_back(row);
    }
    open_out(a.json_out) << doc.dump(2) << '\n';
  }

  if (!a.manifest.empty()) {
    std::ifstream in(a.manifest);
    if (!in) fail(ErrorKind::kIo, "cannot read " + a.manifest);
    std::map<std::string, double> truth;
    for (const auto& e : read_manifest(in)) truth[e.id] = e.truth_tmh_px;
    std::vector<double> measured, expected;
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto it = truth.find(files[i].stem().string());
      if (it == truth.end()) continue;
      // Failed measurements count as misses.
      measured.push_back(results[i] ? results[i]->tmh_px : std::numeric_limits<double>::infinity());
      expected.push_back(it->second);
    }
    if (measured.empty()) fail(ErrorKind::kEmptyInput, "no mask matches a manifest id");
    const double acc = acc_tmh(measured, expected, a.tol_px);
    std::cerr << "acc " << acc << " (" << std::lround(acc * static_cast<double>(measured.size())) << '/'
              << measured.size() << ", tolerance " << a.tol_px << " px)\n";
  }
  return failed ? 2 : 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string pred, truth, metrics_out, report_out, rater_table, ba_csv, ba_svg;
  int method = 1;
  double section_mm = 0.5;
  double mm_per_pixel = GeometryConfig::kDefaultMmPerPixel;
  unsigned jobs = 0;
};

int run_eval(const EvalArgs& a) {
  const auto preds = png_files(a.pred);
  std::vector<fs::path> pairs;
  for (const auto& p : preds)
    if (fs::exists(fs::path(a.truth) / p.filename())) pairs.push_back(p);
  if (pairs.empty()) fail(ErrorKind::kEmptyInput, "no prediction has a truth mask of the same name");

  GeometryConfig geo;
  geo.mm_per_pixel = a.mm_per_pixel;
  struct Row {
    std::string line;
    std::optional<double> tmh_pred, tmh_truth;
  };
  std::vector<Row> rows(pairs.size());
  parallel_for(pairs.size(), job_count(a.jobs), [&](std::size_t i) {
    const BinaryMask pred = load_mask(pairs[i]);
    const BinaryMask truth = load_mask(fs::path(a.truth) / pairs[i].filename());
    const double m = miou(pred, truth);
    const auto prf = precision_recall_f1(confusion(pred, truth));
    rows[i].line = metrics_csv_row(pairs[i].stem(), m, prf, combined_loss(to_probability(pred), truth));
    try {
      rows[i].tmh_pred = measure(pred, a.method, geo, a.section_mm).tmh_px;
      rows[i].tmh_truth = measure(truth, a.method, geo, a.section_mm).tmh_px;
    } catch (const Error& e) {
      std::cerr << pairs[i].string() << ": " << to_string(e.kind()) << ": " << e.what() << '\n';
    }
  });

  emit(a.metrics_out, [&](std::ostream& out) {
    out << metrics_csv_header() << '\n';
    for (const auto& r : rows) out << r.line << '\n';
  });

  std::vector<double> measured, truth;
  for (const auto& r : rows)
    if (r.tmh_pred && r.tmh_truth) {
      measured.push_back(*r.tmh_pred);
      truth.push_back(*r.tmh_truth);
    }
  json report{{"version", kVersion}, {"pairs", pairs.size()}, {"measured_pairs", measured.size()}};
  if (measured.size() >= 3) {
    const AgreementReport ag = agreement_report(measured, truth);
    report["agreement"] = to_json(ag);
    if (!a.ba_csv.empty()) {
      auto out = open_out(a.ba_csv);
      write_bland_altman_csv(out, ag.bland_altman);
    }
    if (!a.ba_svg.empty()) {
      auto out = open_out(a.ba_svg);
      write_bland_altman_svg(out, ag.bland_altman);
    }
  } else {
    std::cerr << "agreement needs at least 3 measured pairs\n";
  }
  if (!a.rater_table.empty()) {
    std::ifstream in(a.rater_table);
    if (!in) fail(ErrorKind::kIo, "cannot read " + a.rater_table);
    const IccResult r = icc(read_rater_csv(in));
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    report["icc"] = {{"c1", opt(r.c1)}, {"c2", opt(r.c2)},
                     {"anova", {{"msr", r.anova.msr}, {"msc", r.anova.msc}, {"mse", r.anova.mse}}}};
  }
  emit(a.report_out, [&](std::ostream& out) { out << report.dump(2) << '\n'; });
  return 0;
}

// ---- serve -----------------------------------------------------------------

struct ServeArgs {
  ServiceOptions opts;
  std::string session_dir, static_dir;
};

int run_serve(ServeArgs& a) {
  if (!a.session_dir.empty()) a.opts.session_dir = a.session_dir;
  if (!a.static_dir.empty()) a.opts.static_dir = a.static_dir;
  // Block SIGINT/SIGTERM in every thread; a watcher takes them with sigwait.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  Service service(a.opts);
  const int port = service.bind();
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    service.stop();
  });
  std::cerr << kVersion << " listening on http://" << a.opts.host << ':' << port << '\n';
  service.run();
  pthread_kill(watcher.native_handle(), SIGTERM);  // no-op for the watcher if it already returned
  watcher.join();
  return 0;
}

int default_port() {
  if (const char* env = std::getenv("MENISCUS_PORT")) {
    try {
      return std::stoi(env);
    } catch (const std::logic_error&) {
      fail(ErrorKind::kInvalidArgument, std::string("MENISCUS_PORT is not a number: ") + env);
    }
  }
  return 8080;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tear-meniscus segmentation and height measurement toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  PhantomArgs phantom;
  auto* cmd_phantom = app.add_subcommand("phantom", "generate the synthetic phantom suite");
  cmd_phantom->add_option("--n", phantom.n, "number of cases")->capture_default_str()->check(CLI::PositiveNumber);
  cmd_phantom->add_option("--seed", phantom.seed, "suite seed")->capture_default_str();
  cmd_phantom->add_option("--out", phantom.out, "output directory")->required();
  cmd_phantom->add_option("--height", phantom.height)->capture_default_str();
  cmd_phantom->add_option("--width", phantom.width)->capture_default_str();
  cmd_phantom->add_option("--jobs", phantom.jobs, "worker threads, 0 = all cores");

  QualityArgs quality;
  auto* cmd_quality = app.add_subcommand("quality", "screen images for usability");
  cmd_quality->add_option("images", quality.images, "PNG images")->required()->check(CLI::ExistingFile);
  cmd_quality->add_flag("--strict", quality.strict, "exit 3 when any image is poor");
  cmd_quality->add_option("--json", quality.json_out, "write the batch report here");
  cmd_quality->add_option("--target-width", quality.target_width, "crop wider images to this width");

  EdgeArgs edge;
  auto* cmd_edge = app.add_subcommand("edge", "write the edge-enhanced image");
  cmd_edge->add_option("--image", edge.image)->required()->check(CLI::ExistingFile);
  cmd_edge->add_option("--out", edge.out, "output PNG")->required();
  cmd_edge->add_option("--kernels-out", edge.kernels_out, "write both kernels as text");
  cmd_edge->add_option("--target-width", edge.target_width, "crop wider images to this width");
  cmd_edge->add_option("--threads", edge.threads, "convolution workers, 0 = all cores");
  edge_options(cmd_edge, edge.cfg);

  AnnotateArgs annotate;
  auto* cmd_annotate = app.add_subcommand("annotate-apply", "turn an ROI polygon into a combined mask");
  cmd_annotate->add_option("--image", annotate.image)->required()->check(CLI::ExistingFile);
  cmd_annotate->add_option("--roi", annotate.roi, "polygon JSON")->required()->check(CLI::ExistingFile);
  auto* pupil_opt = cmd_annotate->add_option("--pupil", annotate.pupil, "pupil polygon or point JSON")
                        ->check(CLI::ExistingFile);
  cmd_annotate->add_option("--pupil-point", annotate.pupil_point, "pupil click as X Y")
      ->expected(2)
      ->excludes(pupil_opt);
  cmd_annotate->add_option("--repair", annotate.repair, "repair config JSON")->check(CLI::ExistingFile);
  cmd_annotate->add_option("--out", annotate.out, "combined mask PNG")->required();
  cmd_annotate->add_option("--meniscus-out", annotate.meniscus_out, "repaired meniscus mask PNG");
  cmd_annotate->add_option("--quality-gate", annotate.quality_gate, "off, warn or strict")
      ->capture_default_str()
      ->check(CLI::IsMember({"off", "warn", "strict"}));
  cmd_annotate->add_option("--target-width", annotate.target_width, "crop wider images to this width");
  cmd_annotate->add_option("--threads", annotate.threads, "convolution workers, 0 = all cores");
  edge_options(cmd_annotate, annotate.cfg);

  MeasureArgs meas;
  auto* cmd_measure = app.add_subcommand("measure", "tear-meniscus height from combined masks");
  cmd_measure->add_option("input", meas.input, "mask PNG or directory of masks")->required()->check(CLI::ExistingPath);
  cmd_measure->add_option("--method", meas.method)->capture_default_str()->check(CLI::Range(1, 3));
  cmd_measure->add_option("--section-mm", meas.section_mm)->capture_default_str();
  cmd_measure->add_option("--mm-per-pixel", meas.mm_per_pixel)->capture_default_str();
  cmd_measure->add_option("--manifest", meas.manifest, "phantom manifest; prints ACC")->check(CLI::ExistingFile);
  cmd_measure->add_option("--tolerance-px", meas.tol_px, "ACC tolerance")->capture_default_str();
  cmd_measure->add_option("--csv", meas.csv_out, "CSV output (directory mode defaults to stdout)");
  cmd_measure->add_option("--json", meas.json_out, "JSON output (single mask defaults to stdout)");
  cmd_measure->add_option("--jobs", meas.jobs, "worker threads, 0 = all cores");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "compare predicted masks with truth masks");
  cmd_eval->add_option("--pred", eval.pred, "prediction directory")->required()->check(CLI::ExistingDirectory);
  cmd_eval->add_option("--truth", eval.truth, "truth directory")->required()->check(CLI::ExistingDirectory);
  cmd_eval->add_option("--metrics", eval.metrics_out, "per-image metrics CSV (default stdout)");
  cmd_eval->add_option("--report", eval.report_out, "agreement report JSON (default stdout)");
  cmd_eval->add_option("--rater-table", eval.rater_table, "CSV of rater measurements for ICC")
      ->check(CLI::ExistingFile);
  cmd_eval->add_option("--bland-altman-csv", eval.ba_csv);
  cmd_eval->add_option("--bland-altman-svg", eval.ba_svg);
  cmd_eval->add_option("--method", eval.method)->capture_default_str()->check(CLI::Range(1, 3));
  cmd_eval->add_option("--section-mm", eval.section_mm)->capture_default_str();
  cmd_eval->add_option("--mm-per-pixel", eval.mm_per_pixel)->capture_default_str();
  cmd_eval->add_option("--jobs", eval.jobs, "worker threads, 0 = all cores");

  ServeArgs serve;
  auto* cmd_serve = app.add_subcommand("serve", "run the local annotation service");
  cmd_serve->add_option("--host", serve.opts.host)->capture_default_str();
  cmd_serve->add_option("--port", serve.opts.port, "defaults to $MENISCUS_PORT or 8080");
  cmd_serve->add_option("--session-dir", serve.session_dir, "persist sessions here");
  cmd_serve->add_option("--static-dir", serve.static_dir, "serve these files under /");
  cmd_serve->add_option("--threads", serve.opts.threads, "convolution workers per request, 0 = all cores");
  edge_options(cmd_serve, serve.opts.edge);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_phantom) return run_phantom(phantom);
    if (*cmd_quality) return run_quality(quality);
    if (*cmd_edge) return run_edge(edge);
    if (*cmd_annotate) return run_annotate(annotate);
    if (*cmd_measure) return run_measure(meas);
    if (*cmd_eval) return run_eval(eval);
    if (*cmd_serve) {
      if (cmd_serve->count("--port") == 0) serve.opts.port = default_port();
      return run_serve(serve);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: io: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
