#include <gtest/gtest.h>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "meniscus/phantom.hpp"
#include "meniscus/pipeline.hpp"
#include "test_util.hpp"

using namespace meniscus;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& out = "/dev/null", const fs::path& err = "/dev/null") {
  const std::string cmd = std::string(MENISCUS_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Cli, VersionAndUsageErrors) {
  testutil::TempDir dir;
  EXPECT_EQ(run("--version", dir / "v.txt"), 0);
  EXPECT_EQ(slurp(dir / "v.txt"), "meniscus 0.1.0\n");
  EXPECT_EQ(run("--no-such-flag"), 1);
  EXPECT_EQ(run("measure"), 1);
  EXPECT_EQ(run("measure x.png --method 4"), 1);
}

TEST(Cli, MeasureFailureStagesMapToExitCodes) {
  testutil::TempDir dir;
  const PhantomCase c = generate(testutil::small_phantom());
  save_mask(c.truth_combined, dir / "ok.png");
  save_mask(c.truth_pupil(), dir / "no_band.png");
  save_png(RasterImage(8, 8, 1, 0), dir / "garbage.png");
  write(dir / "bad.png", "not a png");

  EXPECT_EQ(run("measure " + (dir / "ok.png").string(), dir / "m.json"), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "m.json"))["tmh_px"], 10.0);
  EXPECT_EQ(run("measure " + (dir / "no_band.png").string()), 2);
  EXPECT_EQ(run("measure " + (dir / "bad.png").string()), 1);
  EXPECT_EQ(run("measure " + (dir / "garbage.png").string()), 2);
}

TEST(Cli, StrictQualityGateRejectsDarkImages) {
  testutil::TempDir dir;
  save_png(RasterImage(256, 256, 3, 5), dir / "dark.png");
  write(dir / "roi.json", R"({"vertices": [[10, 10], [200, 10], [200, 60], [10, 60]]})");
  EXPECT_EQ(run("quality " + (dir / "dark.png").string()), 0);
  EXPECT_EQ(run("quality --strict " + (dir / "dark.png").string(), dir / "q.txt"), 3);
  EXPECT_NE(slurp(dir / "q.txt").find("too_dark"), std::string::npos);
  EXPECT_EQ(run("annotate-apply --quality-gate strict --image " + (dir / "dark.png").string() + " --roi " +
                (dir / "roi.json").string() + " --out " + (dir / "m.png").string()),
            3);
  EXPECT_FALSE(fs::exists(dir / "m.png"));
}

TEST(Cli, AnnotateApplyMatchesLibrary) {
  testutil::TempDir dir;
  PhantomSpec s = testutil::small_phantom();
  s.dash_gap = 3;
  const PhantomCase c = generate(s);
  save_png(c.image, dir / "eye.png");
  const Polygon roi = testutil::band_roi(s);
  write(dir / "roi.json", to_json(roi).dump());
  const std::string args = "annotate-apply --image " + (dir / "eye.png").string() + " --roi " +
                           (dir / "roi.json").string() + " --pupil-point " + std::to_string(c.truth_pupil_x) + " " +
                           std::to_string(c.truth_pupil_y) + " --out " + (dir / "mask.png").string();
  ASSERT_EQ(run(args, dir / "summary.json"), 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_TRUE(summary["repair"]["reached_fixpoint"].get<bool>());

  const AnnotateResult want = annotate_apply(c.image, {roi}, PupilAnnotation{Eigen::Vector2i(c.truth_pupil_x, c.truth_pupil_y)});
  EXPECT_EQ(load_mask(dir / "mask.png"), want.combined);
  EXPECT_EQ(summary["mask_pixels"], want.combined.count());
}

TEST(Cli, PhantomMeasureAndEvalRoundTrip) {
  testutil::TempDir dir;
  ASSERT_EQ(run("phantom --n 4 --seed 7 --out " + (dir / "suite").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "suite" / "images" / "phantom_0000.png"));
  EXPECT_TRUE(fs::exists(dir / "suite" / "truth" / "phantom_0003.png"));
  const std::string manifest = slurp(dir / "suite" / "manifest.csv");
  EXPECT_EQ(std::count(manifest.begin(), manifest.end(), '\n'), 5);

  const std::string truth = (dir / "suite" / "truth").string();
  ASSERT_EQ(run("measure " + truth + " --manifest " + (dir / "suite" / "manifest.csv").string(), dir / "m.csv",
                dir / "m.err"),
            0);
  EXPECT_NE(slurp(dir / "m.err").find("acc 1 (4/4"), std::string::npos);
  EXPECT_EQ(slurp(dir / "m.csv").rfind("image_id,method", 0), 0u);

  ASSERT_EQ(run("eval --pred " + truth + " --truth " + truth + " --metrics " + (dir / "metrics.csv").string() +
                " --report " + (dir / "report.json").string()),
            0);
  std::istringstream rows(slurp(dir / "metrics.csv"));
  std::string line;
  std::getline(rows, line);
  int n = 0;
  while (std::getline(rows, line)) {
    const auto first = line.find(','), second = line.find(',', first + 1);
    EXPECT_EQ(std::stod(line.substr(first + 1, second - first - 1)), 1.0) << line;
    ++n;
  }
  EXPECT_EQ(n, 4);
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["agreement"]["acc"], 1.0);
}

TEST(Cli, EdgeWritesKernels) {
  testutil::TempDir dir;
  save_png(generate(testutil::small_phantom()).image, dir / "eye.png");
  ASSERT_EQ(run("edge --image " + (dir / "eye.png").string() + " --out " + (dir / "e.png").string() +
                " --kernels-out " + (dir / "k.txt").string() + " --k1 5 --k2 3"),
            0);
  EXPECT_EQ(load_png(dir / "e.png").width(), 768);
  EXPECT_NE(slurp(dir / "k.txt").find("# edo k1=5"), std::string::npos);
  EXPECT_EQ(run("edge --image " + (dir / "eye.png").string() + " --out " + (dir / "e.png").string() + " --k1 4"), 1);
}
