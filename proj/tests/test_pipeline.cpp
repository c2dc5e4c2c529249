#include <gtest/gtest.h>

#include "meniscus/height.hpp"
#include "meniscus/phantom.hpp"
#include "meniscus/pipeline.hpp"
#include "test_util.hpp"

using namespace meniscus;

namespace {

PhantomSpec small_spec() {
  PhantomSpec s;
  s.height = 512;
  s.width = 768;
  s.pupil_x = 384;
  s.pupil_y = 150;
  s.band_row = 330;
  s.band_half_span = 300;
  return s;
}

}  // namespace

TEST(Mapping, ExitCodes) {
  for (auto k : {ErrorKind::kInvalidArgument, ErrorKind::kDimensionMismatch, ErrorKind::kIo, ErrorKind::kDecode,
                 ErrorKind::kEmptyInput, ErrorKind::kGeometry})
    EXPECT_EQ(exit_code(k), 1) << to_string(k);
  for (auto k : {ErrorKind::kMissingPupil, ErrorKind::kMissingMeniscus, ErrorKind::kEmptySection,
                 ErrorKind::kUnderdetermined, ErrorKind::kNotConverged, ErrorKind::kUndefined})
    EXPECT_EQ(exit_code(k), 2) << to_string(k);
}

TEST(Mapping, HttpStatus) {
  EXPECT_EQ(http_status(ErrorKind::kDecode), 400);
  EXPECT_EQ(http_status(ErrorKind::kEmptyInput), 400);
  EXPECT_EQ(http_status(ErrorKind::kGeometry), 422);
  EXPECT_EQ(http_status(ErrorKind::kMissingMeniscus), 422);
  EXPECT_EQ(http_status(ErrorKind::kInvalidArgument), 422);
  EXPECT_EQ(http_status(ErrorKind::kIo), 500);
}

TEST(Json, PupilAndRoiForms) {
  const auto point = pupil_annotation_from_json(nlohmann::json::parse(R"({"point": [3, 4]})"));
  ASSERT_TRUE(std::holds_alternative<Eigen::Vector2i>(point));
  EXPECT_EQ(to_json(point)["point"][1], 4);
  const auto poly = pupil_annotation_from_json(nlohmann::json::parse(R"({"vertices": [[0,0],[5,0],[5,5]]})"));
  EXPECT_TRUE(std::holds_alternative<Polygon>(poly));
  EXPECT_THROW(pupil_annotation_from_json(nlohmann::json::parse(R"({"point": [3]})")), Error);

  const auto one = roi_from_json(nlohmann::json::parse(R"({"vertices": [[0,0],[9,0],[9,9],[0,9]]})"));
  EXPECT_EQ(one.size(), 1u);
  const auto two = roi_from_json(roi_to_json({one[0], one[0]}));
  EXPECT_EQ(two.size(), 2u);
  EXPECT_THROW(roi_from_json(nlohmann::json::parse(R"({"polygons": []})")), Error);
  EXPECT_THROW(roi_from_json(nlohmann::json::parse(R"({"vertices": [[0,0],[1,1]]})")), Error);
}

TEST(Json, EdgeConfig) {
  const EdgeConfig c = edge_config_from_json(nlohmann::json::parse(R"({"k1": 15, "k2": 5})"));
  EXPECT_EQ(c.k1, 15);
  EXPECT_EQ(c.k2, 5);
  EXPECT_EQ(edge_config_from_json(to_json(c)), c);
  EXPECT_THROW(edge_config_from_json(nlohmann::json::parse(R"({"k1": 4})")), Error);
  EXPECT_THROW(edge_config_from_json(nlohmann::json::parse(R"({"k1": "x"})")), Error);
}

TEST(Pupil, PointSeedRecoversDisk) {
  const PhantomCase c = generate(small_spec());
  const RealPlane gray = to_gray(c.image);
  const BinaryMask got = pupil_from_point(gray, {c.truth_pupil_x, c.truth_pupil_y});
  EXPECT_TRUE((got.data() == c.truth_pupil().data()).all());
  EXPECT_THROW(pupil_from_point(gray, {-1, 0}), Error);
}

TEST(Pupil, PolygonRasterizes) {
  const RealPlane gray = RealPlane::Zero(20, 20);
  const BinaryMask m = pupil_mask(gray, rectangle(2, 2, 8, 8));
  EXPECT_GT(m.count(), 0);
  EXPECT_EQ(m.tag(), MaskClass::kPupil);
  EXPECT_THROW(pupil_mask(gray, rectangle(2, 2, 30, 8)), Error);
}

TEST(Binarize, ThresholdNeverNegativeAndClipped) {
  const PhantomCase c = generate(small_spec());
  const RealPlane edge = edge_enhance(to_gray(c.image), EdgeConfig{});
  const Polygon roi = testutil::band_roi(c.spec);
  double t = -1;
  const BinaryMask m = binarize_roi(edge, {roi}, &t);
  EXPECT_GE(t, 0.0);
  const BinaryMask inside = rasterize(roi, m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.test(y, x)) ASSERT_TRUE(inside.test(y, x));
  EXPECT_THROW(binarize_roi(edge, {rectangle(5000, 5000, 5001, 5001)}), Error);
}

TEST(Annotate, RecoversBandThickness) {
  for (auto profile : {BandProfile::kFlat, BandProfile::kWedge, BandProfile::kArc}) {
    PhantomSpec s = small_spec();
    s.profile = profile;
    s.thickness = 12;
    s.band_half_span = 250;
    s.dash_gap = 4;
    const PhantomCase c = generate(s);
    RepairConfig repair;
    repair.iterate_to_fixpoint = true;
    const AnnotateResult r = annotate_apply(c.image, {testutil::band_roi(s)},
                                            PupilAnnotation{Eigen::Vector2i(c.truth_pupil_x, c.truth_pupil_y)}, repair);
    EXPECT_TRUE(r.repair.reached_fixpoint);
    const TmhResult m = measure(r.combined, 1, GeometryConfig{});
    EXPECT_LE(std::abs(m.tmh_px - c.truth_tmh_px), 3.0) << to_string(profile);
  }
}

TEST(Annotate, DeterministicAcrossThreadCounts) {
  PhantomSpec s = small_spec();
  s.noise_sigma = 6;
  s.seed = 21;
  const PhantomCase c = generate(s);
  const std::vector<Polygon> roi{testutil::band_roi(s)};
  const AnnotateResult a = annotate_apply(c.image, roi, std::nullopt, {}, {}, 1);
  const AnnotateResult b = annotate_apply(c.image, roi, std::nullopt, {}, {}, 4);
  EXPECT_EQ(a.combined, b.combined);
  EXPECT_EQ(a.threshold, b.threshold);
}

TEST(Annotate, RejectsMismatchedEdgeMap) {
  const RealPlane gray = RealPlane::Zero(10, 10), edge = RealPlane::Zero(10, 11);
  EXPECT_THROW(annotate_from_edge(gray, edge, {rectangle(0, 0, 5, 5)}, std::nullopt, {}), Error);
}
