#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "headpose/pnp_solver.hpp"
#include "headpose/synthetic.hpp"
#include "test_support.hpp"

namespace headpose {
namespace {

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

TEST(Model, SeedZeroSatisfiesInvariants) {
  const FaceModel3D m = generate_model(0);
  EXPECT_EQ(m.points().size(), 68u);
  EXPECT_EQ(m.inner_indices(), default_inner_indices());
  EXPECT_EQ(m.all_indices(), default_all_indices());
  for (int i : m.inner_indices()) {
    EXPECT_TRUE(std::find(m.all_indices().begin(), m.all_indices().end(), i) != m.all_indices().end());
  }
}

TEST(Model, NoseProtrudesAndModelIsNearPlanar) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const FaceModel3D m = generate_model(seed);
    // Nose tip against the jaw and brow outline, both relative to the centroid.
    std::vector<double> outline;
    for (int i = 0; i <= 26; ++i) outline.push_back(std::abs(m.points()[i].z()));
    EXPECT_GT(std::abs(m.points()[30].z()), 5.0 * median(outline)) << "seed " << seed;
    EXPECT_GE(m.planarity_ratio(), 0.02) << "seed " << seed;
    EXPECT_LE(m.planarity_ratio(), 0.2) << "seed " << seed;
  }
}

TEST(Model, SeedsDiffer) {
  const FaceModel3D a = generate_model(0);
  const FaceModel3D b = generate_model(1);
  double diff = 0.0;
  for (int i = 0; i < 68; ++i) diff = std::max(diff, (a.points()[i] - b.points()[i]).norm());
  EXPECT_GT(diff, 0.1);
  const FaceModel3D again = generate_model(1);
  for (int i = 0; i < 68; ++i) EXPECT_EQ(again.points()[i], b.points()[i]);
}

TEST(SamplePose, ZeroWidthRangesGiveExactPose) {
  SceneSpec spec;
  spec.roll = spec.pitch = spec.yaw = {0.0, 0.0};
  spec.tx = spec.ty = {0.0, 0.0};
  spec.tz = {400.0, 400.0};
  std::mt19937_64 rng(1);
  const Pose p = sample_pose(spec, generate_model(0), rng);
  EXPECT_EQ(p.rotation, Mat3::Identity());
  EXPECT_EQ(p.translation, Vec3(0, 0, 400));
}

TEST(SamplePose, DepthsPositiveAndReproducible) {
  SceneSpec spec;
  spec.yaw = {-1.2, 1.2};
  spec.pitch = {-0.8, 0.8};
  spec.tz = {120.0, 200.0};
  const FaceModel3D model = generate_model(2);
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 1000; ++i) {
    const Pose p = sample_pose(spec, model, a);
    for (const Vec3& x : model.points()) EXPECT_GT((p.rotation * x + p.translation).z(), 0.0);
    EXPECT_TRUE(is_rotation(p.rotation));
    const Pose q = sample_pose(spec, model, b);
    EXPECT_EQ(p.rotation, q.rotation);
    EXPECT_EQ(p.translation, q.translation);
  }
}

TEST(SamplePose, UnsatisfiableDepthIsSpecInvalid) {
  SceneSpec spec;
  spec.pitch = {3.0, 3.1};  // facing away with the head at 20 mm
  spec.tz = {20.0, 20.0};
  std::mt19937_64 rng(3);
  try {
    sample_pose(spec, generate_model(0), rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSpecInvalid);
  }
}

TEST(Render, NoiselessUndeformedIsExactProjection) {
  SceneSpec spec;
  spec.pixel_noise = 0.0;
  const FaceModel3D model = generate_model(4);
  const CameraIntrinsics cam = approximate_intrinsics(spec.image_width, spec.image_height);
  std::mt19937_64 rng(5);
  const Pose pose = sample_pose(spec, model, rng);
  const RenderedFrame f = render_frame(model, SmoothField{}, pose, cam, spec, false, rng);
  const std::vector<Vec2> exact = project_points(model.points(), pose, cam);
  for (int i = 0; i < 68; ++i) EXPECT_EQ(f.landmarks.points[i], exact[i]);
  EXPECT_EQ(f.label, Label::kAuthentic);
}

TEST(Render, SwapMovesOnlyInnerLandmarks) {
  SceneSpec spec;
  spec.pixel_noise = 0.0;
  spec.swap_perturbation = 4.0;
  const FaceModel3D model = generate_model(6);
  const CameraIntrinsics cam = approximate_intrinsics(spec.image_width, spec.image_height);
  std::mt19937_64 rng(7);
  const SmoothField subject(model, 2.0, rng);
  const Pose pose = sample_pose(spec, model, rng);
  const RenderedFrame real = render_frame(model, subject, pose, cam, spec, false, rng);
  const RenderedFrame fake = render_frame(model, subject, pose, cam, spec, true, rng);
  EXPECT_EQ(fake.label, Label::kFake);
  const auto& inner = model.inner_indices();
  for (int i = 0; i < 68; ++i) {
    const bool is_inner = std::find(inner.begin(), inner.end(), i) != inner.end();
    if (is_inner) {
      EXPECT_NE(real.landmarks.points[i], fake.landmarks.points[i]) << i;
    } else {
      EXPECT_EQ(real.landmarks.points[i], fake.landmarks.points[i]) << i;
    }
  }
}

TEST(Render, SmoothFieldHasRequestedRms) {
  const FaceModel3D model = generate_model(8);
  std::mt19937_64 rng(8);
  const SmoothField field(model, 3.0, rng);
  double ss = 0.0;
  for (const Vec3& p : model.points()) ss += field.displacement(p).squaredNorm();
  EXPECT_NEAR(std::sqrt(ss / 68.0), 3.0, 1e-9);
  const SmoothField none(model, 0.0, rng);
  EXPECT_EQ(none.displacement(model.points()[30]), Vec3::Zero());
}

// Calibrated once against the corrected solver: the median was about 0.4
// degrees for the inner set and 0.25 for the whole face.
TEST(Render, HalfPixelNoiseKeepsRotationErrorSmall) {
  SceneSpec spec;
  spec.pixel_noise = 0.5;
  const FaceModel3D model = generate_model(0);
  const CameraIntrinsics cam = approximate_intrinsics(spec.image_width, spec.image_height);
  std::mt19937_64 rng(10);
  std::vector<double> inner_err, all_err;
  for (int i = 0; i < 1000; ++i) {
    const Pose truth = sample_pose(spec, model, rng);
    const RenderedFrame f = render_frame(model, SmoothField{}, truth, cam, spec, false, rng);
    const HeadPose a = estimate_pose(model, model.inner_indices(), f.landmarks, cam, SolverConfig{});
    const HeadPose b = estimate_pose(model, model.all_indices(), f.landmarks, cam, SolverConfig{});
    inner_err.push_back(geodesic_distance(a.rotation, truth.rotation));
    all_err.push_back(geodesic_distance(b.rotation, truth.rotation));
  }
  const double one_degree = M_PI / 180.0;
  EXPECT_LT(median(inner_err), one_degree);
  EXPECT_LT(median(all_err), one_degree);
}

TEST(Dataset, SmallBalancedDataset) {
  testing::TempDir dir;
  SceneSpec spec;
  spec.frame_count = 8;
  spec.subject_count = 2;
  spec.seed = 12;
  const DatasetManifest m = generate_dataset(spec, dir.path());
  ASSERT_EQ(m.records.size(), 8u);
  int fakes = 0;
  for (const auto& r : m.records) {
    fakes += r.label == Label::kFake;
    EXPECT_FALSE(r.subject_ids.empty());
    EXPECT_TRUE(r.truth.has_value());
    EXPECT_TRUE(std::filesystem::exists(m.landmark_path(r)));
    if (r.label == Label::kFake) EXPECT_EQ(r.subject_ids.size(), 2u);
  }
  EXPECT_EQ(fakes, 4);
  for (const char* name : {"manifest.jsonl", "model.csv", "model.json", "scene.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  const DatasetManifest loaded = load_manifest(dir / "manifest.jsonl");
  EXPECT_EQ(loaded.records.size(), 8u);
  EXPECT_EQ(load_model(dir / "model.csv").name(), generate_model(12).name());
}

TEST(Dataset, RerunIsByteIdentical) {
  testing::TempDir a, b;
  SceneSpec spec;
  spec.frame_count = 20;
  spec.subject_count = 4;
  spec.seed = 99;
  spec.swap_perturbation = 2.0;
  spec.subject_deformation = 3.0;
  generate_dataset(spec, a.path());
  generate_dataset(spec, b.path());
  size_t files = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a.path());
    EXPECT_EQ(testing::read_file(entry.path()), testing::read_file(b.path() / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 20u + 4u);
}

TEST(Dataset, OddFrameCountIsSpecInvalid) {
  testing::TempDir dir;
  SceneSpec spec;
  spec.frame_count = 7;
  try {
    generate_dataset(spec, dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSpecInvalid);
  }
}

TEST(Dataset, UnwritableLocationIsIoError) {
  testing::TempDir dir;
  testing::write_file(dir / "blocker", "not a directory");
  SceneSpec spec;
  spec.frame_count = 4;
  spec.subject_count = 2;
  try {
    generate_dataset(spec, dir / "blocker" / "out");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(Scene, JsonRoundTrip) {
  SceneSpec spec;
  spec.seed = 77;
  spec.frame_count = 40;
  spec.yaw = {-0.25, 0.75};
  spec.pixel_noise = 1.5;
  spec.balanced = false;
  const SceneSpec back = scene_from_json(scene_to_json(spec));
  EXPECT_EQ(scene_to_json(back), scene_to_json(spec));
  EXPECT_EQ(back.yaw.hi, 0.75);
  EXPECT_FALSE(back.balanced);
  try {
    scene_from_json("{\"frame_count\": \"many\"}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
  }
}

TEST(Scene, NegativeAmplitudeIsSpecInvalid) {
  SceneSpec spec;
  spec.swap_perturbation = -1.0;
  try {
    spec.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSpecInvalid);
  }
}

}  // namespace
}  // namespace headpose
