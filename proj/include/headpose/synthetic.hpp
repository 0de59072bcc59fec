#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "headpose/dataset.hpp"
#include "headpose/face_camera.hpp"

namespace headpose {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Parameters of a synthetic dataset. Angles in radians, lengths in mm,
/// noise in pixels.
struct SceneSpec {
  std::uint64_t seed = 0;
  int frame_count = 200;
  int subject_count = 10;
  Interval roll{-0.3, 0.3};
  Interval pitch{-0.3, 0.3};
  Interval yaw{-0.5, 0.5};
  Interval tx{-60.0, 60.0};
  Interval ty{-40.0, 40.0};
  Interval tz{450.0, 750.0};
  double pixel_noise = 0.5;
  // RMS displacement applied to the inner landmarks of fake frames.
  double swap_perturbation = 0.0;
  // RMS of each subject's smooth shape deviation from the reference model.
  double subject_deformation = 0.0;
  int image_width = 1280;
  int image_height = 720;
  bool balanced = true;

  // Throws Error(kSpecInvalid).
  void validate() const;
};

// Procedural 68-landmark face: jaw and brows on a shallow shell, protruding
// nose, near-planar overall. Deterministic per seed.
FaceModel3D generate_model(std::uint64_t seed);

// Whole-face set: jaw, brows, nose, mouth corners. Inner set: brows, nose,
// mouth corners. Eye and lip contours are left out of both.
std::vector<int> default_inner_indices();
std::vector<int> default_all_indices();

/// Smooth low-order displacement field over the face plane. amplitude() is
/// the RMS displacement over the model points it was calibrated on.
class SmoothField {
 public:
  SmoothField() { coefficients_.fill(Vec3::Zero()); }
  SmoothField(const FaceModel3D& model, double amplitude, std::mt19937_64& rng);

  Vec3 displacement(const Vec3& point) const;
  double amplitude() const { return amplitude_; }

 private:
  std::array<Vec3, 5> coefficients_;  // u, v, uv, u^2, v^2
  double half_width_ = 1.0;
  double half_height_ = 1.0;
  double amplitude_ = 0.0;
};

Pose sample_pose(const SceneSpec& spec, const FaceModel3D& model, std::mt19937_64& rng);

struct RenderedFrame {
  LandmarkSet2D landmarks;
  Pose truth;
  Label label = Label::kAuthentic;
};

/// Deforms the model by the subject field, displaces the inner landmarks of a
/// fake frame by `swap_field` (or a field drawn from `rng` when null), projects
/// and adds Gaussian pixel noise.
RenderedFrame render_frame(const FaceModel3D& model, const SmoothField& subject_deformation,
                           const Pose& pose, const CameraIntrinsics& cam,
                           const SceneSpec& spec, bool fake, std::mt19937_64& rng,
                           const SmoothField* swap_field = nullptr);

// Writes model.csv, model.json, scene.json, landmarks/*.csv and manifest.jsonl.
DatasetManifest generate_dataset(const SceneSpec& spec, const std::filesystem::path& out_dir);

std::string scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const std::string& text);

// Subject token naming used by the generator.
std::string subject_token(int subject);
std::string source_token(int subject);

}  // namespace headpose
