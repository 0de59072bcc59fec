#include "headpose/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "headpose/features.hpp"
#include "json.hpp"
#include "seeding.hpp"
#include "text_util.hpp"

namespace headpose {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxPoseAttempts = 1000;
constexpr int kMaxRenderAttempts = 100;

// Raw landmark layout before jitter and centering: U right, V up, W toward
// the viewer.
std::vector<Vec3> base_layout() {
  std::vector<Vec3> p(kLandmarkCount);
  for (int k = 0; k <= 16; ++k) {
    const double a = kPi + kPi * k / 16.0;
    const double s = std::sin(a);
    p[k] = Vec3(70.0 * std::cos(a), 5.0 + 72.0 * s, 1.0 + 4.0 * s * s);
  }
  const double arch[5] = {0.0, 0.7, 1.0, 0.7, 0.0};
  for (int j = 0; j < 5; ++j) {
    p[17 + j] = Vec3(-55.0 + 9.0 * j, 36.0 + 6.0 * arch[j], 6.0 + 2.0 * arch[j]);
    p[22 + j] = Vec3(19.0 + 9.0 * j, 36.0 + 6.0 * arch[4 - j], 6.0 + 2.0 * arch[4 - j]);
  }
  const double bridge_v[4] = {28.0, 18.0, 8.0, -2.0};
  const double bridge_w[4] = {10.0, 17.0, 24.0, 32.0};
  for (int j = 0; j < 4; ++j) p[27 + j] = Vec3(0.0, bridge_v[j], bridge_w[j]);
  const double base_u[5] = {-14.0, -7.0, 0.0, 7.0, 14.0};
  const double base_v[5] = {-10.0, -12.0, -13.0, -12.0, -10.0};
  const double base_w[5] = {11.0, 16.0, 19.0, 16.0, 11.0};
  for (int j = 0; j < 5; ++j) p[31 + j] = Vec3(base_u[j], base_v[j], base_w[j]);
  const double eye_a[6] = {kPi, 2 * kPi / 3, kPi / 3, 0.0, -kPi / 3, -2 * kPi / 3};
  for (int j = 0; j < 6; ++j) {
    p[36 + j] = Vec3(-32.0 + 13.0 * std::cos(eye_a[j]), 24.0 + 5.0 * std::sin(eye_a[j]), 5.0);
    p[42 + j] = Vec3(32.0 + 13.0 * std::cos(eye_a[j]), 24.0 + 5.0 * std::sin(eye_a[j]), 5.0);
  }
  for (int j = 0; j < 12; ++j) {
    const double a = kPi - kPi * j / 6.0;
    p[48 + j] = Vec3(26.0 * std::cos(a), -40.0 + 11.0 * std::sin(a), 7.0 + 4.0 * std::abs(std::sin(a)));
  }
  for (int j = 0; j < 8; ++j) {
    const double a = kPi - kPi * j / 4.0;
    p[60 + j] = Vec3(16.0 * std::cos(a), -40.0 + 4.0 * std::sin(a), 9.0);
  }
  return p;
}

void check_interval(const Interval& i, const char* name) {
  if (!(std::isfinite(i.lo) && std::isfinite(i.hi) && i.lo <= i.hi)) {
    throw Error(ErrorCode::kSpecInvalid, std::string("invalid range for ") + name);
  }
}

double draw(const Interval& i, std::mt19937_64& rng) {
  if (i.lo == i.hi) return i.lo;
  return std::uniform_real_distribution<double>(i.lo, i.hi)(rng);
}

}  // namespace

void SceneSpec::validate() const {
  if (frame_count < 1) throw Error(ErrorCode::kSpecInvalid, "frame count must be positive");
  if (subject_count < 1) throw Error(ErrorCode::kSpecInvalid, "subject count must be positive");
  check_interval(roll, "roll");
  check_interval(pitch, "pitch");
  check_interval(yaw, "yaw");
  check_interval(tx, "tx");
  check_interval(ty, "ty");
  check_interval(tz, "tz");
  if (tz.lo <= 0.0) throw Error(ErrorCode::kSpecInvalid, "translation depth must be positive");
  if (!(pixel_noise >= 0.0) || !(swap_perturbation >= 0.0) || !(subject_deformation >= 0.0)) {
    throw Error(ErrorCode::kSpecInvalid, "noise and perturbation amplitudes must be non-negative");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw Error(ErrorCode::kSpecInvalid, "image size must be positive");
  }
  if (balanced) {
    if (frame_count % 2 != 0) {
      throw Error(ErrorCode::kSpecInvalid, "balanced output needs an even frame count");
    }
    if (subject_count < 2 || subject_count % 2 != 0) {
      throw Error(ErrorCode::kSpecInvalid, "balanced output needs an even subject count");
    }
  }
}

std::vector<int> default_inner_indices() {
  std::vector<int> idx;
  for (int i = 17; i <= 35; ++i) idx.push_back(i);  // brows and nose
  idx.push_back(48);
  idx.push_back(54);
  return idx;
}

std::vector<int> default_all_indices() {
  std::vector<int> idx;
  for (int i = 0; i <= 35; ++i) idx.push_back(i);  // jaw, brows, nose
  idx.push_back(48);
  idx.push_back(54);
  return idx;
}

FaceModel3D generate_model(std::uint64_t seed) {
  std::mt19937_64 rng(detail::derive_seed(seed, "model"));
  std::normal_distribution<double> jitter(0.0, 0.8);
  const double scale = std::uniform_real_distribution<double>(0.95, 1.05)(rng);
  std::vector<Vec3> points = base_layout();
  Vec3 centroid = Vec3::Zero();
  for (Vec3& p : points) {
    p = scale * p + Vec3(jitter(rng), jitter(rng), 0.3 * jitter(rng));
    centroid += p;
  }
  centroid /= kLandmarkCount;
  for (Vec3& p : points) p -= centroid;
  return FaceModel3D(std::move(points), default_inner_indices(), default_all_indices(),
                     "procedural-" + std::to_string(seed));
}

SmoothField::SmoothField(const FaceModel3D& model, double amplitude, std::mt19937_64& rng)
    : amplitude_(amplitude) {
  double max_u = 0.0, max_v = 0.0;
  for (const Vec3& p : model.points()) {
    max_u = std::max(max_u, std::abs(p.x()));
    max_v = std::max(max_v, std::abs(p.y()));
  }
  half_width_ = std::max(max_u, 1e-9);
  half_height_ = std::max(max_v, 1e-9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Vec3& c : coefficients_) c = Vec3(gauss(rng), gauss(rng), gauss(rng));
  double sum_sq = 0.0;
  for (const Vec3& p : model.points()) sum_sq += displacement(p).squaredNorm();
  const double rms = std::sqrt(sum_sq / kLandmarkCount);
  const double factor = (amplitude > 0.0 && rms > 0.0) ? amplitude / rms : 0.0;
  for (Vec3& c : coefficients_) c *= factor;
}

Vec3 SmoothField::displacement(const Vec3& point) const {
  const double u = point.x() / half_width_;
  const double v = point.y() / half_height_;
  return coefficients_[0] * u + coefficients_[1] * v + coefficients_[2] * (u * v) +
         coefficients_[3] * (u * u) + coefficients_[4] * (v * v);
}

Pose sample_pose(const SceneSpec& spec, const FaceModel3D& model, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < kMaxPoseAttempts; ++attempt) {
    EulerAngles e;
    e.roll = draw(spec.roll, rng);
    e.pitch = draw(spec.pitch, rng);
    e.yaw = draw(spec.yaw, rng);
    Pose pose;
    pose.rotation = euler_compose(e);
    pose.translation = Vec3(draw(spec.tx, rng), draw(spec.ty, rng), draw(spec.tz, rng));
    bool in_front = true;
    for (const Vec3& p : model.points()) {
      if ((pose.rotation * p + pose.translation).z() <= 0.0) {
        in_front = false;
        break;
      }
    }
    if (in_front) return pose;
  }
  throw Error(ErrorCode::kSpecInvalid, "pose ranges do not keep the face in front of the camera");
}

RenderedFrame render_frame(const FaceModel3D& model, const SmoothField& subject_deformation,
                           const Pose& pose, const CameraIntrinsics& cam,
                           const SceneSpec& spec, bool fake, std::mt19937_64& rng,
                           const SmoothField* swap_field) {
  std::vector<Vec3> points = model.points();
  for (Vec3& p : points) p += subject_deformation.displacement(p);
  if (fake) {
    SmoothField drawn;
    if (!swap_field) {
      drawn = SmoothField(model, spec.swap_perturbation, rng);
      swap_field = &drawn;
    }
    for (int idx : model.inner_indices()) {
      points[idx] += swap_field->displacement(model.points()[idx]);
    }
  }
  for (const Vec3& p : points) {
    if ((pose.rotation * p + pose.translation).z() <= 0.0) {
      throw Error(ErrorCode::kProjectionSingularity, "rendered landmark behind the camera");
    }
  }
  RenderedFrame frame;
  frame.truth = pose;
  frame.label = fake ? Label::kFake : Label::kAuthentic;
  frame.landmarks.points = project_points(points, pose, cam);
  frame.landmarks.image_width = spec.image_width;
  frame.landmarks.image_height = spec.image_height;
  if (spec.pixel_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.pixel_noise);
    for (Vec2& p : frame.landmarks.points) {
      p.x() += noise(rng);
      p.y() += noise(rng);
    }
  }
  return frame;
}

std::string subject_token(int subject) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "subj%03d", subject);
  return buf;
}

std::string source_token(int subject) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "src%03d", subject);
  return buf;
}

DatasetManifest generate_dataset(const SceneSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "landmarks", ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  const FaceModel3D model = generate_model(spec.seed);
  save_model(model, out_dir / "model.csv");
  detail::write_text(out_dir / "scene.json", scene_to_json(spec));
  const CameraIntrinsics cam = approximate_intrinsics(spec.image_width, spec.image_height);

  // Odd subjects appear only in fake frames, each with its own swap source.
  std::vector<SmoothField> deformation(spec.subject_count);
  std::vector<SmoothField> swap(spec.subject_count);
  for (int s = 0; s < spec.subject_count; ++s) {
    std::mt19937_64 subject_rng(detail::derive_seed(spec.seed, "subject", subject_token(s)));
    deformation[s] = SmoothField(model, spec.subject_deformation, subject_rng);
    std::mt19937_64 source_rng(detail::derive_seed(spec.seed, "source", source_token(s)));
    swap[s] = SmoothField(model, spec.swap_perturbation, source_rng);
  }

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (int k = 0; k < spec.frame_count; ++k) {
    const int s = k % spec.subject_count;
    const bool fake = s % 2 == 1;
    char id[32];
    std::snprintf(id, sizeof(id), "f%05d", k);
    std::mt19937_64 rng(detail::derive_seed(spec.seed, "frame", id));

    RenderedFrame frame;
    bool rendered = false;
    for (int attempt = 0; attempt < kMaxRenderAttempts && !rendered; ++attempt) {
      const Pose pose = sample_pose(spec, model, rng);
      try {
        frame = render_frame(model, deformation[s], pose, cam, spec, fake, rng, &swap[s]);
        rendered = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kProjectionSingularity) throw;
      }
    }
    if (!rendered) throw Error(ErrorCode::kSpecInvalid, std::string("could not render frame ") + id);

    ManifestRecord rec;
    rec.frame_id = id;
    rec.label = frame.label;
    rec.subject_ids.push_back(subject_token(s));
    if (fake) rec.subject_ids.push_back(source_token(s));
    rec.landmark_file = std::string("landmarks/") + id + ".csv";
    rec.image_width = spec.image_width;
    rec.image_height = spec.image_height;
    rec.truth = frame.truth;
    save_landmarks(frame.landmarks, out_dir / rec.landmark_file);
    manifest.records.push_back(std::move(rec));
  }
  save_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

std::string scene_to_json(const SceneSpec& spec) {
  nlohmann::ordered_json doc;
  const auto range = [](const Interval& i) { return nlohmann::ordered_json::array({i.lo, i.hi}); };
  doc["seed"] = spec.seed;
  doc["frame_count"] = spec.frame_count;
  doc["subject_count"] = spec.subject_count;
  doc["roll"] = range(spec.roll);
  doc["pitch"] = range(spec.pitch);
  doc["yaw"] = range(spec.yaw);
  doc["tx"] = range(spec.tx);
  doc["ty"] = range(spec.ty);
  doc["tz"] = range(spec.tz);
  doc["pixel_noise"] = spec.pixel_noise;
  doc["swap_perturbation"] = spec.swap_perturbation;
  doc["subject_deformation"] = spec.subject_deformation;
  doc["image_width"] = spec.image_width;
  doc["image_height"] = spec.image_height;
  doc["balanced"] = spec.balanced;
  return doc.dump(2) + "\n";
}

SceneSpec scene_from_json(const std::string& text) {
  try {
    const nlohmann::json doc = nlohmann::json::parse(text);
    SceneSpec spec;
    const auto range = [&](const char* key, Interval& out) {
      if (!doc.contains(key)) return;
      const auto& v = doc[key];
      if (!v.is_array() || v.size() != 2) {
        throw Error(ErrorCode::kParse, std::string("scene field '") + key + "' must be [lo, hi]");
      }
      out = {v[0].get<double>(), v[1].get<double>()};
    };
    spec.seed = doc.value("seed", spec.seed);
    spec.frame_count = doc.value("frame_count", spec.frame_count);
    spec.subject_count = doc.value("subject_count", spec.subject_count);
    range("roll", spec.roll);
    range("pitch", spec.pitch);
    range("yaw", spec.yaw);
    range("tx", spec.tx);
    range("ty", spec.ty);
    range("tz", spec.tz);
    spec.pixel_noise = doc.value("pixel_noise", spec.pixel_noise);
    spec.swap_perturbation = doc.value("swap_perturbation", spec.swap_perturbation);
    spec.subject_deformation = doc.value("subject_deformation", spec.subject_deformation);
    spec.image_width = doc.value("image_width", spec.image_width);
    spec.image_height = doc.value("image_height", spec.image_height);
    spec.balanced = doc.value("balanced", spec.balanced);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("invalid scene JSON: ") + e.what());
  }
}

}  // namespace headpose
