#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "headpose/pnp_solver.hpp"

namespace headpose {

inline constexpr int kFeatureCount = 12;

// fake = +1, authentic = -1 in the classifier.
enum class Label { kAuthentic, kFake };

const char* label_name(Label label);
Label parse_label(const std::string& text);
inline int label_sign(Label label) { return label == Label::kFake ? 1 : -1; }

struct PosePair {
  std::string frame_id;
  HeadPose inner;  // central-landmark estimate (R_c, t_c)
  HeadPose all;    // whole-face estimate (R_a, t_a)

  // Exactly one of the two estimates is flipped.
  bool conflicting() const { return inner.flipped != all.flipped; }
};

struct FeatureVector {
  // Row-major flatten(R_a - R_c) followed by (t_a - t_c).
  std::array<double, kFeatureCount> values{};
  std::optional<Label> label;
  std::vector<std::string> subject_ids;
};

FeatureVector pose_pair_features(const PosePair& pair);

// One minus the cosine of the angle between R_a^T w and R_c^T w, w = (0,0,1).
double cosine_distance(const Mat3& rotation_all, const Mat3& rotation_inner);

// R = Rz(roll) * Ry(yaw) * Rx(pitch).
struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  // |yaw| within 1e-6 of pi/2; roll is pinned to zero.
  bool degenerate = false;
};

EulerAngles euler_decompose(const Mat3& rotation);
Mat3 euler_compose(const EulerAngles& angles);

// roll, pitch, yaw, tx, ty, tz of one estimate.
std::array<double, 6> pose_parameters(const Pose& pose);

}  // namespace headpose
