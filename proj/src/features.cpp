#include "headpose/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace headpose {

const char* label_name(Label label) { return label == Label::kFake ? "fake" : "authentic"; }

Label parse_label(const std::string& text) {
  if (text == "fake") return Label::kFake;
  if (text == "authentic") return Label::kAuthentic;
  throw Error(ErrorCode::kParse, "unknown label '" + text + "'");
}

FeatureVector pose_pair_features(const PosePair& pair) {
  const auto finite = [](const HeadPose& p) {
    return p.rotation.allFinite() && p.translation.allFinite();
  };
  if (!finite(pair.inner) || !finite(pair.all)) {
    throw Error(ErrorCode::kInvalidInput, "non-finite pose in frame '" + pair.frame_id + "'");
  }
  FeatureVector out;
  const Mat3 dr = pair.all.rotation - pair.inner.rotation;
  const Vec3 dt = pair.all.translation - pair.inner.translation;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.values[3 * r + c] = dr(r, c);
  }
  for (int k = 0; k < 3; ++k) out.values[9 + k] = dt(k);
  return out;
}

double cosine_distance(const Mat3& rotation_all, const Mat3& rotation_inner) {
  // R^T w is the third row of R.
  const Vec3 a = rotation_all.row(2).transpose();
  const Vec3 c = rotation_inner.row(2).transpose();
  const double d = 1.0 - a.dot(c) / (a.norm() * c.norm());
  return std::clamp(d, 0.0, 2.0);
}

EulerAngles euler_decompose(const Mat3& r) {
  EulerAngles e;
  e.yaw = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  if (std::abs(std::abs(e.yaw) - std::numbers::pi / 2) <= 1e-6) {
    e.degenerate = true;
    e.roll = 0.0;
    e.pitch = std::atan2(-r(1, 2), r(1, 1));
    return e;
  }
  e.pitch = std::atan2(r(2, 1), r(2, 2));
  e.roll = std::atan2(r(1, 0), r(0, 0));
  return e;
}

Mat3 euler_compose(const EulerAngles& angles) {
  return rot_z(angles.roll) * rot_y(angles.yaw) * rot_x(angles.pitch);
}

std::array<double, 6> pose_parameters(const Pose& pose) {
  const EulerAngles e = euler_decompose(pose.rotation);
  return {e.roll, e.pitch, e.yaw, pose.translation.x(), pose.translation.y(),
          pose.translation.z()};
}

}  // namespace headpose
