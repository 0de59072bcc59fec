#include "headpose/rotation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

namespace headpose {

Mat3 rot_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 rot_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 rotation_exp(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta < 1e-12) {
    // Second-order Taylor expansion is exact to machine precision here.
    const Mat3 k = skew(axis_angle);
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  return Eigen::AngleAxisd(theta, axis_angle / theta).toRotationMatrix();
}

Vec3 rotation_log(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

double geodesic_distance(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  // acos loses precision near 0; atan2 of (|sin|, cos) does not.
  const Vec3 w(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double sin_theta = 0.5 * w.norm();
  const double cos_theta = 0.5 * (rel.trace() - 1.0);
  return std::atan2(sin_theta, cos_theta);
}

RotationDefect rotation_defect(const Mat3& rotation) {
  RotationDefect d;
  d.orthonormality = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  d.determinant = std::abs(rotation.determinant() - 1.0);
  return d;
}

bool is_rotation(const Mat3& rotation, double tolerance) {
  if (!rotation.allFinite()) return false;
  const RotationDefect d = rotation_defect(rotation);
  return d.orthonormality <= tolerance && d.determinant <= tolerance;
}

}  // namespace headpose
