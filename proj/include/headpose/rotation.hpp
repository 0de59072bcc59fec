#pragma once

#include <Eigen/Core>

namespace headpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

// Rodrigues map from an axis-angle vector to a rotation matrix.
Mat3 rotation_exp(const Vec3& axis_angle);

// Inverse of rotation_exp; the returned angle lies in [0, pi].
Vec3 rotation_log(const Mat3& rotation);

// Angle of the relative rotation a^T b, in radians.
double geodesic_distance(const Mat3& a, const Mat3& b);

Mat3 skew(const Vec3& v);

// Largest deviation of R^T R from identity, and |det R - 1|.
struct RotationDefect {
  double orthonormality = 0.0;
  double determinant = 0.0;
};
RotationDefect rotation_defect(const Mat3& rotation);

bool is_rotation(const Mat3& rotation, double tolerance = 1e-10);

}  // namespace headpose
