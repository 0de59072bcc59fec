#pragma once

#include <span>

#include <Eigen/Core>

#include "headpose/error.hpp"
#include "headpose/face_camera.hpp"

namespace headpose {

struct SolverConfig {
  int max_lm_iterations = 100;
  double lm_initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  // Relative cost decrease below which an accepted step ends the refinement.
  double convergence_tol = 1e-10;
  bool correction_enabled = true;
  // Flipping a fully converged flipped minimum can land in a wrong frontal
  // basin at large apparent yaw, so the check runs early.
  int correction_after_iterations = 3;

  // Throws Error(kInvalidInput) on a non-positive value or when correction
  // is scheduled after the iteration budget.
  void validate() const;
};

struct HeadPose : Pose {
  double cost = 0.0;
  bool flipped = false;
  bool converged = false;
  int iterations = 0;
  // Diagnostics from the corrected solver.
  bool corrected = false;
  bool could_not_correct = false;
  bool ill_conditioned = false;
};

class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& message, HeadPose last_pose)
      : Error(ErrorCode::kNumericalFailure, message), last_pose_(std::move(last_pose)) {}

  const HeadPose& last_pose() const { return last_pose_; }

 private:
  HeadPose last_pose_;
};

struct DltResult {
  // Linear [M | t] estimate; the third row of M has unit norm.
  Mat3 matrix = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double condition_number = 0.0;
  bool ill_conditioned = false;
};

inline constexpr double kDltIllConditioned = 1e12;

DltResult dlt_initialize(const FaceModel3D& model, std::span<const int> indices,
                         const LandmarkSet2D& observed, const CameraIntrinsics& cam);

struct RotationProjection {
  Mat3 rotation = Mat3::Identity();
  // Set when the input is rank deficient enough that the nearest rotation is
  // not unique.
  bool ambiguous = false;
};

// Nearest rotation in the Frobenius norm.
RotationProjection project_to_rotation(const Mat3& m);

/// Levenberg-Marquardt refinement of the reprojection cost starting from
/// `init`. The rotation is updated through left-multiplied axis-angle
/// increments. Throws NumericalFailure if a residual becomes non-finite.
HeadPose lm_refine(const FaceModel3D& model, std::span<const int> indices,
                   const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                   const Pose& init, const SolverConfig& config);

// Planar counterpart (R * Rz(pi), -t). Projects identically for a model with
// W = 0 everywhere.
HeadPose flip_pose(const HeadPose& pose);

// True iff the translation's z-component is negative.
bool detect_flip(const Pose& pose);

struct FlipDiagnostic {
  bool flipped = false;
  int negative_depths = 0;
};
FlipDiagnostic diagnose_flip(const Pose& pose, const FaceModel3D& model,
                             std::span<const int> indices);

/// LM refinement from `init` with the flip correction applied after
/// `correction_after_iterations` steps when enabled.
HeadPose refine_with_correction(const FaceModel3D& model, std::span<const int> indices,
                                const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                                const Pose& init, const SolverConfig& config);

// DLT, projection onto SO(3), then refine_with_correction.
HeadPose estimate_pose(const FaceModel3D& model, std::span<const int> indices,
                       const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                       const SolverConfig& config);

// Stacked (x, y) pixel residuals and, optionally, their Jacobian with respect
// to (axis-angle increment applied on the left of R, translation).
void pose_residuals(const FaceModel3D& model, std::span<const int> indices,
                    const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                    const Pose& pose, Eigen::VectorXd& residuals,
                    Eigen::MatrixXd* jacobian);

// Applies the 6-vector increment used by the LM parametrization.
Pose apply_increment(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta);

}  // namespace headpose
