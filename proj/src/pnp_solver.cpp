#include "headpose/pnp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace headpose {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

constexpr double kMaxDamping = 1e20;

HeadPose finalize(const FaceModel3D& model, std::span<const int> indices,
                  const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                  const Pose& pose, bool converged, int iterations) {
  HeadPose out;
  out.rotation = project_to_rotation(pose.rotation).rotation;
  out.translation = pose.translation;
  Eigen::VectorXd r;
  pose_residuals(model, indices, observed, cam, out, r, nullptr);
  out.cost = r.squaredNorm();
  out.flipped = detect_flip(out);
  out.converged = converged;
  out.iterations = iterations;
  return out;
}

// Core LM loop without config validation so the corrected solver can run it
// with partial iteration budgets.
HeadPose run_lm(const FaceModel3D& model, std::span<const int> indices,
                const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                const Pose& init, const SolverConfig& config, int max_iterations) {
  Pose pose;
  pose.rotation = project_to_rotation(init.rotation).rotation;
  pose.translation = init.translation;

  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  pose_residuals(model, indices, observed, cam, pose, r, &jac);
  if (!r.allFinite() || !jac.allFinite()) {
    HeadPose last;
    static_cast<Pose&>(last) = pose;
    last.cost = std::numeric_limits<double>::infinity();
    last.flipped = detect_flip(pose);
    throw NumericalFailure("non-finite residuals at the initial pose", last);
  }
  double cost = r.squaredNorm();
  const double cost_floor = 1e-28 * static_cast<double>(indices.size());

  double damping = config.lm_initial_damping;
  int iterations = 0;
  bool converged = cost <= cost_floor;
  Eigen::VectorXd r_candidate;

  while (!converged && iterations < max_iterations) {
    const Mat6 jtj = jac.transpose() * jac;
    const Vec6 gradient = jac.transpose() * r;
    const double diag_floor = 1e-12 * std::max(jtj.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    while (!accepted && iterations < max_iterations) {
      ++iterations;
      Mat6 system = jtj;
      for (int k = 0; k < 6; ++k) system(k, k) += damping * std::max(jtj(k, k), diag_floor);
      const Vec6 delta = system.ldlt().solve(-gradient);
      if (!delta.allFinite()) {
        damping *= config.damping_up;
        if (damping > kMaxDamping) {
          converged = true;
          break;
        }
        continue;
      }
      const Pose candidate = apply_increment(pose, delta);
      pose_residuals(model, indices, observed, cam, candidate, r_candidate, nullptr);
      const double candidate_cost =
          r_candidate.allFinite() ? r_candidate.squaredNorm() : std::numeric_limits<double>::infinity();
      if (candidate_cost < cost) {
        const double relative_decrease = (cost - candidate_cost) / cost;
        pose = candidate;
        cost = candidate_cost;
        pose_residuals(model, indices, observed, cam, pose, r, &jac);
        damping = std::max(damping * config.damping_down, 1e-15);
        accepted = true;
        const double step = delta.norm();
        const double scale = pose.translation.norm() + 1.0;
        if (relative_decrease < config.convergence_tol || cost <= cost_floor ||
            step < 1e-15 * scale) {
          converged = true;
        }
      } else {
        damping *= config.damping_up;
        if (damping > kMaxDamping) {
          // No descent direction left at working precision.
          converged = true;
          break;
        }
      }
    }
  }
  return finalize(model, indices, observed, cam, pose, converged, iterations);
}

}  // namespace

void SolverConfig::validate() const {
  if (max_lm_iterations <= 0 || lm_initial_damping <= 0.0 || damping_up <= 0.0 ||
      damping_down <= 0.0 || convergence_tol <= 0.0 || correction_after_iterations <= 0) {
    throw Error(ErrorCode::kInvalidInput, "solver configuration values must be positive");
  }
  if (damping_up <= 1.0 || damping_down >= 1.0) {
    throw Error(ErrorCode::kInvalidInput, "damping_up must exceed 1 and damping_down be below 1");
  }
  if (correction_after_iterations > max_lm_iterations) {
    throw Error(ErrorCode::kInvalidInput,
                "correction_after_iterations exceeds max_lm_iterations");
  }
}

DltResult dlt_initialize(const FaceModel3D& model, std::span<const int> indices,
                         const LandmarkSet2D& observed, const CameraIntrinsics& cam) {
  const int n = static_cast<int>(indices.size());
  if (n < 6) {
    throw Error(ErrorCode::kInsufficientPoints,
                "DLT needs at least 6 correspondences, got " + std::to_string(n));
  }

  // Isotropic normalization of the model points keeps the system balanced
  // between millimeter coordinates and the homogeneous 1.
  Vec3 centroid = Vec3::Zero();
  for (int idx : indices) centroid += model.points().at(idx);
  centroid /= n;
  double spread = 0.0;
  for (int idx : indices) spread += (model.points()[idx] - centroid).squaredNorm();
  spread = std::sqrt(spread / (3.0 * n));
  if (spread <= 0.0) throw Error(ErrorCode::kInvalidInput, "DLT model points are coincident");

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (int k = 0; k < n; ++k) {
    const int idx = indices[k];
    const Vec3 p = (model.points()[idx] - centroid) / spread;
    const Vec2& obs = observed.points.at(idx);
    const double u = (obs.x() - cam.cx) / cam.fx;
    const double v = (obs.y() - cam.cy) / cam.fy;
    Eigen::Vector4d ph(p.x(), p.y(), p.z(), 1.0);
    a.block<1, 4>(2 * k, 0) = ph.transpose();
    a.block<1, 4>(2 * k, 8) = -u * ph.transpose();
    a.block<1, 4>(2 * k + 1, 4) = ph.transpose();
    a.block<1, 4>(2 * k + 1, 8) = -v * ph.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  Eigen::VectorXd null = svd.matrixV().col(11);

  DltResult out;
  // The smallest singular value carries the solution; the next one measures
  // how well it is separated from the rest of the null space.
  out.condition_number = sv(10) > 0.0 ? sv(0) / sv(10) : std::numeric_limits<double>::infinity();
  out.ill_conditioned = !(out.condition_number <= kDltIllConditioned);

  bool complete_third_column = false;
  if (out.ill_conditioned) {
    // Coplanar points leave the W column free. Pick the null-space vector
    // with the least weight there and rebuild that column from the other two.
    int first = 11;
    for (int j = 10; j >= 0 && sv(j) * kDltIllConditioned <= sv(0); --j) first = j;
    const Eigen::MatrixXd basis = svd.matrixV().rightCols(12 - first);
    Eigen::MatrixXd w_rows(3, basis.cols());
    w_rows << basis.row(2), basis.row(6), basis.row(10);
    Eigen::JacobiSVD<Eigen::MatrixXd> inner(w_rows, Eigen::ComputeFullV);
    null = basis * inner.matrixV().col(basis.cols() - 1);
    complete_third_column = true;
  }

  Eigen::Matrix<double, 3, 4> p_norm;
  p_norm.row(0) = null.segment<4>(0).transpose();
  p_norm.row(1) = null.segment<4>(4).transpose();
  p_norm.row(2) = null.segment<4>(8).transpose();

  // Undo the normalization: P = P' * [I/s, -c/s; 0, 1].
  Mat3 m = p_norm.leftCols<3>() / spread;
  Vec3 t = p_norm.col(3) - m * centroid;
  if (complete_third_column) {
    const Vec3 c = m.col(0).cross(m.col(1));
    const double norm = c.norm();
    if (norm > 0.0) m.col(2) = c * std::sqrt(m.col(0).norm() * m.col(1).norm()) / norm;
  }

  const double scale = m.row(2).norm();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::kNumericalFailure, "DLT produced a degenerate projection matrix");
  }
  m /= scale;
  t /= scale;

  int positive = 0;
  for (int idx : indices) {
    if (m.row(2).dot(model.points()[idx]) + t.z() > 0.0) ++positive;
  }
  if (2 * positive < n) {
    m = -m;
    t = -t;
  }
  out.matrix = m;
  out.translation = t;
  return out;
}

RotationProjection project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  const Vec3& s = svd.singularValues();
  const double det = (u * v.transpose()).determinant();
  Vec3 signs(1.0, 1.0, det < 0.0 ? -1.0 : 1.0);

  RotationProjection out;
  out.rotation = u * signs.asDiagonal() * v.transpose();
  const double tol = 1e-12 * std::max(s(0), std::numeric_limits<double>::min());
  if (s(1) <= tol) {
    out.ambiguous = true;
  } else if (m.determinant() < 0.0 && s(1) - s(2) <= tol) {
    out.ambiguous = true;
  }
  return out;
}

Pose apply_increment(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta) {
  Pose out;
  out.rotation = rotation_exp(delta.head<3>()) * pose.rotation;
  out.translation = pose.translation + delta.tail<3>();
  return out;
}

void pose_residuals(const FaceModel3D& model, std::span<const int> indices,
                    const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                    const Pose& pose, Eigen::VectorXd& residuals,
                    Eigen::MatrixXd* jacobian) {
  const int n = static_cast<int>(indices.size());
  residuals.resize(2 * n);
  if (jacobian) jacobian->resize(2 * n, 6);
  for (int k = 0; k < n; ++k) {
    const int idx = indices[k];
    const Vec3 rotated = pose.rotation * model.points().at(idx);
    const Vec3 x = rotated + pose.translation;
    const double inv_z = 1.0 / x.z();
    const Vec2& obs = observed.points.at(idx);
    residuals(2 * k) = x.x() * inv_z * cam.fx + cam.cx - obs.x();
    residuals(2 * k + 1) = x.y() * inv_z * cam.fy + cam.cy - obs.y();
    if (!jacobian) continue;
    Eigen::Matrix<double, 2, 3> d_proj;
    d_proj << cam.fx * inv_z, 0.0, -cam.fx * x.x() * inv_z * inv_z,
        0.0, cam.fy * inv_z, -cam.fy * x.y() * inv_z * inv_z;
    jacobian->block<2, 3>(2 * k, 0) = -d_proj * skew(rotated);
    jacobian->block<2, 3>(2 * k, 3) = d_proj;
  }
}

HeadPose lm_refine(const FaceModel3D& model, std::span<const int> indices,
                   const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                   const Pose& init, const SolverConfig& config) {
  config.validate();
  if (indices.empty()) throw Error(ErrorCode::kInvalidInput, "empty landmark index set");
  if (!init.rotation.allFinite() || !init.translation.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, "initial pose is not finite");
  }
  return run_lm(model, indices, observed, cam, init, config, config.max_lm_iterations);
}

HeadPose flip_pose(const HeadPose& pose) {
  HeadPose out = pose;
  // R * Rz(pi) negates the first two columns.
  out.rotation.col(0) = -pose.rotation.col(0);
  out.rotation.col(1) = -pose.rotation.col(1);
  out.translation = -pose.translation;
  out.flipped = !pose.flipped;
  return out;
}

bool detect_flip(const Pose& pose) { return pose.translation.z() < 0.0; }

FlipDiagnostic diagnose_flip(const Pose& pose, const FaceModel3D& model,
                             std::span<const int> indices) {
  FlipDiagnostic d;
  d.flipped = detect_flip(pose);
  for (int idx : indices) {
    if ((pose.rotation * model.points().at(idx) + pose.translation).z() < 0.0) ++d.negative_depths;
  }
  return d;
}

HeadPose refine_with_correction(const FaceModel3D& model, std::span<const int> indices,
                                const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                                const Pose& init, const SolverConfig& config) {
  config.validate();
  if (indices.empty()) throw Error(ErrorCode::kInvalidInput, "empty landmark index set");
  if (!config.correction_enabled) {
    return run_lm(model, indices, observed, cam, init, config, config.max_lm_iterations);
  }

  HeadPose current =
      run_lm(model, indices, observed, cam, init, config, config.correction_after_iterations);
  int used = current.iterations;
  bool corrected = false;

  while (true) {
    if (detect_flip(current)) {
      if (corrected) break;
      current = flip_pose(current);
      corrected = true;
    } else if (current.converged) {
      break;
    }
    const int remaining = std::max(config.max_lm_iterations - used, 0);
    HeadPose next = run_lm(model, indices, observed, cam, current, config, remaining);
    used += next.iterations;
    current = next;
    if (remaining == 0) break;
    if (!detect_flip(current)) break;
  }

  current.iterations = used;
  current.corrected = corrected;
  current.could_not_correct = detect_flip(current);
  return current;
}

HeadPose estimate_pose(const FaceModel3D& model, std::span<const int> indices,
                       const LandmarkSet2D& observed, const CameraIntrinsics& cam,
                       const SolverConfig& config) {
  config.validate();
  observed.validate();
  const DltResult dlt = dlt_initialize(model, indices, observed, cam);
  Pose init;
  init.rotation = project_to_rotation(dlt.matrix).rotation;
  init.translation = dlt.translation;
  HeadPose out = refine_with_correction(model, indices, observed, cam, init, config);
  out.ill_conditioned = dlt.ill_conditioned;
  return out;
}

}  // namespace headpose
