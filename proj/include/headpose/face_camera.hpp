#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "headpose/rotation.hpp"

namespace headpose {

inline constexpr int kLandmarkCount = 68;

enum class LandmarkSubset { kInner, kAll };

const char* subset_name(LandmarkSubset subset);
LandmarkSubset parse_subset(const std::string& name);

// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

// Principal point at the image center, focal lengths equal to the image width.
CameraIntrinsics approximate_intrinsics(int image_width, int image_height);

// Rigid transform from model coordinates (mm) into the camera frame.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

/// Reference 3D face: 68 landmarks in millimeters, centered on the face, with
/// the face looking along +W. The two index sets select the landmarks used for
/// the inner-face and whole-face pose estimates.
class FaceModel3D {
 public:
  /// Validates every invariant; throws Error(kInvalidInput) on violation.
  FaceModel3D(std::vector<Vec3> points, std::vector<int> inner_indices,
              std::vector<int> all_indices, std::string name);

  const std::vector<Vec3>& points() const { return points_; }
  const std::vector<int>& inner_indices() const { return inner_; }
  const std::vector<int>& all_indices() const { return all_; }
  const std::vector<int>& indices(LandmarkSubset subset) const;
  const std::string& name() const { return name_; }

  /// Mean |W| over the whole-face set divided by the larger of the U and V
  /// extents. Zero for an exactly planar model.
  double planarity_ratio() const;

 private:
  std::vector<Vec3> points_;
  std::vector<int> inner_;
  std::vector<int> all_;
  std::string name_;
};

struct LandmarkSet2D {
  std::vector<Vec2> points;
  int image_width = 0;
  int image_height = 0;

  // Throws Error(kInvalidInput) unless there are 68 finite points.
  void validate() const;
};

std::vector<Vec2> project_points(std::span<const Vec3> model_points, const Pose& pose,
                                 const CameraIntrinsics& cam);

std::vector<Vec2> project(const FaceModel3D& model, std::span<const int> indices,
                          const Pose& pose, const CameraIntrinsics& cam);

// Sum of squared pixel distances over the index set.
double reprojection_cost(const FaceModel3D& model, std::span<const int> indices,
                         const Pose& pose, const CameraIntrinsics& cam,
                         const LandmarkSet2D& observed);

// Model file: 68 rows "index,U,V,W" with an optional header row. The sidecar
// is a JSON document {"name", "inner_indices", "all_indices"}; when omitted,
// the path with its extension replaced by ".json" is used.
FaceModel3D load_model(const std::filesystem::path& csv_path,
                       const std::filesystem::path& sidecar_path = {});
void save_model(const FaceModel3D& model, const std::filesystem::path& csv_path,
                const std::filesystem::path& sidecar_path = {});
std::filesystem::path default_sidecar_path(const std::filesystem::path& csv_path);

// Landmark file: header "index,x,y" then 68 rows.
LandmarkSet2D load_landmarks(const std::filesystem::path& path, int image_width,
                             int image_height);
void save_landmarks(const LandmarkSet2D& landmarks, const std::filesystem::path& path);

}  // namespace headpose
