#include "headpose/face_camera.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

#include "headpose/error.hpp"
#include "text_util.hpp"

namespace headpose {

namespace {

void check_index_set(const std::vector<int>& indices, const char* label) {
  if (indices.size() < 6) {
    throw Error(ErrorCode::kInvalidInput,
                std::string(label) + " must contain at least 6 landmark indices");
  }
  std::set<int> seen;
  for (int idx : indices) {
    if (idx < 0 || idx >= kLandmarkCount) {
      throw Error(ErrorCode::kInvalidInput,
                  std::string(label) + ": index out of range: " + std::to_string(idx));
    }
    if (!seen.insert(idx).second) {
      throw Error(ErrorCode::kInvalidInput,
                  std::string(label) + ": duplicate index " + std::to_string(idx));
    }
  }
}

}  // namespace

const char* subset_name(LandmarkSubset subset) {
  return subset == LandmarkSubset::kInner ? "inner" : "all";
}

LandmarkSubset parse_subset(const std::string& name) {
  if (name == "inner") return LandmarkSubset::kInner;
  if (name == "all") return LandmarkSubset::kAll;
  throw Error(ErrorCode::kInvalidInput, "unknown landmark set '" + name + "'");
}

CameraIntrinsics approximate_intrinsics(int image_width, int image_height) {
  if (image_width <= 0 || image_height <= 0) {
    throw Error(ErrorCode::kInvalidInput, "image dimensions must be positive, got " +
                                              std::to_string(image_width) + "x" +
                                              std::to_string(image_height));
  }
  CameraIntrinsics cam;
  cam.fx = static_cast<double>(image_width);
  cam.fy = static_cast<double>(image_width);
  cam.cx = image_width / 2.0;
  cam.cy = image_height / 2.0;
  return cam;
}

FaceModel3D::FaceModel3D(std::vector<Vec3> points, std::vector<int> inner_indices,
                         std::vector<int> all_indices, std::string name)
    : points_(std::move(points)),
      inner_(std::move(inner_indices)),
      all_(std::move(all_indices)),
      name_(std::move(name)) {
  if (points_.size() != static_cast<size_t>(kLandmarkCount)) {
    throw Error(ErrorCode::kInvalidInput,
                "face model needs 68 points, got " + std::to_string(points_.size()));
  }
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points_) {
    if (!p.allFinite()) throw Error(ErrorCode::kInvalidInput, "face model has non-finite point");
    centroid += p;
  }
  centroid /= kLandmarkCount;
  if (centroid.norm() > 1.0) {
    throw Error(ErrorCode::kInvalidInput,
                "face model is not centered: centroid is " +
                    detail::format_double(centroid.norm()) + " mm from the origin");
  }
  check_index_set(inner_, "inner_indices");
  check_index_set(all_, "all_indices");
  const std::set<int> all_set(all_.begin(), all_.end());
  for (int idx : inner_) {
    if (!all_set.count(idx)) {
      throw Error(ErrorCode::kInvalidInput, "inner index " + std::to_string(idx) +
                                                " is not part of all_indices");
    }
  }
}

const std::vector<int>& FaceModel3D::indices(LandmarkSubset subset) const {
  return subset == LandmarkSubset::kInner ? inner_ : all_;
}

double FaceModel3D::planarity_ratio() const {
  double min_u = points_[all_[0]].x(), max_u = min_u;
  double min_v = points_[all_[0]].y(), max_v = min_v;
  double sum_w = 0.0;
  for (int idx : all_) {
    const Vec3& p = points_[idx];
    min_u = std::min(min_u, p.x());
    max_u = std::max(max_u, p.x());
    min_v = std::min(min_v, p.y());
    max_v = std::max(max_v, p.y());
    sum_w += std::abs(p.z());
  }
  const double extent = std::max(max_u - min_u, max_v - min_v);
  if (extent <= 0.0) return 0.0;
  return sum_w / static_cast<double>(all_.size()) / extent;
}

void LandmarkSet2D::validate() const {
  if (points.size() != static_cast<size_t>(kLandmarkCount)) {
    throw Error(ErrorCode::kInvalidInput,
                "landmark set needs 68 points, got " + std::to_string(points.size()));
  }
  for (const Vec2& p : points) {
    if (!p.allFinite()) throw Error(ErrorCode::kInvalidInput, "landmark set has non-finite point");
  }
}

std::vector<Vec2> project_points(std::span<const Vec3> model_points, const Pose& pose,
                                 const CameraIntrinsics& cam) {
  std::vector<Vec2> out;
  out.reserve(model_points.size());
  for (const Vec3& p : model_points) {
    const Vec3 x = pose.rotation * p + pose.translation;
    if (x.z() == 0.0) {
      throw Error(ErrorCode::kProjectionSingularity, "transformed landmark has zero depth");
    }
    out.emplace_back(x.x() / x.z() * cam.fx + cam.cx, x.y() / x.z() * cam.fy + cam.cy);
  }
  return out;
}

std::vector<Vec2> project(const FaceModel3D& model, std::span<const int> indices,
                          const Pose& pose, const CameraIntrinsics& cam) {
  std::vector<Vec3> selected;
  selected.reserve(indices.size());
  for (int idx : indices) selected.push_back(model.points().at(idx));
  return project_points(selected, pose, cam);
}

double reprojection_cost(const FaceModel3D& model, std::span<const int> indices,
                         const Pose& pose, const CameraIntrinsics& cam,
                         const LandmarkSet2D& observed) {
  if (indices.empty()) throw Error(ErrorCode::kInvalidInput, "empty landmark index set");
  const std::vector<Vec2> projected = project(model, indices, pose, cam);
  double cost = 0.0;
  for (size_t k = 0; k < indices.size(); ++k) {
    cost += (projected[k] - observed.points.at(indices[k])).squaredNorm();
  }
  return cost;
}

std::filesystem::path default_sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

FaceModel3D load_model(const std::filesystem::path& csv_path,
                       const std::filesystem::path& sidecar_path) {
  const std::vector<std::string> lines = detail::read_lines(csv_path);
  std::vector<Vec3> points(kLandmarkCount, Vec3::Zero());
  std::vector<bool> seen(kLandmarkCount, false);
  size_t rows = 0;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (ln == 0 && !fields.empty() && fields[0] == "index") continue;
    if (fields.size() != 4) detail::parse_error(csv_path, ln + 1, "expected 4 fields");
    long long idx = 0;
    if (!detail::try_parse_int(fields[0], idx)) detail::parse_error(csv_path, ln + 1, "non-numeric index");
    if (idx < 0 || idx >= kLandmarkCount) detail::parse_error(csv_path, ln + 1, "index out of range");
    if (seen[idx]) detail::parse_error(csv_path, ln + 1, "duplicate index");
    Vec3 p;
    for (int k = 0; k < 3; ++k) {
      if (!detail::try_parse_double(fields[k + 1], p[k]) || !std::isfinite(p[k])) {
        detail::parse_error(csv_path, ln + 1, "non-numeric coordinate");
      }
    }
    points[idx] = p;
    seen[idx] = true;
    ++rows;
  }
  if (rows != static_cast<size_t>(kLandmarkCount)) {
    detail::parse_error(csv_path, lines.size(),
                        "expected 68 rows, got " + std::to_string(rows));
  }

  const std::filesystem::path side =
      sidecar_path.empty() ? default_sidecar_path(csv_path) : sidecar_path;
  const std::vector<std::string> side_lines = detail::read_lines(side);
  std::string text;
  for (const auto& l : side_lines) text += l + "\n";
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    detail::parse_error(side, 1, std::string("invalid JSON: ") + e.what());
  }
  auto read_indices = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_array()) {
      detail::parse_error(side, 1, std::string("missing array '") + key + "'");
    }
    std::vector<int> out;
    for (const auto& v : doc[key]) {
      if (!v.is_number_integer()) detail::parse_error(side, 1, std::string(key) + ": non-integer index");
      const long long idx = v.get<long long>();
      if (idx < 0 || idx >= kLandmarkCount) {
        detail::parse_error(side, 1, std::string(key) + ": index out of range: " + std::to_string(idx));
      }
      out.push_back(static_cast<int>(idx));
    }
    return out;
  };
  std::vector<int> inner = read_indices("inner_indices");
  std::vector<int> all = read_indices("all_indices");
  const std::string name = doc.value("name", csv_path.stem().string());
  try {
    return FaceModel3D(std::move(points), std::move(inner), std::move(all), name);
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, csv_path.string() + ": " + e.what());
  }
}

void save_model(const FaceModel3D& model, const std::filesystem::path& csv_path,
                const std::filesystem::path& sidecar_path) {
  std::string csv = "index,U,V,W\n";
  for (int i = 0; i < kLandmarkCount; ++i) {
    const Vec3& p = model.points()[i];
    csv += std::to_string(i) + "," + detail::format_double(p.x()) + "," +
           detail::format_double(p.y()) + "," + detail::format_double(p.z()) + "\n";
  }
  detail::write_text(csv_path, csv);

  nlohmann::ordered_json doc;
  doc["name"] = model.name();
  doc["inner_indices"] = model.inner_indices();
  doc["all_indices"] = model.all_indices();
  doc["planarity_ratio"] = model.planarity_ratio();
  detail::write_text(sidecar_path.empty() ? default_sidecar_path(csv_path) : sidecar_path,
                     doc.dump(2) + "\n");
}

LandmarkSet2D load_landmarks(const std::filesystem::path& path, int image_width,
                             int image_height) {
  const std::vector<std::string> lines = detail::read_lines(path);
  LandmarkSet2D out;
  out.image_width = image_width;
  out.image_height = image_height;
  out.points.assign(kLandmarkCount, Vec2::Zero());
  std::vector<bool> seen(kLandmarkCount, false);
  size_t rows = 0;
  bool header_seen = false;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (!header_seen) {
      if (fields.size() != 3 || fields[0] != "index" || fields[1] != "x" || fields[2] != "y") {
        detail::parse_error(path, ln + 1, "expected header 'index,x,y'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) detail::parse_error(path, ln + 1, "expected 3 fields");
    long long idx = 0;
    if (!detail::try_parse_int(fields[0], idx)) detail::parse_error(path, ln + 1, "non-numeric index");
    if (idx < 0 || idx >= kLandmarkCount) detail::parse_error(path, ln + 1, "index out of range");
    if (seen[idx]) detail::parse_error(path, ln + 1, "duplicate index");
    Vec2 p;
    for (int k = 0; k < 2; ++k) {
      if (!detail::try_parse_double(fields[k + 1], p[k]) || !std::isfinite(p[k])) {
        detail::parse_error(path, ln + 1, "non-numeric coordinate");
      }
    }
    out.points[idx] = p;
    seen[idx] = true;
    ++rows;
  }
  if (rows != static_cast<size_t>(kLandmarkCount)) {
    detail::parse_error(path, lines.size(), "expected 68 rows, got " + std::to_string(rows));
  }
  return out;
}

void save_landmarks(const LandmarkSet2D& landmarks, const std::filesystem::path& path) {
  landmarks.validate();
  std::string csv = "index,x,y\n";
  for (int i = 0; i < kLandmarkCount; ++i) {
    csv += std::to_string(i) + "," + detail::format_double(landmarks.points[i].x()) + "," +
           detail::format_double(landmarks.points[i].y()) + "\n";
  }
  detail::write_text(path, csv);
}

}  // namespace headpose
