#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "headpose/features.hpp"

namespace headpose {

struct ManifestRecord {
  std::string frame_id;
  Label label = Label::kAuthentic;
  // Target identity, plus the source identity for fake frames.
  std::vector<std::string> subject_ids;
  std::string landmark_file;  // relative to the manifest directory unless absolute
  int image_width = 0;
  int image_height = 0;
  std::optional<Pose> truth;  // present for synthetic frames
};

/// Frame list for one dataset. Stored as JSON Lines, one record per line.
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  // Unique frame ids, positive image sizes, fake records list a subject.
  void validate() const;
  std::filesystem::path landmark_path(const ManifestRecord& record) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// One pose estimate per frame and landmark set.
struct PoseRecord {
  std::string frame_id;
  LandmarkSubset set = LandmarkSubset::kAll;
  HeadPose pose;
};

std::string pose_record_to_json(const PoseRecord& record);
PoseRecord pose_record_from_json(const std::string& line);
std::vector<PoseRecord> load_pose_records(const std::filesystem::path& path);
void save_pose_records(const std::vector<PoseRecord>& records, const std::filesystem::path& path);

// Row of the feature table.
struct FeatureRecord {
  std::string frame_id;
  FeatureVector features;
  double cosine_distance = 0.0;
  bool inner_flipped = false;
  bool all_flipped = false;
};

std::vector<FeatureRecord> load_feature_records(const std::filesystem::path& path);
void save_feature_records(const std::vector<FeatureRecord>& records,
                          const std::filesystem::path& path);

}  // namespace headpose
