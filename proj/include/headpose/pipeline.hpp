#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "headpose/classifier.hpp"
#include "headpose/dataset.hpp"
#include "headpose/evaluation.hpp"
#include "headpose/pnp_solver.hpp"

namespace headpose {

struct PoseRunOptions {
  SolverConfig solver;
  // Fraction of (frame, set) estimates whose LM starts from the flipped
  // counterpart of the DLT initialization. Selection is seeded.
  double adversarial_init_rate = 0.0;
  std::uint64_t seed = 0;
};

struct PoseRunResult {
  std::vector<PoseRecord> records;  // sorted by frame id, inner before all
  size_t frames_total = 0;
  size_t frames_skipped = 0;
  std::vector<std::string> warnings;
};

// Frames whose landmark file is missing or unreadable, or whose solve fails,
// are skipped with a warning.
PoseRunResult estimate_manifest_poses(const DatasetManifest& manifest,
                                      const FaceModel3D& model,
                                      const PoseRunOptions& options);

// Pairs inner/all records per frame and attaches labels and subjects from the
// manifest. Frames missing either estimate are dropped.
std::vector<FeatureRecord> build_features(const DatasetManifest& manifest,
                                          const std::vector<PoseRecord>& poses);

// Rows whose frame id appears in `subset` (all rows when subset is empty).
std::vector<FeatureRecord> filter_features(const std::vector<FeatureRecord>& rows,
                                           const DatasetManifest* subset);

TrainingSet to_training_set(const std::vector<FeatureRecord>& rows);

struct ScoredFrame {
  std::string frame_id;
  double decision = 0.0;
  double probability = 0.0;
  int label = 0;  // 1 fake, 0 authentic
};

std::vector<ScoredFrame> score_features(const SvmModel& model,
                                        const std::vector<FeatureRecord>& rows);

}  // namespace headpose
