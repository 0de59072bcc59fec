#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "headpose/dataset.hpp"
#include "headpose/features.hpp"
#include "headpose/pnp_solver.hpp"

namespace headpose {

struct RocCurve {
  // Descending thresholds; point k counts scores >= thresholds[k]. The first
  // point (0, 0) uses +inf.
  std::vector<double> thresholds;
  std::vector<double> false_positive_rates;
  std::vector<double> true_positive_rates;
  double auc = 0.0;
};

// labels: 1 for the positive (fake) class, 0 otherwise. AUC is the
// Mann-Whitney statistic with ties counted one half.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

struct FlipFlags {
  bool inner_flipped = false;
  bool all_flipped = false;
  std::optional<Label> label;
};

// Proportions indexed by (inner, all) flip state.
struct FlipContingency {
  double both_flipped = 0.0;
  double inner_only = 0.0;  // inner flipped, all correct
  double all_only = 0.0;    // all flipped, inner correct
  double neither = 0.0;
  double at_least_one = 0.0;
  double conflicting = 0.0;
  size_t frames = 0;
};

FlipContingency flip_contingency(std::span<const FlipFlags> frames);
FlipContingency flip_contingency(std::span<const PosePair> pairs);

struct ConditionalFakeProbability {
  std::optional<double> given_conflicting;
  std::optional<double> given_non_conflicting;
  size_t conflicting_frames = 0;
  size_t non_conflicting_frames = 0;
};

// Frames without a label are ignored.
ConditionalFakeProbability conditional_fake_prob(std::span<const FlipFlags> frames);

enum class SplitMode { kOverlappingSubjects, kDisjointSubjects };

const char* split_mode_name(SplitMode mode);
SplitMode parse_split_mode(const std::string& text);

struct SplitOptions {
  SplitMode mode = SplitMode::kDisjointSubjects;
  std::uint64_t seed = 0;
  bool balance = true;
  double test_fraction = 0.5;
};

/// Returns (train, test). Disjoint mode keeps every subject token on one side;
/// tokens that co-occur in a record are grouped together. Balancing drops
/// excess frames of the larger class on each side.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitOptions& options);

struct Histogram {
  std::vector<double> edges;  // bins + 1 values
  std::vector<size_t> counts;
};

Histogram histogram(std::span<const double> values, int bins);

struct LeakageResult {
  double auc_overlapping = 0.0;
  double auc_disjoint = 0.0;
  size_t frames_used = 0;
  size_t frames_total = 0;

  double gap() const { return auc_overlapping - auc_disjoint; }
};

LeakageResult identity_leakage_experiment(const DatasetManifest& manifest,
                                          const FaceModel3D& model,
                                          const SolverConfig& solver, double c,
                                          std::uint64_t seed);

}  // namespace headpose
