#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "headpose/evaluation.hpp"
#include "headpose/pnp_solver.hpp"
#include "headpose/synthetic.hpp"

// File-level pipeline steps. Each reads and writes only the formats declared
// in dataset.hpp, face_camera.hpp and classifier.hpp plus the report tables,
// and validates its input paths before doing any work.
namespace headpose {

namespace fs = std::filesystem;

struct SynthCommand {
  fs::path out_dir;
  std::optional<fs::path> scene_file;  // base spec, overridden below
  std::optional<std::uint64_t> seed;
  std::optional<int> frames;
  std::optional<int> subjects;
  std::optional<double> pixel_noise;
  std::optional<double> swap_perturbation;
  std::optional<double> subject_deformation;
  std::optional<bool> balanced;
};

struct PoseCommand {
  fs::path manifest;
  fs::path model;
  fs::path out;
  SolverConfig solver;
  double adversarial_init_rate = 0.0;
  std::uint64_t seed = 0;
};

struct FeaturesCommand {
  fs::path manifest;
  fs::path poses;
  fs::path out;
};

struct SplitCommand {
  fs::path manifest;
  fs::path out_dir;  // receives train.jsonl and test.jsonl
  SplitOptions options;
};

struct TrainCommand {
  fs::path features;
  std::optional<fs::path> subset;  // restrict to frames of this manifest
  fs::path out;
  double c = 1.0;
  std::uint64_t seed = 0;
};

struct EvaluateCommand {
  fs::path model;
  fs::path features;
  std::optional<fs::path> subset;
  fs::path out_dir;  // scores.csv, roc.csv, summary.csv
};

struct ReportCommand {
  fs::path features;
  std::optional<fs::path> poses;     // adds per-parameter histograms
  std::optional<fs::path> scores;    // adds the ROC table and AUC
  std::optional<fs::path> manifest;  // adds frame coverage
  fs::path out_dir;
  int bins = 20;
};

struct LeakageCommand {
  fs::path manifest;
  fs::path model;
  fs::path out;
  SolverConfig solver;
  double c = 1.0;
  std::uint64_t seed = 0;
};

// Human-readable lines for stdout; warnings go to `warnings`.
struct CommandOutput {
  std::vector<std::string> messages;
  std::vector<std::string> warnings;
};

CommandOutput run_synth(const SynthCommand& cmd);
CommandOutput run_pose(const PoseCommand& cmd);
CommandOutput run_features(const FeaturesCommand& cmd);
CommandOutput run_split(const SplitCommand& cmd);
CommandOutput run_train(const TrainCommand& cmd);
CommandOutput run_evaluate(const EvaluateCommand& cmd);
CommandOutput run_report(const ReportCommand& cmd);
CommandOutput run_leakage(const LeakageCommand& cmd);

}  // namespace headpose
