// Command-line front end. Talks to the library only through headpose.h.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "headpose/headpose.h"

namespace {

constexpr int kUsageExit = 64;

const char* kFooter = R"(Exit status:
  0   success
  1   invalid input (bad option value, malformed record contents)
  2   parse error (file format violation; the message names file and line)
  3   I/O error (missing input, unwritable output)
  4   projection singularity
  5   insufficient points
  6   numerical failure in the solver
  7   degenerate training set (e.g. a single class)
  8   model incomplete (probability calibration missing)
  9   undefined metric (e.g. AUC with one class)
  10  split infeasible
  11  invalid scene specification
  12  internal error
  64  command-line usage error

File formats (version 1):
  model        model.csv "index,U,V,W" (68 rows, mm) + model.json sidecar
  landmarks    CSV "index,x,y", 68 rows, pixels
  manifest     JSON Lines: frame_id, label, subject_ids, landmarks,
               image_width, image_height, optional truth
  poses        JSON Lines, one record per frame and landmark set
  features     CSV with 12 feature columns, cosine distance, flip flags,
               label and ';'-joined subject ids
  svm          JSON document, format "headpose-svm", version 1
  reports      comma-separated tables (see 'report --help')

Environment:
  HEADPOSE_MODEL  default face model for 'pose' and 'leakage'; otherwise
                  model.csv next to the manifest is used.)";

void print_line(const char* line, void*) { std::printf("%s\n", line); }
void print_warning(const char* line, void*) { std::fprintf(stderr, "warning: %s\n", line); }

const hp_sinks kSinks{print_line, print_warning, nullptr};

int report(hp_status status) {
  if (status != HP_OK) {
    std::fprintf(stderr, "error (%s): %s\n", hp_status_name(status), hp_last_error());
  }
  return static_cast<int>(status);
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

std::string model_for(const std::string& model, const std::string& manifest) {
  if (!model.empty()) return model;
  return (std::filesystem::path(manifest).parent_path() / "model.csv").string();
}

struct SolverFlags {
  hp_solver_config config{};
  bool no_correction = false;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  hp_solver_config_default(&f.config);
  cmd->add_option("--max-iterations", f.config.max_lm_iterations, "LM iteration budget")
      ->capture_default_str();
  cmd->add_option("--damping", f.config.lm_initial_damping, "initial LM damping")
      ->capture_default_str();
  cmd->add_option("--tolerance", f.config.convergence_tol, "relative cost decrease to stop")
      ->capture_default_str();
  auto* after = cmd->add_option("--correction-after", f.config.correction_after_iterations,
                                "LM iterations before the flip check")
                    ->capture_default_str();
  cmd->add_flag("--no-correction", f.no_correction, "disable the flipped-pose correction")
      ->excludes(after);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Head-pose inconsistency analysis: synthetic data, pose estimation, features, "
               "SVM training and evaluation reports."};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.set_version_flag("--version", hp_version());

  int status = 0;

  hp_synth_options synth;
  hp_synth_options_default(&synth);
  std::string synth_out, scene;
  std::uint64_t synth_seed = 0;
  bool unbalanced = false;
  auto* c_synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
  c_synth->add_option("--out", synth_out, "output directory")->required();
  c_synth->add_option("--scene", scene, "scene JSON; flags below override it")->check(CLI::ExistingFile);
  auto* seed_opt = c_synth->add_option("--seed", synth_seed, "random seed");
  c_synth->add_option("--frames", synth.frames, "frame count");
  c_synth->add_option("--subjects", synth.subjects, "subject count");
  c_synth->add_option("--noise", synth.pixel_noise, "pixel noise sigma (px)");
  c_synth->add_option("--swap", synth.swap_perturbation, "swap perturbation RMS (mm)");
  c_synth->add_option("--deformation", synth.subject_deformation, "subject deformation RMS (mm)");
  c_synth->add_flag("--unbalanced", unbalanced, "allow unequal class counts");
  c_synth->callback([&] {
    synth.out_dir = synth_out.c_str();
    synth.scene_file = opt(scene);
    synth.has_seed = seed_opt->count() > 0;
    synth.seed = synth_seed;
    if (unbalanced) synth.balanced = 0;
    status = report(hp_run_synth(&synth, &kSinks));
  });

  hp_pose_options pose{};
  SolverFlags pose_solver;
  std::string pose_manifest, pose_model, pose_out;
  auto* c_pose = app.add_subcommand("pose", "estimate inner and whole-face poses per frame");
  c_pose->add_option("--manifest", pose_manifest, "dataset manifest")->required();
  c_pose->add_option("--model", pose_model, "face model CSV")->envname("HEADPOSE_MODEL");
  c_pose->add_option("--out", pose_out, "pose output (JSON Lines)")->required();
  c_pose->add_option("--adversarial-init", pose.adversarial_init_rate,
                     "fraction of estimates started from the flipped initialization")
      ->check(CLI::Range(0.0, 1.0));
  c_pose->add_option("--seed", pose.seed, "seed for the adversarial selection");
  add_solver_flags(c_pose, pose_solver);
  c_pose->callback([&] {
    const std::string model = model_for(pose_model, pose_manifest);
    pose.manifest = pose_manifest.c_str();
    pose.model = model.c_str();
    pose.out = pose_out.c_str();
    pose.solver = pose_solver.config;
    if (pose_solver.no_correction) pose.solver.correction_enabled = 0;
    status = report(hp_run_pose(&pose, &kSinks));
  });

  std::string feat_manifest, feat_poses, feat_out;
  auto* c_features = app.add_subcommand("features", "build the 12-value pose-difference features");
  c_features->add_option("--manifest", feat_manifest, "dataset manifest")->required();
  c_features->add_option("--poses", feat_poses, "pose file from 'pose'")->required();
  c_features->add_option("--out", feat_out, "feature table (CSV)")->required();
  c_features->callback([&] {
    status = report(hp_run_features(feat_manifest.c_str(), feat_poses.c_str(), feat_out.c_str(), &kSinks));
  });

  hp_split_options split{};
  split.balance = 1;
  split.test_fraction = 0.5;
  std::string split_manifest, split_out, split_mode = "disjoint-subjects";
  bool no_balance = false;
  auto* c_split = app.add_subcommand("split", "partition a manifest into train.jsonl and test.jsonl");
  c_split->add_option("--manifest", split_manifest, "dataset manifest")->required();
  c_split->add_option("--out", split_out, "output directory")->required();
  c_split->add_option("--mode", split_mode, "disjoint-subjects or overlapping-subjects")
      ->check(CLI::IsMember({"disjoint-subjects", "overlapping-subjects", "disjoint", "overlapping"}))
      ->capture_default_str();
  c_split->add_option("--seed", split.seed, "random seed");
  c_split->add_option("--test-fraction", split.test_fraction, "share of frames held out")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c_split->add_flag("--no-balance", no_balance, "keep class imbalance");
  c_split->callback([&] {
    split.manifest = split_manifest.c_str();
    split.out_dir = split_out.c_str();
    split.mode = split_mode.rfind("disjoint", 0) == 0 ? HP_SPLIT_DISJOINT_SUBJECTS
                                                      : HP_SPLIT_OVERLAPPING_SUBJECTS;
    split.balance = no_balance ? 0 : 1;
    status = report(hp_run_split(&split, &kSinks));
  });

  hp_train_options trainopt{};
  trainopt.c = 1.0;
  std::string train_features, train_subset, train_out;
  auto* c_train = app.add_subcommand("train", "fit the RBF SVM with Platt scaling");
  c_train->add_option("--features", train_features, "feature table")->required();
  c_train->add_option("--subset", train_subset, "restrict to frames of this manifest");
  c_train->add_option("--out", train_out, "model output (JSON)")->required();
  c_train->add_option("--C", trainopt.c, "soft-margin constant")->capture_default_str();
  c_train->add_option("--seed", trainopt.seed, "seed for the calibration folds");
  c_train->callback([&] {
    trainopt.features = train_features.c_str();
    trainopt.subset = opt(train_subset);
    trainopt.out = train_out.c_str();
    status = report(hp_run_train(&trainopt, &kSinks));
  });

  hp_evaluate_options evalopt{};
  std::string eval_model, eval_features, eval_subset, eval_out;
  auto* c_eval = app.add_subcommand("evaluate", "score frames; writes scores.csv, roc.csv, summary.csv");
  c_eval->add_option("--model", eval_model, "trained SVM")->required();
  c_eval->add_option("--features", eval_features, "feature table")->required();
  c_eval->add_option("--subset", eval_subset, "restrict to frames of this manifest");
  c_eval->add_option("--out", eval_out, "output directory")->required();
  c_eval->callback([&] {
    evalopt.model = eval_model.c_str();
    evalopt.features = eval_features.c_str();
    evalopt.subset = opt(eval_subset);
    evalopt.out_dir = eval_out.c_str();
    status = report(hp_run_evaluate(&evalopt, &kSinks));
  });

  hp_report_options rep{};
  rep.bins = 20;
  std::string rep_features, rep_poses, rep_scores, rep_manifest, rep_out;
  auto* c_report = app.add_subcommand(
      "report",
      "write contingency.csv (inner x all flip proportions), conditional.csv (P(fake) given "
      "conflicting), histogram_cosine.csv, histogram_parameters.csv (with --poses), roc.csv "
      "(with --scores) and summary.csv");
  c_report->add_option("--features", rep_features, "feature table")->required();
  c_report->add_option("--poses", rep_poses, "pose file, for per-parameter histograms");
  c_report->add_option("--scores", rep_scores, "scores.csv from 'evaluate'");
  c_report->add_option("--manifest", rep_manifest, "manifest, for frame coverage");
  c_report->add_option("--bins", rep.bins, "histogram bins")->check(CLI::PositiveNumber)->capture_default_str();
  c_report->add_option("--out", rep_out, "output directory")->required();
  c_report->callback([&] {
    rep.features = rep_features.c_str();
    rep.poses = opt(rep_poses);
    rep.scores = opt(rep_scores);
    rep.manifest = opt(rep_manifest);
    rep.out_dir = rep_out.c_str();
    status = report(hp_run_report(&rep, &kSinks));
  });

  hp_leakage_options leak{};
  leak.c = 1.0;
  SolverFlags leak_solver;
  std::string leak_manifest, leak_model, leak_out;
  auto* c_leak = app.add_subcommand(
      "leakage", "compare AUC under overlapping and subject-disjoint splits");
  c_leak->add_option("--manifest", leak_manifest, "dataset manifest")->required();
  c_leak->add_option("--model", leak_model, "face model CSV")->envname("HEADPOSE_MODEL");
  c_leak->add_option("--out", leak_out, "result table (CSV)")->required();
  c_leak->add_option("--C", leak.c, "soft-margin constant")->capture_default_str();
  c_leak->add_option("--seed", leak.seed, "random seed");
  add_solver_flags(c_leak, leak_solver);
  c_leak->callback([&] {
    const std::string model = model_for(leak_model, leak_manifest);
    leak.manifest = leak_manifest.c_str();
    leak.model = model.c_str();
    leak.out = leak_out.c_str();
    leak.solver = leak_solver.config;
    if (leak_solver.no_correction) leak.solver.correction_enabled = 0;
    status = report(hp_run_leakage(&leak, &kSinks));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }
  return status;
}
