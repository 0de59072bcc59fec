#include "headpose/commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "headpose/pipeline.hpp"
#include "text_util.hpp"

namespace headpose {

namespace {

using detail::format_double;

void require_file(const fs::path& path, const char* what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kIo, std::string(what) + " not found: " + path.string());
  }
}

void require_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + parent.string() + ": " + ec.message());
}

void require_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

std::string optional_number(const std::optional<double>& v) {
  return v ? format_double(*v) : "NA";
}

// Rewrites landmark paths so they resolve from `target_dir`.
DatasetManifest rebase(DatasetManifest manifest, const fs::path& target_dir) {
  const fs::path target = fs::absolute(target_dir).lexically_normal();
  for (ManifestRecord& r : manifest.records) {
    const fs::path p(r.landmark_file);
    if (p.is_absolute()) continue;
    const fs::path full = fs::absolute(manifest.base_dir / p).lexically_normal();
    r.landmark_file = full.lexically_relative(target).generic_string();
  }
  manifest.base_dir = target_dir;
  return manifest;
}

std::vector<FeatureRecord> load_rows(const fs::path& features,
                                     const std::optional<fs::path>& subset) {
  std::vector<FeatureRecord> rows = load_feature_records(features);
  if (subset) {
    const DatasetManifest m = load_manifest(*subset);
    rows = filter_features(rows, &m);
  }
  return rows;
}

void save_scores(const std::vector<ScoredFrame>& scores, const fs::path& path) {
  std::string text = "frame_id,label,decision,probability\n";
  for (const ScoredFrame& s : scores) {
    text += s.frame_id + "," + (s.label ? "fake" : "authentic") + "," + format_double(s.decision) +
            "," + format_double(s.probability) + "\n";
  }
  detail::write_text(path, text);
}

std::vector<ScoredFrame> load_scores(const fs::path& path) {
  const std::vector<std::string> lines = detail::read_lines(path);
  std::vector<ScoredFrame> out;
  bool header = false;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (!header) {
      if (f.size() != 4 || f[0] != "frame_id") detail::parse_error(path, ln + 1, "unexpected score table header");
      header = true;
      continue;
    }
    if (f.size() != 4) detail::parse_error(path, ln + 1, "expected 4 fields");
    ScoredFrame s;
    s.frame_id = std::string(f[0]);
    try {
      s.label = parse_label(std::string(f[1])) == Label::kFake ? 1 : 0;
    } catch (const Error& e) {
      detail::parse_error(path, ln + 1, e.what());
    }
    if (!detail::try_parse_double(f[2], s.decision) || !detail::try_parse_double(f[3], s.probability)) {
      detail::parse_error(path, ln + 1, "non-numeric score");
    }
    out.push_back(std::move(s));
  }
  if (!header) detail::parse_error(path, 1, "missing score table header");
  return out;
}

std::string roc_table(const RocCurve& roc) {
  std::string text = "threshold,false_positive_rate,true_positive_rate\n";
  for (size_t k = 0; k < roc.thresholds.size(); ++k) {
    text += (std::isinf(roc.thresholds[k]) ? std::string("inf") : format_double(roc.thresholds[k])) +
            "," + format_double(roc.false_positive_rates[k]) + "," +
            format_double(roc.true_positive_rates[k]) + "\n";
  }
  return text;
}

RocCurve score_roc(const std::vector<ScoredFrame>& scores) {
  std::vector<double> p;
  std::vector<int> y;
  for (const ScoredFrame& s : scores) {
    p.push_back(s.probability);
    y.push_back(s.label);
  }
  return roc_auc(p, y);
}

size_t bin_of(double v, const std::vector<double>& edges) {
  const size_t bins = edges.size() - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  const size_t k = static_cast<size_t>(it - edges.begin());
  return std::clamp<size_t>(k == 0 ? 0 : k - 1, 0, bins - 1);
}

// Rows of "<prefix>bin_lo,bin_hi,authentic,fake,unlabeled" over shared edges.
std::string class_histogram(const std::string& prefix, const std::vector<double>& values,
                            const std::vector<std::optional<Label>>& labels, int bins) {
  const Histogram h = histogram(values, bins);
  std::vector<std::array<size_t, 3>> counts(h.counts.size(), {0, 0, 0});
  for (size_t i = 0; i < values.size(); ++i) {
    const size_t col = !labels[i] ? 2 : (*labels[i] == Label::kFake ? 1 : 0);
    ++counts[bin_of(values[i], h.edges)][col];
  }
  std::string text;
  for (size_t k = 0; k < counts.size(); ++k) {
    text += prefix + format_double(h.edges[k]) + "," + format_double(h.edges[k + 1]) + "," +
            std::to_string(counts[k][0]) + "," + std::to_string(counts[k][1]) + "," +
            std::to_string(counts[k][2]) + "\n";
  }
  return text;
}

SceneSpec scene_for(const SynthCommand& cmd) {
  SceneSpec spec;
  if (cmd.scene_file) {
    require_file(*cmd.scene_file, "scene file");
    std::string text;
    for (const auto& line : detail::read_lines(*cmd.scene_file)) text += line + "\n";
    spec = scene_from_json(text);
  }
  if (cmd.seed) spec.seed = *cmd.seed;
  if (cmd.frames) spec.frame_count = *cmd.frames;
  if (cmd.subjects) spec.subject_count = *cmd.subjects;
  if (cmd.pixel_noise) spec.pixel_noise = *cmd.pixel_noise;
  if (cmd.swap_perturbation) spec.swap_perturbation = *cmd.swap_perturbation;
  if (cmd.subject_deformation) spec.subject_deformation = *cmd.subject_deformation;
  if (cmd.balanced) spec.balanced = *cmd.balanced;
  spec.validate();
  return spec;
}

}  // namespace

CommandOutput run_synth(const SynthCommand& cmd) {
  const SceneSpec spec = scene_for(cmd);
  const DatasetManifest m = generate_dataset(spec, cmd.out_dir);
  CommandOutput out;
  out.messages.push_back("wrote " + std::to_string(m.records.size()) + " frames to " +
                         cmd.out_dir.string());
  return out;
}

CommandOutput run_pose(const PoseCommand& cmd) {
  require_file(cmd.manifest, "manifest");
  require_file(cmd.model, "model");
  cmd.solver.validate();
  const DatasetManifest manifest = load_manifest(cmd.manifest);
  const FaceModel3D model = load_model(cmd.model);
  require_parent(cmd.out);

  PoseRunOptions opts;
  opts.solver = cmd.solver;
  opts.adversarial_init_rate = cmd.adversarial_init_rate;
  opts.seed = cmd.seed;
  const PoseRunResult result = estimate_manifest_poses(manifest, model, opts);
  save_pose_records(result.records, cmd.out);

  size_t flipped = 0;
  for (const PoseRecord& r : result.records) flipped += r.pose.flipped ? 1 : 0;
  CommandOutput out;
  out.warnings = result.warnings;
  out.messages.push_back("frames: " + std::to_string(result.frames_total - result.frames_skipped) +
                         " of " + std::to_string(result.frames_total));
  out.messages.push_back("flipped estimates: " + std::to_string(flipped) + " of " +
                         std::to_string(result.records.size()));
  return out;
}

CommandOutput run_features(const FeaturesCommand& cmd) {
  require_file(cmd.manifest, "manifest");
  require_file(cmd.poses, "pose file");
  const DatasetManifest manifest = load_manifest(cmd.manifest);
  const std::vector<PoseRecord> poses = load_pose_records(cmd.poses);
  require_parent(cmd.out);
  const std::vector<FeatureRecord> rows = build_features(manifest, poses);
  save_feature_records(rows, cmd.out);
  CommandOutput out;
  out.messages.push_back("feature rows: " + std::to_string(rows.size()) + " of " +
                         std::to_string(manifest.records.size()) + " frames");
  return out;
}

CommandOutput run_split(const SplitCommand& cmd) {
  require_file(cmd.manifest, "manifest");
  const DatasetManifest manifest = load_manifest(cmd.manifest);
  const auto [train, test] = split_dataset(manifest, cmd.options);
  require_dir(cmd.out_dir);
  save_manifest(rebase(train, cmd.out_dir), cmd.out_dir / "train.jsonl");
  save_manifest(rebase(test, cmd.out_dir), cmd.out_dir / "test.jsonl");
  CommandOutput out;
  out.messages.push_back(std::string("split (") + split_mode_name(cmd.options.mode) +
                         "): train " + std::to_string(train.records.size()) + ", test " +
                         std::to_string(test.records.size()));
  return out;
}

CommandOutput run_train(const TrainCommand& cmd) {
  require_file(cmd.features, "feature table");
  if (cmd.subset) require_file(*cmd.subset, "subset manifest");
  const TrainingSet data = to_training_set(load_rows(cmd.features, cmd.subset));
  require_parent(cmd.out);
  TrainOptions opts;
  opts.c = cmd.c;
  opts.seed = cmd.seed;
  const TrainResult result = train(data, opts);
  save_svm(result.model, cmd.out);
  CommandOutput out;
  out.messages.push_back("trained on " + std::to_string(data.samples.size()) + " frames, " +
                         std::to_string(result.model.support_vectors.size()) +
                         " support vectors, max KKT violation " +
                         format_double(result.max_kkt_violation));
  return out;
}

CommandOutput run_evaluate(const EvaluateCommand& cmd) {
  require_file(cmd.model, "model");
  require_file(cmd.features, "feature table");
  if (cmd.subset) require_file(*cmd.subset, "subset manifest");
  const SvmModel model = load_svm(cmd.model);
  const std::vector<ScoredFrame> scores = score_features(model, load_rows(cmd.features, cmd.subset));
  const RocCurve roc = score_roc(scores);
  require_dir(cmd.out_dir);
  save_scores(scores, cmd.out_dir / "scores.csv");
  detail::write_text(cmd.out_dir / "roc.csv", roc_table(roc));
  detail::write_text(cmd.out_dir / "summary.csv",
                     "key,value\nframes," + std::to_string(scores.size()) + "\nauc," +
                         format_double(roc.auc) + "\n");
  CommandOutput out;
  out.messages.push_back("AUC " + format_double(roc.auc) + " on " + std::to_string(scores.size()) +
                         " frames");
  return out;
}

CommandOutput run_report(const ReportCommand& cmd) {
  require_file(cmd.features, "feature table");
  if (cmd.poses) require_file(*cmd.poses, "pose file");
  if (cmd.scores) require_file(*cmd.scores, "score table");
  if (cmd.manifest) require_file(*cmd.manifest, "manifest");
  if (cmd.bins < 1) throw Error(ErrorCode::kInvalidInput, "bins must be positive");

  const std::vector<FeatureRecord> rows = load_feature_records(cmd.features);
  if (rows.empty()) throw Error(ErrorCode::kUndefinedMetric, "feature table has no rows");
  require_dir(cmd.out_dir);

  std::vector<FlipFlags> flags;
  std::vector<double> cosine;
  std::vector<std::optional<Label>> labels;
  for (const FeatureRecord& r : rows) {
    flags.push_back({r.inner_flipped, r.all_flipped, r.features.label});
    cosine.push_back(r.cosine_distance);
    labels.push_back(r.features.label);
  }

  const FlipContingency table = flip_contingency(flags);
  detail::write_text(cmd.out_dir / "contingency.csv",
                     "inner,all,proportion\n"
                     "flipped,flipped," + format_double(table.both_flipped) + "\n"
                     "flipped,correct," + format_double(table.inner_only) + "\n"
                     "correct,flipped," + format_double(table.all_only) + "\n"
                     "correct,correct," + format_double(table.neither) + "\n");

  const ConditionalFakeProbability cond = conditional_fake_prob(flags);
  detail::write_text(cmd.out_dir / "conditional.csv",
                     "condition,frames,p_fake\n"
                     "conflicting," + std::to_string(cond.conflicting_frames) + "," +
                         optional_number(cond.given_conflicting) + "\n"
                     "non_conflicting," + std::to_string(cond.non_conflicting_frames) + "," +
                         optional_number(cond.given_non_conflicting) + "\n");

  detail::write_text(cmd.out_dir / "histogram_cosine.csv",
                     "bin_lo,bin_hi,authentic,fake,unlabeled\n" +
                         class_histogram("", cosine, labels, cmd.bins));

  if (cmd.poses) {
    static const char* kNames[6] = {"roll", "pitch", "yaw", "tx", "ty", "tz"};
    std::map<std::string, std::optional<Label>> label_of;
    for (const FeatureRecord& r : rows) label_of[r.frame_id] = r.features.label;
    std::string text = "parameter,bin_lo,bin_hi,authentic,fake,unlabeled\n";
    const std::vector<PoseRecord> poses = load_pose_records(*cmd.poses);
    for (LandmarkSubset set : {LandmarkSubset::kInner, LandmarkSubset::kAll}) {
      std::array<std::vector<double>, 6> values;
      std::vector<std::optional<Label>> pose_labels;
      for (const PoseRecord& p : poses) {
        if (p.set != set) continue;
        const auto it = label_of.find(p.frame_id);
        if (it == label_of.end()) continue;
        const auto params = pose_parameters(p.pose);
        for (int k = 0; k < 6; ++k) values[k].push_back(params[k]);
        pose_labels.push_back(it->second);
      }
      if (pose_labels.empty()) continue;
      for (int k = 0; k < 6; ++k) {
        text += class_histogram(std::string(subset_name(set)) + "_" + kNames[k] + ",", values[k],
                                pose_labels, cmd.bins);
      }
    }
    detail::write_text(cmd.out_dir / "histogram_parameters.csv", text);
  }

  std::string summary = "key,value\nframes," + std::to_string(rows.size()) + "\n";
  size_t inner_flips = 0, all_flips = 0;
  for (const FlipFlags& f : flags) {
    inner_flips += f.inner_flipped ? 1 : 0;
    all_flips += f.all_flipped ? 1 : 0;
  }
  const double n = static_cast<double>(rows.size());
  summary += "inner_flip_share," + format_double(inner_flips / n) + "\n";
  summary += "all_flip_share," + format_double(all_flips / n) + "\n";
  summary += "at_least_one_flipped," + format_double(table.at_least_one) + "\n";
  summary += "conflicting," + format_double(table.conflicting) + "\n";
  summary += "p_fake_given_conflicting," + optional_number(cond.given_conflicting) + "\n";
  summary += "p_fake_given_non_conflicting," + optional_number(cond.given_non_conflicting) + "\n";
  if (cmd.manifest) {
    const DatasetManifest m = load_manifest(*cmd.manifest);
    summary += "manifest_frames," + std::to_string(m.records.size()) + "\n";
    summary += "coverage," +
               (m.records.empty() ? std::string("NA") : format_double(n / m.records.size())) + "\n";
  }
  CommandOutput out;
  if (cmd.scores) {
    const RocCurve roc = score_roc(load_scores(*cmd.scores));
    detail::write_text(cmd.out_dir / "roc.csv", roc_table(roc));
    summary += "auc," + format_double(roc.auc) + "\n";
    out.messages.push_back("AUC " + format_double(roc.auc));
  }
  detail::write_text(cmd.out_dir / "summary.csv", summary);
  out.messages.push_back("report written to " + cmd.out_dir.string());
  return out;
}

CommandOutput run_leakage(const LeakageCommand& cmd) {
  require_file(cmd.manifest, "manifest");
  require_file(cmd.model, "model");
  cmd.solver.validate();
  const DatasetManifest manifest = load_manifest(cmd.manifest);
  const FaceModel3D model = load_model(cmd.model);
  require_parent(cmd.out);
  const LeakageResult r = identity_leakage_experiment(manifest, model, cmd.solver, cmd.c, cmd.seed);
  detail::write_text(cmd.out, "key,value\nauc_overlapping," + format_double(r.auc_overlapping) +
                                  "\nauc_disjoint," + format_double(r.auc_disjoint) + "\ngap," +
                                  format_double(r.gap()) + "\nframes_used," +
                                  std::to_string(r.frames_used) + "\nframes_total," +
                                  std::to_string(r.frames_total) + "\n");
  CommandOutput out;
  out.messages.push_back("AUC overlapping " + format_double(r.auc_overlapping) + ", disjoint " +
                         format_double(r.auc_disjoint) + ", gap " + format_double(r.gap()));
  return out;
}

}  // namespace headpose
