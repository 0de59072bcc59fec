#include "headpose/headpose.h"

#include <exception>
#include <string>

#include "headpose/classifier.hpp"
#include "headpose/commands.hpp"
#include "headpose/evaluation.hpp"
#include "headpose/features.hpp"
#include "headpose/pnp_solver.hpp"
#include "headpose/synthetic.hpp"

struct hp_model {
  headpose::FaceModel3D model;
};

struct hp_svm {
  headpose::SvmModel model;
};

namespace {

using namespace headpose;

thread_local std::string g_last_error;

template <typename F>
hp_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return HP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<hp_status>(static_cast<int>(e.code()));
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return HP_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) throw Error(ErrorCode::kInvalidInput, std::string(name) + " is null");
}

std::optional<fs::path> optional_path(const char* p) {
  if (!p || !*p) return std::nullopt;
  return fs::path(p);
}

fs::path required_path(const char* p, const char* name) {
  if (!p || !*p) throw Error(ErrorCode::kInvalidInput, std::string(name) + " path is missing");
  return fs::path(p);
}

SolverConfig to_config(const hp_solver_config* c) {
  SolverConfig cfg;
  if (!c) return cfg;
  cfg.max_lm_iterations = c->max_lm_iterations;
  cfg.lm_initial_damping = c->lm_initial_damping;
  cfg.damping_up = c->damping_up;
  cfg.damping_down = c->damping_down;
  cfg.convergence_tol = c->convergence_tol;
  cfg.correction_enabled = c->correction_enabled != 0;
  cfg.correction_after_iterations = c->correction_after_iterations;
  return cfg;
}

void to_c(const HeadPose& p, hp_pose* out) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out->rotation[3 * r + c] = p.rotation(r, c);
    out->translation[r] = p.translation[r];
  }
  out->cost = p.cost;
  out->flipped = p.flipped;
  out->converged = p.converged;
  out->iterations = p.iterations;
  out->corrected = p.corrected;
  out->could_not_correct = p.could_not_correct;
  out->ill_conditioned = p.ill_conditioned;
}

HeadPose from_c(const hp_pose* in) {
  HeadPose p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = in->rotation[3 * r + c];
    p.translation[r] = in->translation[r];
  }
  p.cost = in->cost;
  p.flipped = in->flipped != 0;
  p.converged = in->converged != 0;
  p.iterations = in->iterations;
  p.corrected = in->corrected != 0;
  p.could_not_correct = in->could_not_correct != 0;
  p.ill_conditioned = in->ill_conditioned != 0;
  return p;
}

LandmarkSet2D to_landmarks(const double* xy, int w, int h) {
  require(xy, "landmarks");
  LandmarkSet2D set;
  set.image_width = w;
  set.image_height = h;
  for (int i = 0; i < kLandmarkCount; ++i) set.points.emplace_back(xy[2 * i], xy[2 * i + 1]);
  set.validate();
  if (w <= 0 || h <= 0) throw Error(ErrorCode::kInvalidInput, "image size must be positive");
  return set;
}

LandmarkSubset to_subset(hp_subset s) {
  if (s == HP_SUBSET_INNER) return LandmarkSubset::kInner;
  if (s == HP_SUBSET_ALL) return LandmarkSubset::kAll;
  throw Error(ErrorCode::kInvalidInput, "unknown landmark subset");
}

void emit(const CommandOutput& out, const hp_sinks* sinks) {
  if (!sinks) return;
  if (sinks->message_sink) {
    for (const auto& m : out.messages) sinks->message_sink(m.c_str(), sinks->user);
  }
  if (sinks->warning_sink) {
    for (const auto& w : out.warnings) sinks->warning_sink(w.c_str(), sinks->user);
  }
}

}  // namespace

extern "C" {

const char* hp_last_error(void) { return g_last_error.c_str(); }

const char* hp_status_name(hp_status status) {
  if (status == HP_OK) return "ok";
  if (status == HP_ERR_INTERNAL) return "internal";
  if (status < HP_OK || status > HP_ERR_INTERNAL) return "unknown";
  return error_code_name(static_cast<ErrorCode>(status));
}

const char* hp_version(void) { return "1.0.0"; }

hp_status hp_model_load(const char* csv_path, const char* sidecar_path, hp_model** out) {
  return guarded([&] {
    require(out, "out");
    const fs::path csv = required_path(csv_path, "model");
    *out = new hp_model{load_model(csv, optional_path(sidecar_path).value_or(fs::path()))};
  });
}

hp_status hp_model_generate(uint64_t seed, hp_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = new hp_model{generate_model(seed)};
  });
}

hp_status hp_model_save(const hp_model* model, const char* csv_path) {
  return guarded([&] {
    require(model, "model");
    save_model(model->model, required_path(csv_path, "model"));
  });
}

void hp_model_free(hp_model* model) { delete model; }

double hp_model_planarity(const hp_model* model) {
  return model ? model->model.planarity_ratio() : 0.0;
}

hp_status hp_model_indices(const hp_model* model, hp_subset subset, int* indices,
                           size_t capacity, size_t* count) {
  return guarded([&] {
    require(model, "model");
    require(count, "count");
    const auto& idx = model->model.indices(to_subset(subset));
    *count = idx.size();
    for (size_t k = 0; k < idx.size() && k < capacity; ++k) {
      require(indices, "indices");
      indices[k] = idx[k];
    }
  });
}

void hp_solver_config_default(hp_solver_config* config) {
  if (!config) return;
  const SolverConfig d;
  config->max_lm_iterations = d.max_lm_iterations;
  config->lm_initial_damping = d.lm_initial_damping;
  config->damping_up = d.damping_up;
  config->damping_down = d.damping_down;
  config->convergence_tol = d.convergence_tol;
  config->correction_enabled = d.correction_enabled;
  config->correction_after_iterations = d.correction_after_iterations;
}

hp_status hp_estimate_pose(const hp_model* model, hp_subset subset, const double* landmarks,
                           int image_width, int image_height, const hp_solver_config* config,
                           hp_pose* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    const LandmarkSet2D obs = to_landmarks(landmarks, image_width, image_height);
    const CameraIntrinsics cam = approximate_intrinsics(image_width, image_height);
    const HeadPose p = estimate_pose(model->model, model->model.indices(to_subset(subset)), obs,
                                     cam, to_config(config));
    to_c(p, out);
  });
}

hp_status hp_flip_pose(const hp_pose* pose, hp_pose* out) {
  return guarded([&] {
    require(pose, "pose");
    require(out, "out");
    to_c(flip_pose(from_c(pose)), out);
  });
}

hp_status hp_reprojection_cost(const hp_model* model, hp_subset subset, const hp_pose* pose,
                               const double* landmarks, int image_width, int image_height,
                               double* cost) {
  return guarded([&] {
    require(model, "model");
    require(pose, "pose");
    require(cost, "cost");
    const LandmarkSet2D obs = to_landmarks(landmarks, image_width, image_height);
    *cost = reprojection_cost(model->model, model->model.indices(to_subset(subset)),
                              from_c(pose), approximate_intrinsics(image_width, image_height), obs);
  });
}

hp_status hp_pose_features(const hp_pose* inner, const hp_pose* all,
                           double features[HP_FEATURE_COUNT], double* cosine) {
  return guarded([&] {
    require(inner, "inner");
    require(all, "all");
    require(features, "features");
    PosePair pair;
    pair.inner = from_c(inner);
    pair.all = from_c(all);
    const FeatureVector f = pose_pair_features(pair);
    for (int k = 0; k < kFeatureCount; ++k) features[k] = f.values[k];
    if (cosine) *cosine = cosine_distance(pair.all.rotation, pair.inner.rotation);
  });
}

hp_status hp_roc_auc(const double* scores, const int* labels, size_t n, double* auc) {
  return guarded([&] {
    require(auc, "auc");
    if (n > 0) {
      require(scores, "scores");
      require(labels, "labels");
    }
    *auc = roc_auc(std::span<const double>(scores, n), std::span<const int>(labels, n)).auc;
  });
}

hp_status hp_svm_train(const double* samples, const int* labels, size_t n, size_t dim, double c,
                       uint64_t seed, hp_svm** out) {
  return guarded([&] {
    require(out, "out");
    if (n > 0) {
      require(samples, "samples");
      require(labels, "labels");
    }
    TrainingSet data;
    for (size_t i = 0; i < n; ++i) {
      data.samples.emplace_back(samples + i * dim, samples + (i + 1) * dim);
      data.labels.push_back(labels[i] != 0 ? 1 : -1);
    }
    TrainOptions opts;
    opts.c = c;
    opts.seed = seed;
    *out = new hp_svm{train(data, opts).model};
  });
}

hp_status hp_svm_load(const char* path, hp_svm** out) {
  return guarded([&] {
    require(out, "out");
    *out = new hp_svm{load_svm(required_path(path, "model"))};
  });
}

hp_status hp_svm_save(const hp_svm* svm, const char* path) {
  return guarded([&] {
    require(svm, "svm");
    save_svm(svm->model, required_path(path, "model"));
  });
}

void hp_svm_free(hp_svm* svm) { delete svm; }

hp_status hp_svm_decision(const hp_svm* svm, const double* x, size_t dim, double* out) {
  return guarded([&] {
    require(svm, "svm");
    require(x, "x");
    require(out, "out");
    *out = decision_value(svm->model, std::span<const double>(x, dim));
  });
}

hp_status hp_svm_probability(const hp_svm* svm, const double* x, size_t dim, double* out) {
  return guarded([&] {
    require(svm, "svm");
    require(x, "x");
    require(out, "out");
    *out = predict_proba(svm->model, std::span<const double>(x, dim));
  });
}

void hp_synth_options_default(hp_synth_options* o) {
  if (!o) return;
  *o = hp_synth_options{};
  o->pixel_noise = -1.0;
  o->swap_perturbation = -1.0;
  o->subject_deformation = -1.0;
  o->balanced = -1;
}

hp_status hp_run_synth(const hp_synth_options* o, const hp_sinks* sinks) {
  return guarded([&] {
    require(o, "options");
    SynthCommand cmd;
    cmd.out_dir = required_path(o->out_dir, "output");
    cmd.scene_file = optional_path(o->scene_file);
    if (o->has_seed) cmd.seed = o->seed;
    if (o->frames > 0) cmd.frames = o->frames;
    if (o->subjects > 0) cmd.subjects = o->subjects;
    if (o->pixel_noise >= 0.0) cmd.pixel_noise = o->pixel_noise;
    if (o->swap_perturbation >= 0.0) cmd.swap_perturbation = o->swap_perturbation;
    if (o->subject_deformation >= 0.0) cmd.subject_deformation = o->subject_deformation;
    if (o->balanced >= 0) cmd.balanced = o->balanced != 0;
    emit(run_synth(cmd), sinks);
  });
}

hp_status hp_run_pose(const hp_pose_options* o, const hp_sinks* sinks) {
  return guarded([&] {
    require(o, "options");
    PoseCommand cmd;
    cmd.manifest = required_path(o->manifest, "manifest");
    cmd.model = required_path(o->model, "model");
    cmd.out = required_path(o->out, "output");
    cmd.solver = to_config(&o->solver);
    cmd.adversarial_init_rate = o->adversarial_init_rate;
    cmd.seed = o->seed;
    emit(run_pose(cmd), sinks);
  });
}

hp_status hp_run_features(const char* manifest, const char* poses, const char* out,
                          const hp_sinks* sinks) {
  return guarded([&] {
    FeaturesCommand cmd;
    cmd.manifest = required_path(manifest, "manifest");
    cmd.poses = required_path(poses, "pose");
    cmd.out = required_path(out, "output");
    emit(run_features(cmd), sinks);
  });
}

hp_status hp_run_split(const hp_split_options* o, const hp_sinks* sinks) {
  return guarded([&] {
    require(o, "options");
    SplitCommand cmd;
    cmd.manifest = required_path(o->manifest, "manifest");
    cmd.out_dir = required_path(o->out_dir, "output");
    if (o->mode != HP_SPLIT_DISJOINT_SUBJECTS && o->mode != HP_SPLIT_OVERLAPPING_SUBJECTS) {
      throw Error(ErrorCode::kInvalidInput, "unknown split mode");
    }
    cmd.options.mode = o->mode == HP_SPLIT_DISJOINT_SUBJECTS ? SplitMode::kDisjointSubjects
                                                             : SplitMode::kOverlappingSubjects;
    cmd.options.seed = o->seed;
    cmd.options.balance = o->balance != 0;
    cmd.options.test_fraction = o->test_fraction;
    emit(run_split(cmd), sinks);
  });
}

hp_status hp_run_train(const hp_train_options* o, const hp_sinks* sinks) {
  return guarded([&] {
    require(o, "options");
    TrainCommand cmd;
    cmd.features = required_path(o->features, "feature");
    cmd.subset = optional_path(o->subset);
    cmd.out = required_path(o->out, "output");
    cmd.c = o->c;
    cmd.seed = o->seed;
    emit(run_train(cmd), sinks);
  });
}

hp_status hp_run_evaluate(const hp_evaluate_options* o, const hp_sinks* sinks) {
  return guarded([&] {
    require(o, "options");
    EvaluateCommand cmd;
    cmd.model = required_path(o->model, "model");
    cmd.features = required_path(o->features, "feature");
    cmd.subset = optional_path(o->subset);
    cmd.out_dir = required_path(o->out_dir, "output");
    emit(run_evaluate(cmd), sinks);
  });
}

hp_status hp_run_report(const hp_report_options* o, const hp_sinks* sinks) {
  return guarded([&] {
    require(o, "options");
    ReportCommand cmd;
    cmd.features = required_path(o->features, "feature");
    cmd.poses = optional_path(o->poses);
    cmd.scores = optional_path(o->scores);
    cmd.manifest = optional_path(o->manifest);
    cmd.out_dir = required_path(o->out_dir, "output");
    cmd.bins = o->bins;
    emit(run_report(cmd), sinks);
  });
}

hp_status hp_run_leakage(const hp_leakage_options* o, const hp_sinks* sinks) {
  return guarded([&] {
    require(o, "options");
    LeakageCommand cmd;
    cmd.manifest = required_path(o->manifest, "manifest");
    cmd.model = required_path(o->model, "model");
    cmd.out = required_path(o->out, "output");
    cmd.solver = to_config(&o->solver);
    cmd.c = o->c;
    cmd.seed = o->seed;
    emit(run_leakage(cmd), sinks);
  });
}

}  // extern "C"
