/* C interface to the head-pose library. Every fallible call returns an
 * hp_status; on failure hp_last_error() describes the problem for the calling
 * thread until its next library call. Handles are opaque and owned by the
 * caller, who releases them with the matching *_free function. */
#ifndef HEADPOSE_H
#define HEADPOSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HP_API __declspec(dllexport)
#else
#define HP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hp_status {
  HP_OK = 0,
  HP_ERR_INVALID_INPUT = 1,
  HP_ERR_PARSE = 2,
  HP_ERR_IO = 3,
  HP_ERR_PROJECTION_SINGULARITY = 4,
  HP_ERR_INSUFFICIENT_POINTS = 5,
  HP_ERR_NUMERICAL_FAILURE = 6,
  HP_ERR_DEGENERATE_TRAINING = 7,
  HP_ERR_MODEL_INCOMPLETE = 8,
  HP_ERR_UNDEFINED_METRIC = 9,
  HP_ERR_SPLIT_INFEASIBLE = 10,
  HP_ERR_SPEC_INVALID = 11,
  HP_ERR_INTERNAL = 12
} hp_status;

HP_API const char* hp_last_error(void);
HP_API const char* hp_status_name(hp_status status);
HP_API const char* hp_version(void);

/* ---- geometry ---- */

#define HP_LANDMARK_COUNT 68
#define HP_FEATURE_COUNT 12

typedef enum hp_subset { HP_SUBSET_INNER = 0, HP_SUBSET_ALL = 1 } hp_subset;

typedef struct hp_model hp_model;

HP_API hp_status hp_model_load(const char* csv_path, const char* sidecar_path, hp_model** out);
HP_API hp_status hp_model_generate(uint64_t seed, hp_model** out);
HP_API hp_status hp_model_save(const hp_model* model, const char* csv_path);
HP_API void hp_model_free(hp_model* model);
HP_API double hp_model_planarity(const hp_model* model);
/* Writes up to `capacity` indices; *count receives the subset size. */
HP_API hp_status hp_model_indices(const hp_model* model, hp_subset subset, int* indices,
                                  size_t capacity, size_t* count);

typedef struct hp_solver_config {
  int max_lm_iterations;
  double lm_initial_damping;
  double damping_up;
  double damping_down;
  double convergence_tol;
  int correction_enabled;
  int correction_after_iterations;
} hp_solver_config;

HP_API void hp_solver_config_default(hp_solver_config* config);

typedef struct hp_pose {
  double rotation[9]; /* row-major */
  double translation[3];
  double cost;
  int flipped;
  int converged;
  int iterations;
  int corrected;
  int could_not_correct;
  int ill_conditioned;
} hp_pose;

/* `landmarks` holds 68 (x, y) pixel pairs. A null config selects defaults. */
HP_API hp_status hp_estimate_pose(const hp_model* model, hp_subset subset,
                                  const double* landmarks, int image_width, int image_height,
                                  const hp_solver_config* config, hp_pose* out);
HP_API hp_status hp_flip_pose(const hp_pose* pose, hp_pose* out);
HP_API hp_status hp_reprojection_cost(const hp_model* model, hp_subset subset,
                                      const hp_pose* pose, const double* landmarks,
                                      int image_width, int image_height, double* cost);

/* ---- features and metrics ---- */

HP_API hp_status hp_pose_features(const hp_pose* inner, const hp_pose* all,
                                  double features[HP_FEATURE_COUNT], double* cosine_distance);
/* labels: 1 fake, 0 authentic. */
HP_API hp_status hp_roc_auc(const double* scores, const int* labels, size_t n, double* auc);

/* ---- classifier ---- */

typedef struct hp_svm hp_svm;

/* samples: n rows of `dim` values; labels: 1 fake, 0 authentic. */
HP_API hp_status hp_svm_train(const double* samples, const int* labels, size_t n, size_t dim,
                              double c, uint64_t seed, hp_svm** out);
HP_API hp_status hp_svm_load(const char* path, hp_svm** out);
HP_API hp_status hp_svm_save(const hp_svm* svm, const char* path);
HP_API void hp_svm_free(hp_svm* svm);
HP_API hp_status hp_svm_decision(const hp_svm* svm, const double* x, size_t dim, double* out);
HP_API hp_status hp_svm_probability(const hp_svm* svm, const double* x, size_t dim, double* out);

/* ---- pipeline commands ----
 * Optional path fields may be null. Progress lines go to `message_sink` and
 * per-frame warnings to `warning_sink` when those are non-null. */

typedef void (*hp_line_sink)(const char* line, void* user);

typedef struct hp_sinks {
  hp_line_sink message_sink;
  hp_line_sink warning_sink;
  void* user;
} hp_sinks;

typedef struct hp_synth_options {
  const char* out_dir;
  const char* scene_file;
  int has_seed;
  uint64_t seed;
  int frames;            /* 0 keeps the scene value */
  int subjects;          /* 0 keeps the scene value */
  double pixel_noise;    /* negative keeps the scene value */
  double swap_perturbation;
  double subject_deformation;
  int balanced;          /* -1 keeps the scene value */
} hp_synth_options;

HP_API void hp_synth_options_default(hp_synth_options* options);
HP_API hp_status hp_run_synth(const hp_synth_options* options, const hp_sinks* sinks);

typedef struct hp_pose_options {
  const char* manifest;
  const char* model;
  const char* out;
  hp_solver_config solver;
  double adversarial_init_rate;
  uint64_t seed;
} hp_pose_options;

HP_API hp_status hp_run_pose(const hp_pose_options* options, const hp_sinks* sinks);

HP_API hp_status hp_run_features(const char* manifest, const char* poses, const char* out,
                                 const hp_sinks* sinks);

typedef enum hp_split_mode {
  HP_SPLIT_DISJOINT_SUBJECTS = 0,
  HP_SPLIT_OVERLAPPING_SUBJECTS = 1
} hp_split_mode;

typedef struct hp_split_options {
  const char* manifest;
  const char* out_dir;
  hp_split_mode mode;
  uint64_t seed;
  int balance;
  double test_fraction;
} hp_split_options;

HP_API hp_status hp_run_split(const hp_split_options* options, const hp_sinks* sinks);

typedef struct hp_train_options {
  const char* features;
  const char* subset;
  const char* out;
  double c;
  uint64_t seed;
} hp_train_options;

HP_API hp_status hp_run_train(const hp_train_options* options, const hp_sinks* sinks);

typedef struct hp_evaluate_options {
  const char* model;
  const char* features;
  const char* subset;
  const char* out_dir;
} hp_evaluate_options;

HP_API hp_status hp_run_evaluate(const hp_evaluate_options* options, const hp_sinks* sinks);

typedef struct hp_report_options {
  const char* features;
  const char* poses;
  const char* scores;
  const char* manifest;
  const char* out_dir;
  int bins;
} hp_report_options;

HP_API hp_status hp_run_report(const hp_report_options* options, const hp_sinks* sinks);

typedef struct hp_leakage_options {
  const char* manifest;
  const char* model;
  const char* out;
  hp_solver_config solver;
  double c;
  uint64_t seed;
} hp_leakage_options;

HP_API hp_status hp_run_leakage(const hp_leakage_options* options, const hp_sinks* sinks);

#ifdef __cplusplus
}
#endif

#endif /* HEADPOSE_H */
