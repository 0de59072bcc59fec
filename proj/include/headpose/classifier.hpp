#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace headpose {

struct TrainingSet {
  std::vector<std::vector<double>> samples;
  std::vector<int> labels;  // +1 fake, -1 authentic
};

/// RBF-kernel SVM with Platt-scaled probabilities.
struct SvmModel {
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> dual_coefficients;  // alpha_i * y_i
  double bias = 0.0;
  double gamma = 0.0;
  std::optional<double> platt_a;
  std::optional<double> platt_b;
  // Training metadata.
  double c = 1.0;
  std::uint64_t seed = 0;
  int feature_count = 0;
};

struct TrainOptions {
  double c = 1.0;
  std::uint64_t seed = 0;
  std::optional<double> gamma;  // defaults to 1 / feature count
  double tolerance = 1e-3;
  int platt_folds = 3;
};

struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  // Value of 0.5 a^T Q a - e^T a at the solution.
  double objective = 0.0;
  int iterations = 0;
};

struct TrainResult {
  SvmModel model;
  DualSolution dual;
  double max_kkt_violation = 0.0;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

// SMO with second-order working-set selection. Stops when the maximal
// violating pair gap drops below `tolerance`.
DualSolution solve_dual(const TrainingSet& data, double c, double gamma, double tolerance);

// Largest epsilon-KKT violation of (alpha, bias) on the training set.
double kkt_violation(const TrainingSet& data, const DualSolution& dual, double c,
                     double gamma);

struct PlattParameters {
  double a = 0.0;
  double b = 0.0;
};

// Sigmoid fit P(fake | f) = 1 / (1 + exp(a f + b)) with regularized targets.
PlattParameters fit_platt(std::span<const double> decision_values, std::span<const int> labels);

TrainResult train(const TrainingSet& data, const TrainOptions& options);

double decision_value(const SvmModel& model, std::span<const double> x);
double predict_proba(const SvmModel& model, std::span<const double> x);

void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);
std::string svm_to_json(const SvmModel& model);
SvmModel svm_from_json(const std::string& text);

}  // namespace headpose
