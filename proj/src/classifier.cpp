#include "headpose/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "headpose/error.hpp"
#include "json.hpp"
#include "text_util.hpp"

namespace headpose {

namespace {

constexpr double kTau = 1e-12;
constexpr int kFormatVersion = 1;

void check_training_set(const TrainingSet& data) {
  if (data.samples.size() != data.labels.size()) {
    throw Error(ErrorCode::kInvalidInput, "sample and label counts differ");
  }
  if (data.samples.size() < 2) {
    throw Error(ErrorCode::kDegenerateTraining, "training needs at least 2 samples");
  }
  const size_t dim = data.samples.front().size();
  if (dim == 0) throw Error(ErrorCode::kInvalidInput, "samples have no features");
  bool pos = false, neg = false;
  for (size_t i = 0; i < data.samples.size(); ++i) {
    if (data.samples[i].size() != dim) {
      throw Error(ErrorCode::kInvalidInput, "inconsistent feature dimension");
    }
    for (double v : data.samples[i]) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "non-finite feature value");
    }
    if (data.labels[i] == 1) {
      pos = true;
    } else if (data.labels[i] == -1) {
      neg = true;
    } else {
      throw Error(ErrorCode::kInvalidInput, "labels must be +1 or -1");
    }
  }
  if (!pos || !neg) {
    throw Error(ErrorCode::kDegenerateTraining,
                "training data contains a single class; both fake and authentic samples are required");
  }
}

// Rows of the label-signed kernel matrix Q_ij = y_i y_j K(x_i, x_j).
class KernelMatrix {
 public:
  KernelMatrix(const TrainingSet& data, double gamma) : data_(data), gamma_(gamma) {
    const size_t n = data.samples.size();
    diag_.resize(n);
    for (size_t i = 0; i < n; ++i) diag_[i] = 1.0;  // K(x, x) = 1 for the RBF kernel
    if (n <= kDenseLimit) {
      dense_.resize(n * n);
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = i; j < n; ++j) {
          const double q = data.labels[i] * data.labels[j] *
                           rbf_kernel(data.samples[i], data.samples[j], gamma);
          dense_[i * n + j] = q;
          dense_[j * n + i] = q;
        }
      }
    }
    row_.resize(n);
  }

  std::span<const double> row(size_t i) {
    const size_t n = diag_.size();
    if (!dense_.empty()) return {dense_.data() + i * n, n};
    for (size_t j = 0; j < n; ++j) {
      row_[j] = data_.labels[i] * data_.labels[j] *
                rbf_kernel(data_.samples[i], data_.samples[j], gamma_);
    }
    return row_;
  }

  // Copy, since the scratch row is reused between calls.
  std::vector<double> row_copy(size_t i) {
    const auto r = row(i);
    return {r.begin(), r.end()};
  }

  double diag(size_t i) const { return diag_[i]; }

 private:
  static constexpr size_t kDenseLimit = 5000;
  const TrainingSet& data_;
  double gamma_;
  std::vector<double> diag_;
  std::vector<double> dense_;
  std::vector<double> row_;
};

double sigmoid_probability(double a, double b, double f) {
  const double fapb = a * f + b;
  // 1 / (1 + exp(fapb)) without overflow.
  if (fapb >= 0.0) {
    const double e = std::exp(-fapb);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(fapb));
}

}  // namespace

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

DualSolution solve_dual(const TrainingSet& data, double c, double gamma, double tolerance) {
  check_training_set(data);
  if (!(c > 0.0) || !(gamma > 0.0) || !(tolerance > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "C, gamma and tolerance must be positive");
  }
  const int n = static_cast<int>(data.samples.size());
  const std::vector<int>& y = data.labels;
  KernelMatrix q(data, gamma);

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  const auto upper = [&](int t) { return alpha[t] >= c; };
  const auto lower = [&](int t) { return alpha[t] <= 0.0; };

  const long long max_iter = std::max<long long>(10'000'000LL, 100LL * n);
  int iter = 0;
  while (iter < max_iter) {
    // Maximal violating index i.
    double gmax = -std::numeric_limits<double>::infinity();
    int i = -1;
    for (int t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = t;
        }
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i = t;
      }
    }
    if (i < 0) break;
    const std::vector<double> q_i = q.row_copy(i);

    // Second-order choice of j.
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    int j = -1;
    for (int t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0.0) {
          const double quad = q.diag(i) + q.diag(t) - 2.0 * y[i] * q_i[t];
          const double obj = -(diff * diff) / (quad > 0.0 ? quad : kTau);
          if (obj <= best) {
            best = obj;
            j = t;
          }
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0.0) {
          const double quad = q.diag(i) + q.diag(t) + 2.0 * y[i] * q_i[t];
          const double obj = -(diff * diff) / (quad > 0.0 ? quad : kTau);
          if (obj <= best) {
            best = obj;
            j = t;
          }
        }
      }
    }
    if (gmax + gmax2 < tolerance || j < 0) break;
    ++iter;

    const std::vector<double> q_j = q.row_copy(j);
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = q.diag(i) + q.diag(j) + 2.0 * q_i[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = q.diag(i) + q.diag(j) - 2.0 * q_i[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = sum;
        }
        if (alpha[i] < 0.0) {
          alpha[i] = 0.0;
          alpha[j] = sum;
        }
      }
    }
    const double d_ai = alpha[i] - old_ai;
    const double d_aj = alpha[j] - old_aj;
    for (int t = 0; t < n; ++t) grad[t] += q_i[t] * d_ai + q_j[t] * d_aj;
  }

  // Bias: average over free vectors, otherwise the midpoint of the feasible
  // interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (int t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

  DualSolution out;
  out.alpha = std::move(alpha);
  out.bias = -rho;
  out.iterations = iter;
  double obj = 0.0;
  for (int t = 0; t < n; ++t) obj += out.alpha[t] * (grad[t] - 1.0);
  out.objective = 0.5 * obj;
  return out;
}

double kkt_violation(const TrainingSet& data, const DualSolution& dual, double c,
                     double gamma) {
  const size_t n = data.samples.size();
  double worst = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double f = dual.bias;
    for (size_t j = 0; j < n; ++j) {
      if (dual.alpha[j] != 0.0) {
        f += dual.alpha[j] * data.labels[j] * rbf_kernel(data.samples[j], data.samples[i], gamma);
      }
    }
    const double margin = data.labels[i] * f - 1.0;
    double v = 0.0;
    if (dual.alpha[i] <= 0.0) {
      v = std::max(0.0, -margin);
    } else if (dual.alpha[i] >= c) {
      v = std::max(0.0, margin);
    } else {
      v = std::abs(margin);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

PlattParameters fit_platt(std::span<const double> dec, std::span<const int> labels) {
  if (dec.size() != labels.size() || dec.empty()) {
    throw Error(ErrorCode::kInvalidInput, "Platt fit needs matching non-empty inputs");
  }
  double prior1 = 0.0, prior0 = 0.0;
  for (int l : labels) (l > 0 ? prior1 : prior0) += 1.0;
  const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo_target = 1.0 / (prior0 + 2.0);
  const size_t n = dec.size();
  std::vector<double> t(n);
  for (size_t i = 0; i < n; ++i) t[i] = labels[i] > 0 ? hi_target : lo_target;

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;

  const auto objective = [&](double a, double b) {
    double f = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double fapb = dec[i] * a + b;
      if (fapb >= 0.0) {
        f += t[i] * fapb + std::log1p(std::exp(-fapb));
      } else {
        f += (t[i] - 1.0) * fapb + std::log1p(std::exp(fapb));
      }
    }
    return f;
  };

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(a, b);
  for (int it = 0; it < kMaxIter; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double fapb = dec[i] * a + b;
      double p, q;
      if (fapb >= 0.0) {
        const double e = std::exp(-fapb);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(fapb);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {a, b};
}

TrainResult train(const TrainingSet& data, const TrainOptions& options) {
  check_training_set(data);
  const int dim = static_cast<int>(data.samples.front().size());
  const double gamma = options.gamma.value_or(1.0 / dim);
  if (!(options.c > 0.0)) throw Error(ErrorCode::kInvalidInput, "C must be positive");

  TrainResult result;
  result.dual = solve_dual(data, options.c, gamma, options.tolerance);
  result.max_kkt_violation = kkt_violation(data, result.dual, options.c, gamma);

  SvmModel& model = result.model;
  model.gamma = gamma;
  model.bias = result.dual.bias;
  model.c = options.c;
  model.seed = options.seed;
  model.feature_count = dim;
  for (size_t i = 0; i < data.samples.size(); ++i) {
    if (result.dual.alpha[i] > 0.0) {
      model.support_vectors.push_back(data.samples[i]);
      model.dual_coefficients.push_back(result.dual.alpha[i] * data.labels[i]);
    }
  }

  // Out-of-sample decision values from stratified folds; too few samples per
  // class falls back to in-sample values.
  const size_t n = data.samples.size();
  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < n; ++i) (data.labels[i] > 0 ? pos : neg).push_back(i);
  const int folds = options.platt_folds;
  std::vector<double> dec(n, 0.0);
  if (folds >= 2 && pos.size() >= static_cast<size_t>(folds) &&
      neg.size() >= static_cast<size_t>(folds)) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<int> fold_of(n);
    for (size_t k = 0; k < pos.size(); ++k) fold_of[pos[k]] = static_cast<int>(k % folds);
    for (size_t k = 0; k < neg.size(); ++k) fold_of[neg[k]] = static_cast<int>(k % folds);
    for (int f = 0; f < folds; ++f) {
      TrainingSet sub;
      for (size_t i = 0; i < n; ++i) {
        if (fold_of[i] != f) {
          sub.samples.push_back(data.samples[i]);
          sub.labels.push_back(data.labels[i]);
        }
      }
      const DualSolution d = solve_dual(sub, options.c, gamma, options.tolerance);
      for (size_t i = 0; i < n; ++i) {
        if (fold_of[i] != f) continue;
        double v = d.bias;
        for (size_t j = 0; j < sub.samples.size(); ++j) {
          if (d.alpha[j] > 0.0) {
            v += d.alpha[j] * sub.labels[j] * rbf_kernel(sub.samples[j], data.samples[i], gamma);
          }
        }
        dec[i] = v;
      }
    }
  } else {
    for (size_t i = 0; i < n; ++i) dec[i] = decision_value(model, data.samples[i]);
  }
  const PlattParameters platt = fit_platt(dec, data.labels);
  model.platt_a = platt.a;
  model.platt_b = platt.b;
  return result;
}

double decision_value(const SvmModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.feature_count) {
    throw Error(ErrorCode::kInvalidInput, "feature dimension " + std::to_string(x.size()) +
                                              " does not match model dimension " +
                                              std::to_string(model.feature_count));
  }
  double f = model.bias;
  for (size_t i = 0; i < model.support_vectors.size(); ++i) {
    f += model.dual_coefficients[i] * rbf_kernel(model.support_vectors[i], x, model.gamma);
  }
  return f;
}

double predict_proba(const SvmModel& model, std::span<const double> x) {
  if (!model.platt_a || !model.platt_b) {
    throw Error(ErrorCode::kModelIncomplete, "model has no fitted Platt parameters");
  }
  return sigmoid_probability(*model.platt_a, *model.platt_b, decision_value(model, x));
}

std::string svm_to_json(const SvmModel& model) {
  // Doubles are written as shortest round-trip strings so reloading is exact.
  nlohmann::ordered_json doc;
  doc["format"] = "headpose-svm";
  doc["version"] = kFormatVersion;
  doc["kernel"] = "rbf";
  doc["gamma"] = detail::format_double(model.gamma);
  doc["bias"] = detail::format_double(model.bias);
  doc["platt_a"] = model.platt_a ? nlohmann::ordered_json(detail::format_double(*model.platt_a))
                                 : nlohmann::ordered_json(nullptr);
  doc["platt_b"] = model.platt_b ? nlohmann::ordered_json(detail::format_double(*model.platt_b))
                                 : nlohmann::ordered_json(nullptr);
  doc["training"] = {{"C", detail::format_double(model.c)},
                     {"seed", model.seed},
                     {"feature_count", model.feature_count}};
  auto& svs = doc["support_vectors"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < model.support_vectors.size(); ++i) {
    nlohmann::ordered_json x = nlohmann::ordered_json::array();
    for (double v : model.support_vectors[i]) x.push_back(detail::format_double(v));
    svs.push_back({{"coef", detail::format_double(model.dual_coefficients[i])}, {"x", x}});
  }
  return doc.dump(1) + "\n";
}

SvmModel svm_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("invalid SVM model JSON: ") + e.what());
  }
  const auto num = [](const nlohmann::json& v, const char* what) {
    double out = 0.0;
    if (!v.is_string() || !detail::try_parse_double(v.get<std::string>(), out)) {
      throw Error(ErrorCode::kParse, std::string("SVM model field '") + what + "' is not a number");
    }
    return out;
  };
  try {
    if (doc.value("format", "") != "headpose-svm") {
      throw Error(ErrorCode::kParse, "not a headpose SVM model document");
    }
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::kParse, "unsupported SVM model version");
    }
    SvmModel m;
    m.gamma = num(doc.at("gamma"), "gamma");
    m.bias = num(doc.at("bias"), "bias");
    if (!doc.at("platt_a").is_null()) m.platt_a = num(doc["platt_a"], "platt_a");
    if (!doc.at("platt_b").is_null()) m.platt_b = num(doc["platt_b"], "platt_b");
    const auto& tr = doc.at("training");
    m.c = num(tr.at("C"), "C");
    m.seed = tr.at("seed").get<std::uint64_t>();
    m.feature_count = tr.at("feature_count").get<int>();
    for (const auto& sv : doc.at("support_vectors")) {
      m.dual_coefficients.push_back(num(sv.at("coef"), "coef"));
      std::vector<double> x;
      for (const auto& v : sv.at("x")) x.push_back(num(v, "x"));
      if (static_cast<int>(x.size()) != m.feature_count) {
        throw Error(ErrorCode::kParse, "support vector dimension mismatch");
      }
      m.support_vectors.push_back(std::move(x));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed SVM model: ") + e.what());
  }
}

void save_svm(const SvmModel& model, const std::filesystem::path& path) {
  detail::write_text(path, svm_to_json(model));
}

SvmModel load_svm(const std::filesystem::path& path) {
  std::string text;
  for (const auto& l : detail::read_lines(path)) text += l + "\n";
  return svm_from_json(text);
}

}  // namespace headpose
