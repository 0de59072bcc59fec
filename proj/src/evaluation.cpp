#include "headpose/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "headpose/pipeline.hpp"

namespace headpose {

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidInput, "scores and labels differ in length");
  }
  std::int64_t positives = 0, negatives = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorCode::kInvalidInput, "non-finite score");
    (labels[i] != 0 ? positives : negatives) += 1;
  }
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kUndefinedMetric, "ROC/AUC needs both classes");
  }

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.false_positive_rates.push_back(0.0);
  roc.true_positive_rates.push_back(0.0);

  // Twice the Mann-Whitney count, kept integral so the ratio is exact.
  std::int64_t twice_wins = 0;
  std::int64_t tp = 0, fp = 0;
  size_t k = 0;
  while (k < order.size()) {
    const double s = scores[order[k]];
    std::int64_t group_pos = 0, group_neg = 0;
    while (k < order.size() && scores[order[k]] == s) {
      (labels[order[k]] != 0 ? group_pos : group_neg) += 1;
      ++k;
    }
    // Negatives strictly below this group.
    const std::int64_t neg_below = negatives - fp - group_neg;
    twice_wins += 2 * group_pos * neg_below + group_pos * group_neg;
    tp += group_pos;
    fp += group_neg;
    roc.thresholds.push_back(s);
    roc.false_positive_rates.push_back(static_cast<double>(fp) / static_cast<double>(negatives));
    roc.true_positive_rates.push_back(static_cast<double>(tp) / static_cast<double>(positives));
  }
  roc.auc = static_cast<double>(twice_wins) /
            (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
  return roc;
}

FlipContingency flip_contingency(std::span<const FlipFlags> frames) {
  if (frames.empty()) throw Error(ErrorCode::kUndefinedMetric, "flip contingency of no frames");
  size_t both = 0, inner = 0, all = 0, neither = 0;
  for (const FlipFlags& f : frames) {
    if (f.inner_flipped && f.all_flipped) ++both;
    else if (f.inner_flipped) ++inner;
    else if (f.all_flipped) ++all;
    else ++neither;
  }
  const double n = static_cast<double>(frames.size());
  FlipContingency c;
  c.frames = frames.size();
  c.both_flipped = both / n;
  c.inner_only = inner / n;
  c.all_only = all / n;
  c.neither = neither / n;
  c.at_least_one = (both + inner + all) / n;
  c.conflicting = (inner + all) / n;
  return c;
}

FlipContingency flip_contingency(std::span<const PosePair> pairs) {
  std::vector<FlipFlags> flags;
  flags.reserve(pairs.size());
  for (const PosePair& p : pairs) flags.push_back({p.inner.flipped, p.all.flipped, std::nullopt});
  return flip_contingency(flags);
}

ConditionalFakeProbability conditional_fake_prob(std::span<const FlipFlags> frames) {
  size_t conflicting = 0, conflicting_fake = 0, other = 0, other_fake = 0;
  for (const FlipFlags& f : frames) {
    if (!f.label) continue;
    const bool fake = *f.label == Label::kFake;
    if (f.inner_flipped != f.all_flipped) {
      ++conflicting;
      conflicting_fake += fake;
    } else {
      ++other;
      other_fake += fake;
    }
  }
  ConditionalFakeProbability p;
  p.conflicting_frames = conflicting;
  p.non_conflicting_frames = other;
  if (conflicting) p.given_conflicting = static_cast<double>(conflicting_fake) / conflicting;
  if (other) p.given_non_conflicting = static_cast<double>(other_fake) / other;
  return p;
}

const char* split_mode_name(SplitMode mode) {
  return mode == SplitMode::kDisjointSubjects ? "disjoint-subjects" : "overlapping-subjects";
}

SplitMode parse_split_mode(const std::string& text) {
  if (text == "disjoint-subjects" || text == "disjoint") return SplitMode::kDisjointSubjects;
  if (text == "overlapping-subjects" || text == "overlapping") return SplitMode::kOverlappingSubjects;
  throw Error(ErrorCode::kInvalidInput, "unknown split mode '" + text + "'");
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  size_t find(size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<size_t> parent_;
};

// Keeps an equal number of records per class, chosen at random; original
// order is preserved.
std::vector<size_t> balance_side(const DatasetManifest& m, std::vector<size_t> side,
                                 std::mt19937_64& rng, const char* side_name) {
  std::vector<size_t> fake, real;
  for (size_t i : side) (m.records[i].label == Label::kFake ? fake : real).push_back(i);
  const size_t keep = std::min(fake.size(), real.size());
  if (keep == 0) {
    throw Error(ErrorCode::kSplitInfeasible,
                std::string("balance: the ") + side_name + " side has no " +
                    (fake.empty() ? "fake" : "authentic") + " frames");
  }
  std::shuffle(fake.begin(), fake.end(), rng);
  std::shuffle(real.begin(), real.end(), rng);
  std::vector<size_t> out(fake.begin(), fake.begin() + keep);
  out.insert(out.end(), real.begin(), real.begin() + keep);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitOptions& options) {
  manifest.validate();
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "test fraction must lie in (0, 1)");
  }
  const size_t n = manifest.records.size();
  if (n < 2) throw Error(ErrorCode::kSplitInfeasible, "split needs at least 2 frames");
  std::mt19937_64 rng(options.seed);
  std::vector<bool> in_test(n, false);

  if (options.mode == SplitMode::kOverlappingSubjects) {
    // Stratified by label.
    for (Label label : {Label::kFake, Label::kAuthentic}) {
      std::vector<size_t> idx;
      for (size_t i = 0; i < n; ++i) {
        if (manifest.records[i].label == label) idx.push_back(i);
      }
      std::shuffle(idx.begin(), idx.end(), rng);
      const size_t n_test =
          static_cast<size_t>(std::llround(options.test_fraction * static_cast<double>(idx.size())));
      for (size_t k = 0; k < n_test && k < idx.size(); ++k) in_test[idx[k]] = true;
    }
  } else {
    // Connected groups of subject tokens.
    std::map<std::string, size_t> token_id;
    for (const auto& r : manifest.records) {
      for (const auto& s : r.subject_ids) token_id.emplace(s, token_id.size());
    }
    UnionFind uf(token_id.size() + n);
    for (size_t i = 0; i < n; ++i) {
      for (const auto& s : manifest.records[i].subject_ids) uf.unite(token_id.size() + i, token_id[s]);
    }
    std::map<size_t, std::vector<size_t>> groups;
    for (size_t i = 0; i < n; ++i) groups[uf.find(token_id.size() + i)].push_back(i);
    if (groups.size() < 2) {
      throw Error(ErrorCode::kSplitInfeasible,
                  "disjoint-subjects: all frames share one connected subject group");
    }
    // Stratify groups by majority label so both sides can hold both classes.
    std::vector<std::vector<size_t>> by_label[2];
    for (auto& [root, members] : groups) {
      size_t fakes = 0;
      for (size_t i : members) fakes += manifest.records[i].label == Label::kFake;
      by_label[2 * fakes >= members.size() ? 1 : 0].push_back(members);
    }
    for (auto& comps : by_label) {
      std::shuffle(comps.begin(), comps.end(), rng);
      size_t total = 0;
      for (const auto& c : comps) total += c.size();
      const double target = options.test_fraction * static_cast<double>(total);
      size_t test_frames = 0;
      bool train_used = false;
      for (size_t k = 0; k < comps.size(); ++k) {
        const bool last = k + 1 == comps.size();
        bool to_test;
        if (test_frames == 0) {
          to_test = true;
        } else if (static_cast<double>(test_frames + comps[k].size()) <= target + 1e-9) {
          to_test = !(last && !train_used);
        } else {
          to_test = false;
        }
        if (to_test) {
          test_frames += comps[k].size();
          for (size_t i : comps[k]) in_test[i] = true;
        } else {
          train_used = true;
        }
      }
    }
  }

  std::vector<size_t> train_idx, test_idx;
  for (size_t i = 0; i < n; ++i) (in_test[i] ? test_idx : train_idx).push_back(i);
  if (train_idx.empty() || test_idx.empty()) {
    throw Error(ErrorCode::kSplitInfeasible,
                std::string(split_mode_name(options.mode)) + ": one side of the split is empty");
  }
  if (options.balance) {
    train_idx = balance_side(manifest, train_idx, rng, "training");
    test_idx = balance_side(manifest, test_idx, rng, "testing");
  }

  std::pair<DatasetManifest, DatasetManifest> out;
  out.first.base_dir = manifest.base_dir;
  out.second.base_dir = manifest.base_dir;
  for (size_t i : train_idx) out.first.records.push_back(manifest.records[i]);
  for (size_t i : test_idx) out.second.records.push_back(manifest.records[i]);
  return out;
}

Histogram histogram(std::span<const double> values, int bins) {
  if (values.empty()) throw Error(ErrorCode::kUndefinedMetric, "histogram of no values");
  if (bins < 1) throw Error(ErrorCode::kInvalidInput, "histogram needs at least one bin");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "non-finite histogram value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (int k = 0; k <= bins; ++k) h.edges[k] = lo + (hi - lo) * k / bins;
  h.edges[bins] = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    int k = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    k = std::clamp(k, 0, bins - 1);
    // Floating rounding can land a value one bin off its edges.
    while (k > 0 && v < h.edges[k]) --k;
    while (k < bins - 1 && v >= h.edges[k + 1]) ++k;
    ++h.counts[k];
  }
  return h;
}

LeakageResult identity_leakage_experiment(const DatasetManifest& manifest,
                                          const FaceModel3D& model,
                                          const SolverConfig& solver, double c,
                                          std::uint64_t seed) {
  PoseRunOptions pose_opts;
  pose_opts.solver = solver;
  pose_opts.seed = seed;
  const PoseRunResult poses = estimate_manifest_poses(manifest, model, pose_opts);
  const std::vector<FeatureRecord> rows = build_features(manifest, poses.records);

  std::set<std::string> usable;
  for (const auto& r : rows) usable.insert(r.frame_id);
  DatasetManifest covered;
  covered.base_dir = manifest.base_dir;
  for (const auto& r : manifest.records) {
    if (usable.count(r.frame_id)) covered.records.push_back(r);
  }

  LeakageResult result;
  result.frames_total = manifest.records.size();
  result.frames_used = covered.records.size();

  const auto run = [&](SplitMode mode) {
    SplitOptions split;
    split.mode = mode;
    split.seed = seed;
    split.balance = true;
    const auto [train_m, test_m] = split_dataset(covered, split);
    TrainOptions train_opts;
    train_opts.c = c;
    train_opts.seed = seed;
    const TrainResult trained = train(to_training_set(filter_features(rows, &train_m)), train_opts);
    const std::vector<ScoredFrame> scored = score_features(trained.model, filter_features(rows, &test_m));
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& s : scored) {
      scores.push_back(s.probability);
      labels.push_back(s.label);
    }
    return roc_auc(scores, labels).auc;
  };
  result.auc_overlapping = run(SplitMode::kOverlappingSubjects);
  result.auc_disjoint = run(SplitMode::kDisjointSubjects);
  return result;
}

}  // namespace headpose
