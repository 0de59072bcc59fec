#include "headpose/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "seeding.hpp"

namespace headpose {

PoseRunResult estimate_manifest_poses(const DatasetManifest& manifest,
                                      const FaceModel3D& model,
                                      const PoseRunOptions& options) {
  options.solver.validate();
  if (!(options.adversarial_init_rate >= 0.0 && options.adversarial_init_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "adversarial init rate must lie in [0, 1]");
  }
  std::vector<const ManifestRecord*> order;
  for (const auto& r : manifest.records) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const ManifestRecord* a, const ManifestRecord* b) { return a->frame_id < b->frame_id; });

  PoseRunResult result;
  result.frames_total = order.size();
  for (const ManifestRecord* rec : order) {
    try {
      const LandmarkSet2D observed =
          load_landmarks(manifest.landmark_path(*rec), rec->image_width, rec->image_height);
      const CameraIntrinsics cam = approximate_intrinsics(rec->image_width, rec->image_height);
      std::vector<PoseRecord> frame_records;
      for (LandmarkSubset set : {LandmarkSubset::kInner, LandmarkSubset::kAll}) {
        const std::vector<int>& indices = model.indices(set);
        const DltResult dlt = dlt_initialize(model, indices, observed, cam);
        HeadPose init;
        init.rotation = project_to_rotation(dlt.matrix).rotation;
        init.translation = dlt.translation;
        if (options.adversarial_init_rate > 0.0) {
          const double u = detail::unit_draw(options.seed, rec->frame_id, subset_name(set));
          if (u < options.adversarial_init_rate) init = flip_pose(init);
        }
        PoseRecord pr;
        pr.frame_id = rec->frame_id;
        pr.set = set;
        pr.pose = refine_with_correction(model, indices, observed, cam, init, options.solver);
        pr.pose.ill_conditioned = dlt.ill_conditioned;
        frame_records.push_back(std::move(pr));
      }
      for (auto& r : frame_records) result.records.push_back(std::move(r));
    } catch (const Error& e) {
      ++result.frames_skipped;
      result.warnings.push_back("skipping frame '" + rec->frame_id + "': " + e.what());
    }
  }
  return result;
}

std::vector<FeatureRecord> build_features(const DatasetManifest& manifest,
                                          const std::vector<PoseRecord>& poses) {
  std::map<std::string, std::pair<const HeadPose*, const HeadPose*>> by_frame;
  for (const PoseRecord& p : poses) {
    auto& slot = by_frame[p.frame_id];
    (p.set == LandmarkSubset::kInner ? slot.first : slot.second) = &p.pose;
  }
  std::vector<const ManifestRecord*> order;
  for (const auto& r : manifest.records) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const ManifestRecord* a, const ManifestRecord* b) { return a->frame_id < b->frame_id; });

  std::vector<FeatureRecord> out;
  for (const ManifestRecord* rec : order) {
    const auto it = by_frame.find(rec->frame_id);
    if (it == by_frame.end() || !it->second.first || !it->second.second) continue;
    PosePair pair;
    pair.frame_id = rec->frame_id;
    pair.inner = *it->second.first;
    pair.all = *it->second.second;
    FeatureRecord row;
    row.frame_id = rec->frame_id;
    row.features = pose_pair_features(pair);
    row.features.label = rec->label;
    row.features.subject_ids = rec->subject_ids;
    row.cosine_distance = cosine_distance(pair.all.rotation, pair.inner.rotation);
    row.inner_flipped = pair.inner.flipped;
    row.all_flipped = pair.all.flipped;
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<FeatureRecord> filter_features(const std::vector<FeatureRecord>& rows,
                                           const DatasetManifest* subset) {
  if (!subset) return rows;
  std::set<std::string> ids;
  for (const auto& r : subset->records) ids.insert(r.frame_id);
  std::vector<FeatureRecord> out;
  for (const auto& r : rows) {
    if (ids.count(r.frame_id)) out.push_back(r);
  }
  return out;
}

TrainingSet to_training_set(const std::vector<FeatureRecord>& rows) {
  TrainingSet set;
  for (const auto& r : rows) {
    if (!r.features.label) {
      throw Error(ErrorCode::kInvalidInput, "feature row '" + r.frame_id + "' has no label");
    }
    set.samples.emplace_back(r.features.values.begin(), r.features.values.end());
    set.labels.push_back(label_sign(*r.features.label));
  }
  return set;
}

std::vector<ScoredFrame> score_features(const SvmModel& model,
                                        const std::vector<FeatureRecord>& rows) {
  std::vector<ScoredFrame> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (!r.features.label) {
      throw Error(ErrorCode::kInvalidInput, "feature row '" + r.frame_id + "' has no label");
    }
    ScoredFrame s;
    s.frame_id = r.frame_id;
    s.decision = decision_value(model, r.features.values);
    s.probability = predict_proba(model, r.features.values);
    s.label = *r.features.label == Label::kFake ? 1 : 0;
    out.push_back(s);
  }
  return out;
}

}  // namespace headpose
