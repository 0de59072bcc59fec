#include "headpose/dataset.hpp"

#include <cmath>
#include <set>

#include "json.hpp"
#include "text_util.hpp"

namespace headpose {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kFeatureHeader[] = {
    "frame_id", "dr00", "dr01", "dr02", "dr10", "dr11", "dr12", "dr20", "dr21", "dr22",
    "dtx", "dty", "dtz", "cosine_distance", "inner_flipped", "all_flipped", "label",
    "subject_ids"};
constexpr size_t kFeatureColumns = std::size(kFeatureHeader);

json pose_to_json(const Pose& pose) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation(r, c));
  }
  json out;
  out["rotation"] = rot;
  out["translation"] = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
  return out;
}

Pose pose_from_json(const nlohmann::json& doc) {
  const auto& rot = doc.at("rotation");
  const auto& tr = doc.at("translation");
  if (rot.size() != 9 || tr.size() != 3) {
    throw Error(ErrorCode::kParse, "pose needs 9 rotation and 3 translation entries");
  }
  Pose p;
  for (int k = 0; k < 9; ++k) p.rotation(k / 3, k % 3) = rot[k].get<double>();
  for (int k = 0; k < 3; ++k) p.translation(k) = tr[k].get<double>();
  return p;
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const ManifestRecord& r : records) {
    if (r.frame_id.empty()) throw Error(ErrorCode::kInvalidInput, "manifest record without frame_id");
    if (!ids.insert(r.frame_id).second) {
      throw Error(ErrorCode::kInvalidInput, "duplicate frame_id '" + r.frame_id + "'");
    }
    if (r.image_width <= 0 || r.image_height <= 0) {
      throw Error(ErrorCode::kInvalidInput, "frame '" + r.frame_id + "' has invalid image size");
    }
    if (r.label == Label::kFake && r.subject_ids.empty()) {
      throw Error(ErrorCode::kInvalidInput, "fake frame '" + r.frame_id + "' lists no subject");
    }
  }
}

std::filesystem::path DatasetManifest::landmark_path(const ManifestRecord& record) const {
  const std::filesystem::path p(record.landmark_file);
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const std::vector<std::string> lines = detail::read_lines(path);
  DatasetManifest m;
  m.base_dir = path.parent_path();
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    try {
      const nlohmann::json doc = nlohmann::json::parse(lines[ln]);
      ManifestRecord r;
      r.frame_id = doc.at("frame_id").get<std::string>();
      r.label = parse_label(doc.at("label").get<std::string>());
      r.subject_ids = doc.at("subject_ids").get<std::vector<std::string>>();
      r.landmark_file = doc.at("landmarks").get<std::string>();
      r.image_width = doc.at("image_width").get<int>();
      r.image_height = doc.at("image_height").get<int>();
      if (doc.contains("truth") && !doc["truth"].is_null()) r.truth = pose_from_json(doc["truth"]);
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      detail::parse_error(path, ln + 1, e.what());
    } catch (const Error& e) {
      detail::parse_error(path, ln + 1, e.what());
    }
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  std::string text;
  for (const ManifestRecord& r : manifest.records) {
    json doc;
    doc["frame_id"] = r.frame_id;
    doc["label"] = label_name(r.label);
    doc["subject_ids"] = r.subject_ids;
    doc["landmarks"] = r.landmark_file;
    doc["image_width"] = r.image_width;
    doc["image_height"] = r.image_height;
    if (r.truth) doc["truth"] = pose_to_json(*r.truth);
    text += doc.dump() + "\n";
  }
  detail::write_text(path, text);
}

std::string pose_record_to_json(const PoseRecord& record) {
  json doc;
  doc["frame_id"] = record.frame_id;
  doc["set"] = subset_name(record.set);
  const json p = pose_to_json(record.pose);
  doc["rotation"] = p["rotation"];
  doc["translation"] = p["translation"];
  doc["cost"] = record.pose.cost;
  doc["flipped"] = record.pose.flipped;
  doc["converged"] = record.pose.converged;
  doc["iterations"] = record.pose.iterations;
  doc["corrected"] = record.pose.corrected;
  doc["could_not_correct"] = record.pose.could_not_correct;
  doc["ill_conditioned"] = record.pose.ill_conditioned;
  return doc.dump();
}

PoseRecord pose_record_from_json(const std::string& line) {
  const nlohmann::json doc = nlohmann::json::parse(line);
  PoseRecord r;
  r.frame_id = doc.at("frame_id").get<std::string>();
  r.set = parse_subset(doc.at("set").get<std::string>());
  static_cast<Pose&>(r.pose) = pose_from_json(doc);
  r.pose.cost = doc.at("cost").get<double>();
  r.pose.flipped = doc.at("flipped").get<bool>();
  r.pose.converged = doc.at("converged").get<bool>();
  r.pose.iterations = doc.at("iterations").get<int>();
  r.pose.corrected = doc.value("corrected", false);
  r.pose.could_not_correct = doc.value("could_not_correct", false);
  r.pose.ill_conditioned = doc.value("ill_conditioned", false);
  return r;
}

std::vector<PoseRecord> load_pose_records(const std::filesystem::path& path) {
  const std::vector<std::string> lines = detail::read_lines(path);
  std::vector<PoseRecord> out;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    try {
      out.push_back(pose_record_from_json(lines[ln]));
    } catch (const nlohmann::json::exception& e) {
      detail::parse_error(path, ln + 1, e.what());
    } catch (const Error& e) {
      detail::parse_error(path, ln + 1, e.what());
    }
  }
  return out;
}

void save_pose_records(const std::vector<PoseRecord>& records, const std::filesystem::path& path) {
  std::string text;
  for (const PoseRecord& r : records) text += pose_record_to_json(r) + "\n";
  detail::write_text(path, text);
}

std::vector<FeatureRecord> load_feature_records(const std::filesystem::path& path) {
  const std::vector<std::string> lines = detail::read_lines(path);
  std::vector<FeatureRecord> out;
  bool header = false;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (!header) {
      if (fields.size() != kFeatureColumns || fields[0] != "frame_id") {
        detail::parse_error(path, ln + 1, "unexpected feature table header");
      }
      header = true;
      continue;
    }
    if (fields.size() != kFeatureColumns) {
      detail::parse_error(path, ln + 1, "expected " + std::to_string(kFeatureColumns) + " fields");
    }
    FeatureRecord r;
    r.frame_id = std::string(fields[0]);
    for (int k = 0; k < kFeatureCount; ++k) {
      if (!detail::try_parse_double(fields[1 + k], r.features.values[k]) ||
          !std::isfinite(r.features.values[k])) {
        detail::parse_error(path, ln + 1, "non-numeric feature value");
      }
    }
    if (!detail::try_parse_double(fields[13], r.cosine_distance)) {
      detail::parse_error(path, ln + 1, "non-numeric cosine distance");
    }
    const auto flag = [&](std::string_view f) {
      if (f == "1") return true;
      if (f == "0") return false;
      detail::parse_error(path, ln + 1, "flip flags must be 0 or 1");
    };
    r.inner_flipped = flag(fields[14]);
    r.all_flipped = flag(fields[15]);
    if (!fields[16].empty()) {
      try {
        r.features.label = parse_label(std::string(fields[16]));
      } catch (const Error& e) {
        detail::parse_error(path, ln + 1, e.what());
      }
    }
    if (!fields[17].empty()) {
      for (auto s : detail::split(fields[17], ';')) r.features.subject_ids.emplace_back(s);
    }
    out.push_back(std::move(r));
  }
  if (!header) detail::parse_error(path, 1, "missing feature table header");
  return out;
}

void save_feature_records(const std::vector<FeatureRecord>& records,
                          const std::filesystem::path& path) {
  std::string text;
  for (size_t k = 0; k < kFeatureColumns; ++k) {
    if (k) text += ',';
    text += kFeatureHeader[k];
  }
  text += '\n';
  for (const FeatureRecord& r : records) {
    text += r.frame_id;
    for (double v : r.features.values) text += "," + detail::format_double(v);
    text += "," + detail::format_double(r.cosine_distance);
    text += r.inner_flipped ? ",1" : ",0";
    text += r.all_flipped ? ",1" : ",0";
    text += ",";
    if (r.features.label) text += label_name(*r.features.label);
    text += "," + join(r.features.subject_ids, ';');
    text += '\n';
  }
  detail::write_text(path, text);
}

}  // namespace headpose
