// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_SALIENCY_RECORD_HPP
#define AFFORD_SALIENCY_RECORD_HPP

#include "afford/cloud/cloud_io.hpp"
#include "afford/cloud/point_cloud.hpp"
#include "afford/cloud/spatial_index.hpp"
#include "afford/core/error.hpp"
#include "afford/core/log.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace afford {

inline constexpr std::string_view kSaliencySchema = "afford-saliency";
inline constexpr int kSaliencyVersion = 1;

/// Salient scene points for one pointcloud. Points are expressed in the
/// descriptor frame; `origin` is where that frame's origin sits in the
/// source cloud, so `origin + points[i]` is a source-cloud location.
struct SaliencyRecord {
  std::string scene_id;
  std::vector<int> affordance_ids;
  std::vector<Vec3> points;
  std::vector<double> weights;  // activation weight per point, >= 0
  Vec3 origin = Vec3::Zero();

  friend bool operator==(const SaliencyRecord& a, const SaliencyRecord& b) {
    return a.scene_id == b.scene_id && a.affordance_ids == b.affordance_ids && a.points == b.points &&
           a.weights == b.weights && a.origin == b.origin;
  }
};

/// Schema violation inside a saliency file, tagged with the record index.
class SaliencySchemaError : public Error {
public:
  SaliencySchemaError(std::size_t record, const std::string& what)
      : Error(ErrorKind::parse, "saliency record " + std::to_string(record) + ": " + what), record_(record) {}

  std::size_t record_index() const noexcept { return record_; }

private:
  std::size_t record_;
};

namespace saliency_detail {

using json = nlohmann::json;

inline Vec3 vec3(const json& j, std::size_t rec, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw SaliencySchemaError(rec, what + " must be an array of 3 numbers");
  Vec3 v;
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number()) throw SaliencySchemaError(rec, what + " must be an array of 3 numbers");
    v[a] = j[a].get<double>();
  }
  if (!v.allFinite()) throw SaliencySchemaError(rec, what + " is not finite");
  return v;
}

inline json vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline SaliencyRecord parse_record(const json& j, std::size_t rec) {
  if (!j.is_object()) throw SaliencySchemaError(rec, "not an object");
  for (const char* key : {"scene_id", "affordance_ids", "points", "weights"})
    if (!j.contains(key)) throw SaliencySchemaError(rec, std::string("missing field '") + key + "'");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "scene_id" && k != "affordance_ids" && k != "points" && k != "weights" && k != "origin")
      throw SaliencySchemaError(rec, "unknown field '" + k + "'");
  }
  SaliencyRecord r;
  if (!j["scene_id"].is_string()) throw SaliencySchemaError(rec, "scene_id must be a string");
  r.scene_id = j["scene_id"].get<std::string>();

  const auto& ids = j["affordance_ids"];
  if (!ids.is_array() || ids.empty()) throw SaliencySchemaError(rec, "affordance_ids must be a non-empty array");
  for (const auto& v : ids) {
    if (!v.is_number_integer()) throw SaliencySchemaError(rec, "affordance_ids must hold integers");
    r.affordance_ids.push_back(v.get<int>());
  }
  if (std::set<int>(r.affordance_ids.begin(), r.affordance_ids.end()).size() != r.affordance_ids.size())
    throw SaliencySchemaError(rec, "duplicate affordance id");

  const auto& pts = j["points"];
  if (!pts.is_array()) throw SaliencySchemaError(rec, "points must be an array");
  for (std::size_t i = 0; i < pts.size(); ++i) r.points.push_back(vec3(pts[i], rec, "points[" + std::to_string(i) + "]"));

  const auto& w = j["weights"];
  if (!w.is_array()) throw SaliencySchemaError(rec, "weights must be an array");
  if (w.size() != r.points.size())
    throw SaliencySchemaError(rec, "weights has " + std::to_string(w.size()) + " entries for " +
                                       std::to_string(r.points.size()) + " points");
  for (const auto& v : w) {
    if (!v.is_number()) throw SaliencySchemaError(rec, "weights must be numbers");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < 0.0) throw SaliencySchemaError(rec, "weights must be finite and non-negative");
    r.weights.push_back(x);
  }
  if (j.contains("origin")) r.origin = vec3(j["origin"], rec, "origin");
  return r;
}

}  // namespace saliency_detail

/// Parses and validates an interchange document. With `known_ids`, records
/// listing an id outside the set are dropped with a warning.
inline std::vector<SaliencyRecord> parse_saliency(const std::string& text,
                                                  const std::optional<std::set<int>>& known_ids = std::nullopt) {
  using saliency_detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("saliency file: ") + e.what(), 0, e.byte > 0 ? e.byte - 1 : 0);
  }
  if (!doc.is_object() || !doc.contains("schema") || doc["schema"] != kSaliencySchema)
    throw ParseError("saliency file: schema must be \"" + std::string(kSaliencySchema) + "\"", 0, 0);
  if (!doc.contains("version") || !doc["version"].is_number_integer())
    throw ParseError("saliency file: missing integer version", 0, 0);
  if (doc["version"].get<int>() != kSaliencyVersion)
    fail(ErrorKind::version, "saliency file: unsupported version " + doc["version"].dump() + " (expected " +
                                 std::to_string(kSaliencyVersion) + ")");
  if (!doc.contains("records") || !doc["records"].is_array())
    throw ParseError("saliency file: records must be an array", 0, 0);

  std::vector<SaliencyRecord> out;
  const auto& recs = doc["records"];
  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto r = saliency_detail::parse_record(recs[i], i);
    if (known_ids) {
      const auto bad = std::find_if(r.affordance_ids.begin(), r.affordance_ids.end(),
                                    [&](int id) { return !known_ids->count(id); });
      if (bad != r.affordance_ids.end()) {
        log::warn("saliency record " + std::to_string(i) + " ('" + r.scene_id + "'): unknown affordance id " +
                  std::to_string(*bad) + "; record rejected");
        continue;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<SaliencyRecord> load_saliency(const std::filesystem::path& path,
                                                 const std::optional<std::set<int>>& known_ids = std::nullopt) {
  return parse_saliency(io_detail::read_file(path), known_ids);
}

/// Serialises records. A non-empty `config` (JSON text) is stored under a
/// top-level "config" key, which readers ignore.
inline std::string dump_saliency(const std::vector<SaliencyRecord>& records, const std::string& config = {}) {
  using saliency_detail::json;
  json recs = json::array();
  for (const auto& r : records) {
    json j;
    j["scene_id"] = r.scene_id;
    j["affordance_ids"] = r.affordance_ids;
    json pts = json::array();
    for (const auto& p : r.points) pts.push_back(saliency_detail::vec3(p));
    j["points"] = std::move(pts);
    j["weights"] = r.weights;
    if (r.origin != Vec3::Zero()) j["origin"] = saliency_detail::vec3(r.origin);
    recs.push_back(std::move(j));
  }
  json doc;
  doc["schema"] = kSaliencySchema;
  doc["version"] = kSaliencyVersion;
  doc["records"] = std::move(recs);
  if (!config.empty()) doc["config"] = json::parse(config);
  return doc.dump(1) + "\n";
}

/// Validates every record before writing; a record that would not load back
/// is a data error.
inline void save_saliency(const std::vector<SaliencyRecord>& records, const std::filesystem::path& path,
                          const std::string& config = {}) {
  const std::string text = dump_saliency(records, config);
  try {
    parse_saliency(text);
  } catch (const Error& e) {
    fail(ErrorKind::data, std::string("save_saliency: ") + e.what());
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open for writing: " + path.string());
  f << text;
  if (!f) fail(ErrorKind::io, "write failed: " + path.string());
}

/// Indices of record points farther than `tolerance` from every point of
/// the source cloud. Empty means the record is consistent with the cloud.
inline std::vector<std::size_t> non_member_points(const SaliencyRecord& r, const PointCloud& source,
                                                  double tolerance = 1e-3) {
  std::vector<std::size_t> bad;
  if (source.empty()) {
    bad.resize(r.points.size());
    std::iota(bad.begin(), bad.end(), std::size_t{0});
    return bad;
  }
  const SpatialIndex idx(source.points);
  for (std::size_t i = 0; i < r.points.size(); ++i)
    if (idx.nearest(r.origin + r.points[i]).distance > tolerance) bad.push_back(i);
  return bad;
}

}  // namespace afford

#endif  // AFFORD_SALIENCY_RECORD_HPP
