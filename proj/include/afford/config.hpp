// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CONFIG_HPP
#define AFFORD_CONFIG_HPP

#include "afford/agglomerate/clustering.hpp"
#include "afford/cloud/cloud_io.hpp"
#include "afford/core/error.hpp"
#include "afford/detect/detector.hpp"
#include "afford/saliency/bridge.hpp"
#include "afford/tensor/descriptor.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <type_traits>

namespace afford {

inline constexpr std::string_view kConfigSchema = "afford-config";
inline constexpr int kConfigVersion = 1;

/// Every tunable of the pipeline in one place. Lengths are meters and the
/// JSON keys carry an `_m` suffix to say so.
struct PipelineConfig {
  // descriptor
  std::size_t keypoints = 512;
  int orientations = kOrientations;
  std::size_t tensor_samples = 2048;
  SamplingScheme sampling = SamplingScheme::proximity_weighted;
  std::uint64_t build_seed = 7;
  double contact_bound = 0.05;
  double bisector_tolerance = 0.002;
  double bisector_region_radius = 0.0;
  std::size_t bisector_attempts = 20;

  // agglomeration
  double cell_size = kCellSizeFine;
  ClusterMode mode = ClusterMode::closest_per_affordance;

  // detection
  Pipeline pipeline = Pipeline::agglomeration;
  double threshold_agglomeration = default_threshold(Pipeline::agglomeration);
  double threshold_saliency = default_threshold(Pipeline::saliency);
  std::size_t test_points = 0;
  double test_point_density = 2500.0;
  bool exhaustive = false;
  double search_radius = 0.0;
  std::uint64_t detect_seed = 1;
  unsigned threads = 1;

  // saliency
  KeepBudget::Kind keep = KeepBudget::Kind::mass_fraction;
  double keep_mass_fraction = 0.9;
  std::size_t keep_cells = 64;
  double fallback_top_fraction = 0.25;
  bool weighted_projection = false;

  // evaluation
  double match_radius = 0.01;
  double bt_tolerance = 1e-10;
  std::size_t bt_max_iterations = 100000;
  std::size_t icp_max_iterations = 100;
  double icp_tolerance = 1e-10;

  std::map<std::string, std::string> paths;  // inputs of the run that wrote an artifact

  /// Calls `f(section, key, member)` for every scalar field.
  template <typename Self, typename F>
  static void for_each_field(Self& c, F&& f) {
    f("descriptor", "keypoints_per_orientation", c.keypoints);
    f("descriptor", "orientations", c.orientations);
    f("descriptor", "tensor_samples", c.tensor_samples);
    f("descriptor", "sampling", c.sampling);
    f("descriptor", "seed", c.build_seed);
    f("descriptor", "contact_bound_m", c.contact_bound);
    f("descriptor", "bisector_tolerance_m", c.bisector_tolerance);
    f("descriptor", "bisector_region_radius_m", c.bisector_region_radius);
    f("descriptor", "bisector_attempts", c.bisector_attempts);
    f("agglomeration", "cell_size_m", c.cell_size);
    f("agglomeration", "mode", c.mode);
    f("detection", "pipeline", c.pipeline);
    f("detection", "threshold_agglomeration", c.threshold_agglomeration);
    f("detection", "threshold_saliency", c.threshold_saliency);
    f("detection", "test_points", c.test_points);
    f("detection", "test_point_density_per_m2", c.test_point_density);
    f("detection", "exhaustive", c.exhaustive);
    f("detection", "search_radius_m", c.search_radius);
    f("detection", "seed", c.detect_seed);
    f("detection", "threads", c.threads);
    f("saliency", "keep", c.keep);
    f("saliency", "keep_mass_fraction", c.keep_mass_fraction);
    f("saliency", "keep_cells", c.keep_cells);
    f("saliency", "fallback_top_fraction", c.fallback_top_fraction);
    f("saliency", "weighted", c.weighted_projection);
    f("evaluation", "match_radius_m", c.match_radius);
    f("evaluation", "bt_tolerance", c.bt_tolerance);
    f("evaluation", "bt_max_iterations", c.bt_max_iterations);
    f("evaluation", "icp_max_iterations", c.icp_max_iterations);
    f("evaluation", "icp_tolerance_m", c.icp_tolerance);
  }

  void validate() const {
    require(keypoints >= 1 && keypoints <= 1000000, "config: keypoints_per_orientation must lie in [1, 1e6]");
    require(orientations >= 1 && orientations <= 360, "config: orientations must lie in [1, 360]");
    require(tensor_samples >= 1, "config: tensor_samples must be positive");
    require(contact_bound > 0.0, "config: contact_bound_m must be positive");
    require(bisector_tolerance > 0.0, "config: bisector_tolerance_m must be positive");
    require(bisector_region_radius >= 0.0, "config: bisector_region_radius_m must be non-negative");
    require(bisector_attempts >= 1, "config: bisector_attempts must be positive");
    require(cell_size > 0.0 && cell_size <= 1.0, "config: cell_size_m must lie in (0, 1]");
    for (double t : {threshold_agglomeration, threshold_saliency})
      require(t >= 0.0 && t <= 1.0, "config: thresholds must lie in [0, 1]");
    require(test_point_density > 0.0, "config: test_point_density_per_m2 must be positive");
    require(search_radius >= 0.0, "config: search_radius_m must be non-negative");
    require(threads >= 1 && threads <= 1024, "config: threads must lie in [1, 1024]");
    keep_budget().validate();
    require(fallback_top_fraction > 0.0 && fallback_top_fraction <= 1.0,
            "config: fallback_top_fraction must lie in (0, 1]");
    require(match_radius > 0.0, "config: match_radius_m must be positive");
    require(bt_tolerance > 0.0 && bt_max_iterations >= 1, "config: Bradley-Terry tolerance and iterations must be positive");
    require(icp_tolerance > 0.0 && icp_max_iterations >= 1, "config: ICP tolerance and iterations must be positive");
  }

  BuildConfig build_config() const {
    BuildConfig b;
    b.keypoints = keypoints;
    b.orientations = orientations;
    b.tensor_samples = tensor_samples;
    b.scheme = sampling;
    b.seed = build_seed;
    b.contact_bound = contact_bound;
    b.bisector.tolerance = bisector_tolerance;
    b.bisector.region_radius = bisector_region_radius;
    b.bisector.attempts_per_sample = bisector_attempts;
    return b;
  }

  DetectorConfig detector_config() const {
    DetectorConfig d;
    d.pipeline = pipeline;
    d.threshold = pipeline == Pipeline::saliency ? threshold_saliency : threshold_agglomeration;
    d.test_points = test_points;
    d.test_point_density = test_point_density;
    d.exhaustive = exhaustive;
    d.search_radius = search_radius;
    d.seed = detect_seed;
    d.threads = threads;
    return d;
  }

  KeepBudget keep_budget() const {
    return keep == KeepBudget::Kind::count ? KeepBudget::cells(keep_cells) : KeepBudget::mass(keep_mass_fraction);
  }

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& doc);

  /// Pretty form for config files.
  std::string text() const { return to_json().dump(2) + "\n"; }
  /// Single-line form for embedding in artifact headers.
  std::string line() const { return to_json().dump(); }
};

namespace config_detail {

using json = nlohmann::json;

inline std::string_view to_string(KeepBudget::Kind k) {
  return k == KeepBudget::Kind::count ? "cells" : "mass_fraction";
}

inline bool decode(std::string_view s, SamplingScheme& v) {
  auto r = scheme_from_string(s);
  if (r) v = *r;
  return r.has_value();
}
inline bool decode(std::string_view s, ClusterMode& v) {
  auto r = cluster_mode_from_string(s);
  if (r) v = *r;
  return r.has_value();
}
inline bool decode(std::string_view s, Pipeline& v) {
  auto r = pipeline_from_string(s);
  if (r) v = *r;
  return r.has_value();
}
inline bool decode(std::string_view s, KeepBudget::Kind& v) {
  if (s == "cells") v = KeepBudget::Kind::count;
  else if (s == "mass_fraction") v = KeepBudget::Kind::mass_fraction;
  else return false;
  return true;
}

template <typename T>
json encode(const T& v) {
  if constexpr (std::is_enum_v<T>) {
    using afford::to_string;
    using config_detail::to_string;
    return std::string(to_string(v));
  } else {
    return v;
  }
}

[[noreturn]] inline void bad(const std::string& where, const std::string& what) {
  fail(ErrorKind::parse, "config: " + where + " " + what);
}

template <typename T>
void assign(const json& j, const std::string& where, T& out) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) bad(where, "must be true or false");
    out = j.get<bool>();
  } else if constexpr (std::is_enum_v<T>) {
    if (!j.is_string() || !decode(j.get<std::string>(), out)) bad(where, "has an unknown value " + j.dump());
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) bad(where, "must be a number");
    out = j.get<T>();
    if (!std::isfinite(out)) bad(where, "must be finite");
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!j.is_number_unsigned()) bad(where, "must be a non-negative integer");
    const auto v = j.get<std::uint64_t>();
    if (v > std::numeric_limits<T>::max()) bad(where, "is out of range");
    out = static_cast<T>(v);
  } else {
    if (!j.is_number_integer()) bad(where, "must be an integer");
    const auto v = j.get<std::int64_t>();
    if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) bad(where, "is out of range");
    out = static_cast<T>(v);
  }
}

}  // namespace config_detail

inline nlohmann::json PipelineConfig::to_json() const {
  using config_detail::json;
  json doc;
  doc["schema"] = kConfigSchema;
  doc["version"] = kConfigVersion;
  for_each_field(*this, [&](const char* sec, const char* key, const auto& v) { doc[sec][key] = config_detail::encode(v); });
  doc["paths"] = json::object();
  for (const auto& [k, v] : paths) doc["paths"][k] = v;
  return doc;
}

/// Strict reader: unknown sections or keys are rejected, missing keys keep
/// their defaults. The result is validated.
inline PipelineConfig PipelineConfig::from_json(const nlohmann::json& doc) {
  using config_detail::json;
  if (!doc.is_object()) fail(ErrorKind::parse, "config: top level must be an object");
  if (!doc.contains("schema") || doc["schema"] != kConfigSchema)
    fail(ErrorKind::parse, "config: schema must be \"" + std::string(kConfigSchema) + "\"");
  if (!doc.contains("version") || !doc["version"].is_number_integer())
    fail(ErrorKind::parse, "config: missing integer version");
  if (doc["version"].get<int>() != kConfigVersion)
    fail(ErrorKind::version, "config: unsupported version " + doc["version"].dump());

  PipelineConfig c;
  for (const auto& [sec, body] : doc.items()) {
    if (sec == "schema" || sec == "version") continue;
    if (sec != "descriptor" && sec != "agglomeration" && sec != "detection" && sec != "saliency" &&
        sec != "evaluation" && sec != "paths")
      config_detail::bad("section '" + sec + "'", "is not recognised");
    if (!body.is_object()) config_detail::bad("section '" + sec + "'", "must be an object");
    if (sec == "paths") {
      for (const auto& [k, v] : body.items()) {
        if (!v.is_string()) config_detail::bad("paths." + k, "must be a string");
        c.paths[k] = v.get<std::string>();
      }
      continue;
    }
    for (const auto& [key, value] : body.items()) {
      bool found = false;
      for_each_field(c, [&](const char* s, const char* k, auto& member) {
        if (found || sec != s || key != k) return;
        found = true;
        config_detail::assign(value, sec + "." + key, member);
      });
      if (!found) config_detail::bad("key '" + sec + "." + key + "'", "is not recognised");
    }
  }
  c.validate();
  return c;
}

inline PipelineConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), 0, e.byte > 0 ? e.byte - 1 : 0);
  }
  return PipelineConfig::from_json(doc);
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(io_detail::read_file(path));
}

inline void save_config(const PipelineConfig& c, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open for writing: " + path.string());
  f << c.text();
  if (!f) fail(ErrorKind::io, "write failed: " + path.string());
}

}  // namespace afford

#endif  // AFFORD_CONFIG_HPP
