// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_TENSOR_EXAMPLE_IO_HPP
#define AFFORD_TENSOR_EXAMPLE_IO_HPP

#include "afford/cloud/cloud_io.hpp"
#include "afford/tensor/bisector.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace afford {

inline constexpr std::string_view kExampleSchema = "afford-example";

/// Manifest tying an object cloud and a scene cloud into one interaction
/// example. Cloud paths are relative to the manifest's directory; the pose
/// is the top three rows of the object-to-scene matrix, row-major.
inline InteractionExample load_example(const std::filesystem::path& manifest) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io_detail::read_file(manifest));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest.string() + ": " + e.what(), 0, e.byte > 0 ? e.byte - 1 : 0);
  }
  auto bad = [&](const std::string& what) -> void { fail(ErrorKind::parse, manifest.string() + ": " + what); };
  if (!doc.is_object() || doc.value("schema", "") != kExampleSchema) bad("schema must be \"afford-example\"");
  if (!doc.contains("version") || doc["version"] != 1) fail(ErrorKind::version, manifest.string() + ": expected version 1");
  for (const char* k : {"affordance_id", "label", "object", "scene", "object_pose"})
    if (!doc.contains(k)) bad(std::string("missing field '") + k + "'");
  for (const auto& [k, v] : doc.items())
    if (k != "schema" && k != "version" && k != "affordance_id" && k != "label" && k != "object" && k != "scene" &&
        k != "object_pose")
      bad("unknown field '" + k + "'");
  if (!doc["affordance_id"].is_number_integer()) bad("affordance_id must be an integer");
  if (!doc["label"].is_string() || !doc["object"].is_string() || !doc["scene"].is_string())
    bad("label, object and scene must be strings");
  const auto& pose = doc["object_pose"];
  if (!pose.is_array() || pose.size() != 12) bad("object_pose must hold 12 numbers");
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int i = 0; i < 12; ++i) {
    if (!pose[static_cast<std::size_t>(i)].is_number()) bad("object_pose must hold 12 numbers");
    m(i / 4, i % 4) = pose[static_cast<std::size_t>(i)].get<double>();
  }
  const Mat3 r = m.topLeftCorner<3, 3>();
  if (!(r.transpose() * r).isApprox(Mat3::Identity(), 1e-6) || r.determinant() < 0.0)
    fail(ErrorKind::data, manifest.string() + ": object_pose rotation is not a proper rotation");

  InteractionExample ex;
  ex.affordance_id = doc["affordance_id"].get<int>();
  ex.label = doc["label"].get<std::string>();
  const auto dir = manifest.parent_path();
  ex.query_object = parse_cloud(dir / doc["object"].get<std::string>());
  ex.scene_patch = parse_cloud(dir / doc["scene"].get<std::string>());
  ex.object_pose = Rigid(m);
  return ex;
}

/// Writes `object.ply`, `scene.ply` (binary) and `example.json` into `dir`.
inline void save_example(const InteractionExample& ex, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_cloud(ex.query_object, dir / "object.ply", CloudFormat::ply_binary_le);
  write_cloud(ex.scene_patch, dir / "scene.ply", CloudFormat::ply_binary_le);
  nlohmann::json doc;
  doc["schema"] = kExampleSchema;
  doc["version"] = 1;
  doc["affordance_id"] = ex.affordance_id;
  doc["label"] = ex.label;
  doc["object"] = "object.ply";
  doc["scene"] = "scene.ply";
  doc["object_pose"] = nlohmann::json::array();
  for (int i = 0; i < 12; ++i) doc["object_pose"].push_back(ex.object_pose.matrix()(i / 4, i % 4));
  std::ofstream f(dir / "example.json", std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open for writing: " + (dir / "example.json").string());
  f << doc.dump(2) << '\n';
}

}  // namespace afford

#endif  // AFFORD_TENSOR_EXAMPLE_IO_HPP
