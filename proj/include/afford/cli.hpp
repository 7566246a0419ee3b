// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CLI_HPP
#define AFFORD_CLI_HPP

#include "afford/agglomerate/descriptor_io.hpp"
#include "afford/config.hpp"
#include "afford/detect/export.hpp"
#include "afford/eval/bradley_terry.hpp"
#include "afford/eval/icp.hpp"
#include "afford/eval/precision_recall.hpp"
#include "afford/saliency/bridge.hpp"
#include "afford/saliency/record.hpp"
#include "afford/synthetic.hpp"
#include "afford/tensor/descriptor_io.hpp"
#include "afford/tensor/example_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace afford::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

namespace cli_detail {

namespace fs = std::filesystem;

// Flag values that override the config file when given.
struct Overrides {
  std::optional<std::size_t> keypoints, tensor_samples, test_points, keep_cells, max_iterations;
  std::optional<int> orientations;
  std::optional<std::string> sampling, mode, pipeline, keep;
  std::optional<std::uint64_t> seed;
  std::optional<double> contact_bound, bisector_tolerance, cell_size, threshold, density, search_radius,
      keep_fraction, top_fraction, match_radius, tolerance;
  std::optional<unsigned> threads;
  bool exhaustive = false;
  bool weighted = false;
};

template <typename T, typename Enum>
void set_enum(const std::optional<std::string>& flag, Enum& dst, const char* what) {
  if (!flag) return;
  if (!config_detail::decode(*flag, dst)) fail(ErrorKind::invalid_argument, std::string("unknown ") + what + " '" + *flag + "'");
}

template <typename T, typename U>
void set(const std::optional<T>& flag, U& dst) {
  if (flag) dst = static_cast<U>(*flag);
}

inline void apply(const std::string& cmd, const Overrides& o, PipelineConfig& c) {
  set(o.keypoints, c.keypoints);
  set(o.orientations, c.orientations);
  set(o.tensor_samples, c.tensor_samples);
  set_enum<SamplingScheme>(o.sampling, c.sampling, "sampling scheme");
  set(o.contact_bound, c.contact_bound);
  set(o.bisector_tolerance, c.bisector_tolerance);
  set(o.cell_size, c.cell_size);
  set_enum<ClusterMode>(o.mode, c.mode, "cluster mode");
  set_enum<Pipeline>(o.pipeline, c.pipeline, "pipeline");
  if (o.threshold)
    (c.pipeline == Pipeline::saliency ? c.threshold_saliency : c.threshold_agglomeration) = *o.threshold;
  set(o.test_points, c.test_points);
  set(o.density, c.test_point_density);
  if (o.exhaustive) c.exhaustive = true;
  set(o.search_radius, c.search_radius);
  set(o.threads, c.threads);
  set_enum<KeepBudget::Kind>(o.keep, c.keep, "keep budget");
  set(o.keep_fraction, c.keep_mass_fraction);
  set(o.keep_cells, c.keep_cells);
  set(o.top_fraction, c.fallback_top_fraction);
  if (o.weighted) c.weighted_projection = true;
  set(o.match_radius, c.match_radius);
  if (o.seed) (cmd == "build" ? c.build_seed : c.detect_seed) = *o.seed;
  if (cmd == "eval-bt") {
    set(o.tolerance, c.bt_tolerance);
    set(o.max_iterations, c.bt_max_iterations);
  } else if (cmd == "eval-icp") {
    set(o.tolerance, c.icp_tolerance);
    set(o.max_iterations, c.icp_max_iterations);
  }
}

inline std::string comment(const PipelineConfig& c) { return "config " + c.line(); }

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open for writing: " + p.string());
  return f;
}

inline void finish(std::ofstream& f, const fs::path& p) {
  f.flush();
  if (!f) fail(ErrorKind::io, "write failed: " + p.string());
}

inline std::vector<AffordanceDescriptor> load_singles(const std::vector<std::string>& paths) {
  std::vector<AffordanceDescriptor> v;
  for (const auto& p : paths) v.push_back(load_affordance_descriptor(p));
  return v;
}

inline std::string join_paths(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& p : v) s += (s.empty() ? "" : ";") + p;
  return s;
}

// Restores the log sink on scope exit.
class SinkGuard {
public:
  SinkGuard(std::ostream& err, bool quiet)
      : previous_(log::set_sink([&err, quiet](log::Level l, const std::string& m) {
          if (quiet && l == log::Level::info) return;
          err << (l == log::Level::warning ? "warning: " : "note: ") << m << '\n';
        })) {}
  ~SinkGuard() { log::set_sink(std::move(previous_)); }
  SinkGuard(const SinkGuard&) = delete;
  SinkGuard& operator=(const SinkGuard&) = delete;

private:
  log::Sink previous_;
};

struct Args {
  std::string config_file;
  bool print_config = false;
  bool quiet = false;
  Overrides over;

  std::string example, output, text, manifest, descriptor, saliency, saliency_out, scene, scene_id, overlay, report,
      pred, truth, source = "multi", judgments, tmpl, out_dir;
  std::vector<std::string> inputs, singles, scenes, candidates;
  std::size_t max_overlay = 10;
  int first = 0, count = 1;
  double spacing = 0.01;
};

// ---- subcommands ------------------------------------------------------------

inline void cmd_synth(const Args& a, std::ostream& out) {
  require(a.count >= 1, "synth: --count must be positive");
  require(a.spacing > 0.0, "synth: --spacing-m must be positive");
  synth::ExampleParams prm;
  prm.spacing = a.spacing;
  for (int id = a.first; id < a.first + a.count; ++id) {
    const auto dir = fs::path(a.out_dir) / ("example-" + std::to_string(id));
    save_example(synth::make_example(id, prm), dir);
    out << (dir / "example.json").string() << '\n';
  }
}

inline void cmd_build(const Args& a, PipelineConfig& cfg, std::ostream& out) {
  cfg.paths["example"] = a.example;
  const auto ex = load_example(a.example);
  auto d = build_descriptor(ex, cfg.build_config());
  d.build_config = cfg.line();
  save_descriptor(d, a.output);
  if (!a.text.empty()) {
    auto f = open_out(a.text);
    write_descriptor_text(d, f);
    finish(f, a.text);
  }
  out << "descriptor " << d.label << " id " << d.affordance_id << ": " << d.keypoints.size() << " keypoints ("
      << d.per_orientation << " x " << d.orientations << " orientations) -> " << a.output << '\n';
}

inline void cmd_agglomerate(const Args& a, PipelineConfig& cfg, std::ostream& out) {
  cfg.paths["descriptors"] = join_paths(a.inputs);
  const auto singles = load_singles(a.inputs);
  auto d = agglomerate(singles, cfg.cell_size, cfg.mode);
  d.build_config = cfg.line();
  save_descriptor(d, a.output);
  if (!a.manifest.empty()) {
    auto f = open_out(a.manifest);
    write_manifest(d, f);
    finish(f, a.manifest);
  }
  const auto src = d.member_count();
  out << "agglomerated " << d.affordances.size() << " affordances: " << src << " keypoints -> " << d.cells.size()
      << " centroids (" << d.kept_count() << " kept keypoints, reduction "
      << (d.cells.empty() ? 0.0 : static_cast<double>(src) / static_cast<double>(d.cells.size())) << "x) -> "
      << a.output << '\n';
}

inline void cmd_saliency_apply(const Args& a, PipelineConfig& cfg, std::ostream& out) {
  const bool single = !a.singles.empty();
  if (!a.descriptor.empty()) cfg.paths["descriptor"] = a.descriptor;
  if (single) cfg.paths["singles"] = join_paths(a.singles);
  if (!a.saliency.empty()) cfg.paths["saliency"] = a.saliency;
  if (!a.scenes.empty()) cfg.paths["scenes"] = join_paths(a.scenes);

  std::vector<AffordanceDescriptor> singles = load_singles(a.singles);
  AgglomeratedDescriptor agg =
      !a.descriptor.empty() ? load_descriptor(a.descriptor) : agglomerate(singles, cfg.cell_size, cfg.mode);
  std::set<int> known;
  for (const auto& info : agg.affordances) known.insert(info.id);

  std::vector<SaliencyRecord> records;
  if (!a.saliency.empty()) {
    records = load_saliency(a.saliency, known);
  } else {
    for (const auto& s : a.scenes) {
      const auto scene = parse_cloud(s);
      auto fb = fallback_saliency(scene, agg, cfg.fallback_top_fraction, cfg.detector_config(), fs::path(s).stem().string());
      if (fb.status != FallbackStatus::ok) {
        log::warn("saliency-apply: no fallback saliency for '" + s + "' (" + std::string(to_string(fb.status)) + ")");
        continue;
      }
      records.push_back(std::move(fb.record));
    }
  }
  if (!a.saliency_out.empty()) save_saliency(records, a.saliency_out, cfg.line());

  AgglomeratedDescriptor result;
  if (single) {
    result = optimize_single(singles, records, cfg.cell_size, cfg.mode, cfg.keep_budget(), cfg.weighted_projection);
  } else {
    const auto tally = backproject(records, agg, cfg.weighted_projection);
    result = optimize_descriptor(agg, tally, cfg.keep_budget());
  }
  result.build_config = cfg.line();
  save_descriptor(result, a.output);
  out << "saliency-apply (" << (single ? "single" : "multi") << "): " << records.size() << " records, "
      << agg.cells.size() << " -> " << result.cells.size() << " centroids, " << agg.kept_count() << " -> "
      << result.kept_count() << " keypoints -> " << a.output << '\n';
}

inline void cmd_detect(const Args& a, PipelineConfig& cfg, std::ostream& out) {
  cfg.paths["descriptor"] = a.descriptor;
  cfg.paths["scene"] = a.scene;
  const auto d = load_descriptor(a.descriptor);
  const auto scene = parse_cloud(a.scene);
  const std::string id = a.scene_id.empty() ? fs::path(a.scene).stem().string() : a.scene_id;
  const auto res = detect_scene(scene, d, cfg.detector_config());

  auto f = open_out(a.output);
  f << "# " << comment(cfg) << '\n';
  write_detections_csv(res, id, f);
  finish(f, a.output);
  if (!a.overlay.empty())
    write_cloud(overlay_cloud(res, d, &scene, a.max_overlay), a.overlay, CloudFormat::ply_binary_le, {comment(cfg)});
  out << "detect " << id << ": " << res.test_points.size() << " test points, " << res.detections.size()
      << " detections at threshold " << res.threshold << " -> " << a.output << '\n';
}

inline void cmd_bench(const Args& a, PipelineConfig& cfg, std::ostream& out) {
  cfg.paths["descriptor"] = a.descriptor;
  cfg.paths["singles"] = join_paths(a.singles);
  cfg.paths["scene"] = a.scene;
  if (cfg.test_points == 0) cfg.test_points = 100;
  const auto agg = load_descriptor(a.descriptor);
  const auto singles = load_singles(a.singles);
  const auto scene = parse_cloud(a.scene);
  if (scene.empty()) fail(ErrorKind::data, "bench: scene '" + a.scene + "' is empty");
  const auto tps = sample_test_points(scene, cfg.test_points, cfg.detect_seed);
  const auto r = benchmark(scene, agg, singles, tps, cfg.search_radius);

  nlohmann::json j;
  j["schema"] = "afford-bench";
  j["version"] = 1;
  j["config"] = cfg.to_json();
  j["test_points"] = r.test_points;
  j["affordances"] = r.affordances;
  j["agglomerated_centroids"] = r.agglomerated_centroids;
  j["agglomerated_keypoints"] = r.agglomerated_keypoints;
  j["individual_keypoints"] = r.individual_keypoints;
  j["agglomerated_ms_per_test_point"] = r.agglomerated_ms;
  j["individual_ms_per_test_point"] = r.individual_ms;
  j["speedup"] = r.speedup();
  j["score_checksum"] = r.score_checksum;
  if (!a.report.empty()) {
    auto f = open_out(a.report);
    f << j.dump(2) << '\n';
    finish(f, a.report);
  }
  out << "bench: " << r.test_points << " test points, " << r.affordances << " affordances\n"
      << "  agglomerated " << r.agglomerated_ms << " ms/point (" << r.agglomerated_centroids << " centroids)\n"
      << "  individual   " << r.individual_ms << " ms/point (" << r.individual_keypoints << " keypoints)\n"
      << "  speedup      " << r.speedup() << "x\n";
}

inline void cmd_eval_pr(const Args& a, PipelineConfig& cfg, std::ostream& out) {
  cfg.paths["predictions"] = a.pred;
  cfg.paths["truth"] = a.truth;
  const auto pred = eval::predictions_from_rows(read_detections_csv(a.pred), a.source);
  const auto truth = eval::predictions_from_rows(read_detections_csv(a.truth), "truth");
  const auto c = eval::precision_recall(pred, truth, cfg.match_radius);
  if (c.status == eval::PRStatus::empty_truth) log::warn("eval-pr: truth table is empty; curve left empty");
  auto f = open_out(a.output);
  f << "# " << comment(cfg) << '\n';
  eval::write_pr_csv(c, f);
  finish(f, a.output);
  out << "eval-pr " << a.source << ": " << c.points.size() << " thresholds, " << c.truth << " truth entries, AUC "
      << c.auc << " -> " << a.output << '\n';
}

inline void cmd_eval_bt(const Args& a, PipelineConfig& cfg, std::ostream& out) {
  cfg.paths["judgments"] = a.judgments;
  const auto j = eval::read_judgments_csv(a.judgments);
  const auto r = eval::fit_bradley_terry(j, cfg.bt_tolerance, cfg.bt_max_iterations);
  auto f = open_out(a.output);
  f << "# " << comment(cfg) << '\n';
  eval::write_ranking_csv(r, f);
  finish(f, a.output);
  out << "eval-bt: " << r.items.size() << " items, " << j.comparisons.size() << " comparisons, "
      << r.iterations << " iterations" << (r.converged ? "" : " (not converged)")
      << (r.regularized ? ", regularized" : "") << ", log-likelihood " << r.log_likelihood << " -> " << a.output
      << '\n';
}

inline void cmd_eval_icp(const Args& a, PipelineConfig& cfg, std::ostream& out) {
  cfg.paths["template"] = a.tmpl;
  cfg.paths["candidates"] = join_paths(a.candidates);
  const auto tmpl = parse_cloud(a.tmpl);
  auto f = open_out(a.output);
  f << "# " << comment(cfg) << '\n';
  f << "candidate,residual,score,iterations,converged\n";
  for (const auto& c : a.candidates) {
    const auto r = eval::icp_score(tmpl, parse_cloud(c), cfg.icp_max_iterations, cfg.icp_tolerance);
    std::string line = csv::escape(c) + ",";
    io_detail::append_double(line, r.residual);
    line += ",";
    io_detail::append_double(line, r.score);
    line += "," + std::to_string(r.iterations) + "," + (r.converged ? "1" : "0");
    f << line << '\n';
    out << "eval-icp " << c << ": residual " << r.residual << " m, score " << r.score << '\n';
  }
  finish(f, a.output);
}

}  // namespace cli_detail

/// Entry point of the `afford` tool. Returns the process exit status:
/// 0 success, 1 usage, 2 data error, 3 internal error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  Args a;
  auto& o = a.over;
  CLI::App app{"Interaction-tensor affordance pipeline", "afford"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", a.config_file, "Pipeline config file (JSON, lengths in meters)");
  app.add_flag("--print-config", a.print_config, "Print the resolved config and exit");
  app.add_flag("-q,--quiet", a.quiet, "Suppress informational messages");

  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic interaction examples");
  synth_cmd->add_option("--out-dir", a.out_dir, "Destination directory")->required();
  synth_cmd->add_option("--first", a.first, "First example id");
  synth_cmd->add_option("--count", a.count, "Number of examples");
  synth_cmd->add_option("--spacing-m", a.spacing, "Sampling pitch in meters");

  auto* build = app.add_subcommand("build", "Build a single-affordance descriptor from an example");
  build->add_option("--example", a.example, "Example manifest (example.json)")->required();
  build->add_option("-o,--output", a.output, "Descriptor container to write")->required();
  build->add_option("--text", a.text, "Also write a text dump");
  build->add_option("--keypoints", o.keypoints, "Keypoints per orientation (N)");
  build->add_option("--orientations", o.orientations, "Orientation count");
  build->add_option("--tensor-samples", o.tensor_samples, "Bisector samples before keypoint sampling");
  build->add_option("--sampling", o.sampling, "uniform | proximity-weighted");
  build->add_option("--seed", o.seed, "Sampling seed");
  build->add_option("--contact-bound-m", o.contact_bound, "Maximum object-scene gap");
  build->add_option("--bisector-tolerance-m", o.bisector_tolerance, "Bisector equidistance tolerance");

  auto* agg = app.add_subcommand("agglomerate", "Merge single-affordance descriptors into one");
  agg->add_option("inputs", a.inputs, "Single-affordance descriptor containers")->required();
  agg->add_option("-o,--output", a.output, "Agglomerated container to write")->required();
  agg->add_option("--manifest", a.manifest, "Also write a text manifest");
  agg->add_option("--cell-size-m", o.cell_size, "Grid cell size e");
  agg->add_option("--mode", o.mode, "closest | all");

  auto* sal = app.add_subcommand("saliency-apply", "Prune a descriptor with salient points");
  sal->add_option("--descriptor", a.descriptor, "Agglomerated descriptor (multi variant)");
  sal->add_option("--singles", a.singles, "Single-affordance descriptors (single variant)");
  sal->add_option("--saliency", a.saliency, "Salient-point interchange file");
  sal->add_option("--scene", a.scenes, "Scene clouds for the geometric fallback (repeatable)");
  sal->add_option("--saliency-out", a.saliency_out, "Write the records used");
  sal->add_option("-o,--output", a.output, "Optimized descriptor to write")->required();
  sal->add_option("--cell-size-m", o.cell_size, "Grid cell size e");
  sal->add_option("--mode", o.mode, "closest | all");
  sal->add_option("--keep", o.keep, "mass_fraction | cells");
  sal->add_option("--keep-mass-fraction", o.keep_fraction, "Tally mass kept per affordance");
  sal->add_option("--keep-cells", o.keep_cells, "Cells kept per affordance");
  sal->add_option("--top-fraction", o.top_fraction, "Fallback: fraction of touched points kept");
  sal->add_flag("--weighted", o.weighted, "Weight projections by activation");
  sal->add_option("--test-points", o.test_points, "Fallback: test points per scene");
  sal->add_option("--seed", o.seed, "Fallback: test-point seed");
  sal->add_option("--threads", o.threads, "Fallback: worker threads");

  auto* det = app.add_subcommand("detect", "Detect affordances in a scene");
  det->add_option("--descriptor", a.descriptor, "Agglomerated descriptor")->required();
  det->add_option("--scene", a.scene, "Scene cloud (PLY or PCD)")->required();
  det->add_option("-o,--output", a.output, "Detection CSV")->required();
  det->add_option("--overlay", a.overlay, "Also write scene plus posed objects as PLY");
  det->add_option("--max-overlay", a.max_overlay, "Detections drawn in the overlay");
  det->add_option("--scene-id", a.scene_id, "Scene column value (default: file stem)");
  det->add_option("--pipeline", o.pipeline, "agglomeration | saliency");
  det->add_option("--threshold", o.threshold, "Score threshold for the selected pipeline");
  det->add_option("--test-points", o.test_points, "Test points (0: from density)");
  det->add_option("--density", o.density, "Test points per square meter");
  det->add_flag("--exhaustive", o.exhaustive, "Use every scene point");
  det->add_option("--search-radius-m", o.search_radius, "Neighbourhood radius (0: descriptor support)");
  det->add_option("--seed", o.seed, "Test-point seed");
  det->add_option("--threads", o.threads, "Worker threads");

  auto* bench = app.add_subcommand("bench", "Time agglomerated against sequential queries");
  bench->add_option("--descriptor", a.descriptor, "Agglomerated descriptor")->required();
  bench->add_option("--singles", a.singles, "The per-affordance descriptors")->required();
  bench->add_option("--scene", a.scene, "Scene cloud")->required();
  bench->add_option("-o,--output", a.report, "JSON report");
  bench->add_option("--test-points", o.test_points, "Test points (default 100)");
  bench->add_option("--seed", o.seed, "Test-point seed");
  bench->add_option("--search-radius-m", o.search_radius, "Neighbourhood radius");

  auto* pr = app.add_subcommand("eval-pr", "Precision-recall sweep against a truth table");
  pr->add_option("--pred", a.pred, "Detection CSV to score")->required();
  pr->add_option("--truth", a.truth, "Truth table in detection CSV layout")->required();
  pr->add_option("-o,--output", a.output, "Curve CSV")->required();
  pr->add_option("--source", a.source, "Name of the predicting method");
  pr->add_option("--match-radius-m", o.match_radius, "Match distance");

  auto* bt = app.add_subcommand("eval-bt", "Bradley-Terry ranking from pairwise judgments");
  bt->add_option("--judgments", a.judgments, "option_a,option_b,winner CSV")->required();
  bt->add_option("-o,--output", a.output, "Ranking CSV")->required();
  bt->add_option("--tolerance", o.tolerance, "Relative change that stops the iteration");
  bt->add_option("--max-iterations", o.max_iterations, "Iteration cap");

  auto* icp = app.add_subcommand("eval-icp", "ICP residual of candidates against a template");
  icp->add_option("--template", a.tmpl, "Template cloud")->required();
  icp->add_option("--candidate", a.candidates, "Candidate clouds (repeatable)")->required();
  icp->add_option("-o,--output", a.output, "Result CSV")->required();
  icp->add_option("--tolerance", o.tolerance, "Residual change that stops a descent, meters");
  icp->add_option("--max-iterations", o.max_iterations, "Iterations per descent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  SinkGuard guard(err, a.quiet);
  const std::string cmd = app.get_subcommands().front()->get_name();

  PipelineConfig cfg;
  try {
    if (!a.config_file.empty()) cfg = load_config(a.config_file);
    apply(cmd, o, cfg);
    cfg.validate();
    if (cmd == "saliency-apply") {
      require(!a.singles.empty() || !a.descriptor.empty(), "give --descriptor or --singles");
      require(a.saliency.empty() != a.scenes.empty(), "give exactly one of --saliency or --scene");
    }
  } catch (const Error& e) {
    err << "afford " << cmd << ": " << e.what() << '\n';
    return e.kind() == ErrorKind::invalid_argument ? kUsage : kData;
  }
  if (a.print_config) {
    out << cfg.text();
    return kOk;
  }

  try {
    if (cmd == "synth") cmd_synth(a, out);
    else if (cmd == "build") cmd_build(a, cfg, out);
    else if (cmd == "agglomerate") cmd_agglomerate(a, cfg, out);
    else if (cmd == "saliency-apply") cmd_saliency_apply(a, cfg, out);
    else if (cmd == "detect") cmd_detect(a, cfg, out);
    else if (cmd == "bench") cmd_bench(a, cfg, out);
    else if (cmd == "eval-pr") cmd_eval_pr(a, cfg, out);
    else if (cmd == "eval-bt") cmd_eval_bt(a, cfg, out);
    else if (cmd == "eval-icp") cmd_eval_icp(a, cfg, out);
  } catch (const Error& e) {
    err << "afford " << cmd << ": " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "afford " << cmd << ": internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv = {"afford"};
  for (const auto& s : args) argv.push_back(s.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace afford::cli

#endif  // AFFORD_CLI_HPP
