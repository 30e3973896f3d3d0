#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "roadwarn/autolabel.hpp"
#include "roadwarn/runner.hpp"
#include "roadwarn/sensors.hpp"
#include "roadwarn/world.hpp"

namespace {

namespace app = roadwarn::app;
namespace fs = std::filesystem;

int cmd_run(const app::RunConfig& config) {
  const app::RunTrace trace = app::run_scenario(config);
  std::printf("scenario: %s  seed: %llu\n", trace.scenario_name.c_str(),
              static_cast<unsigned long long>(trace.seed));
  for (const app::Alert& a : trace.alerts) {
    std::printf("alert t=%.2f  %s\n", a.t, a.message.c_str());
  }
  std::printf("collisions: %zu\n", trace.collisions.size());
  std::printf("verdict: %s\n",
              trace.verdict.pass ? "pass" : ("fail: " + trace.verdict.reason).c_str());
  if (!config.out_dir.empty()) std::printf("trace written to %s\n", config.out_dir.c_str());
  return trace.verdict.pass ? 0 : 1;
}

int cmd_label(const std::string& scenario_path, int frames, const std::string& out_dir) {
  const roadwarn::world::Scenario scenario = roadwarn::world::load_scenario_file(scenario_path);
  if (static_cast<std::size_t>(frames) > scenario.step_count()) {
    throw roadwarn::world::ScenarioError(
        "scenario provides " + std::to_string(scenario.step_count()) + " steps, " +
        std::to_string(frames) + " frames requested");
  }
  std::string ego_id;
  for (const auto& v : scenario.vehicles) {
    if (v.role == roadwarn::world::Role::kEgo) ego_id = v.id;
  }

  roadwarn::world::WorldState state = roadwarn::world::initial_state(scenario);
  const roadwarn::sensors::CameraIntrinsics camera;
  std::vector<std::vector<roadwarn::autolabel::LabeledBox>> labeled;
  labeled.reserve(static_cast<std::size_t>(frames));
  for (int k = 0; k < frames; ++k) {
    state = roadwarn::world::step(state, scenario);
    const auto grid = roadwarn::sensors::render_semantic_grid(state, scenario, ego_id, camera);
    auto boxes = roadwarn::autolabel::extract_boxes(grid);
    std::map<int, double> ranges, visibility;
    for (std::size_t i = 0; i < grid.instance_ids.size(); ++i) {
      const auto it = grid.stats.find(grid.instance_ids[i]);
      if (it == grid.stats.end()) continue;
      ranges[static_cast<int>(i)] = it->second.range;
      visibility[static_cast<int>(i)] =
          it->second.projected_cells > 0
              ? static_cast<double>(it->second.visible_cells) / it->second.projected_cells
              : 0.0;
    }
    labeled.push_back(roadwarn::autolabel::filter_labels(boxes, ranges, visibility));
  }
  const auto manifest = roadwarn::autolabel::write_dataset(labeled, out_dir);
  std::printf("wrote %zu frames: %zu train / %zu test -> %s\n", manifest.total,
              manifest.train.size(), manifest.test.size(), out_dir.c_str());
  return 0;
}

int cmd_calibrate(const std::string& profile_name, double target_iou) {
  const auto detectors = roadwarn::sensors::builtin_detectors();
  const auto it = detectors.find(profile_name);
  if (it == detectors.end()) {
    throw roadwarn::world::ScenarioError("unknown detector '" + profile_name + "'");
  }
  const double target = target_iou > 0.0 ? target_iou : it->second.iou_target;
  const double jitter = app::calibrate_jitter(target);
  std::printf("profile %s: target IOU %.3f -> jitter_frac %.4f\n", profile_name.c_str(), target,
              jitter);
  std::printf("(current built-in jitter_frac: %.4f)\n", it->second.jitter_frac);
  return 0;
}

int cmd_metrics(const std::string& trace_dir) {
  const app::RunTrace trace = app::read_trace(trace_dir);
  const app::Metrics metrics = app::compute_metrics(trace);
  std::printf("%s\n", app::metrics_to_json(metrics).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Deterministic collision-warning pipeline: scripted traffic, emulated sensors, "
               "object tracking, and a non-axiomatic reasoner that raises explainable alerts"};
  cli.require_subcommand(1);

  app::RunConfig config;
  std::uint64_t seed_arg = 0;
  bool seed_set = false;

  CLI::App* run = cli.add_subcommand("run", "Run a scenario end to end");
  run->add_option("--scenario", config.scenario_path, "Scenario JSON file")->required();
  run->add_option("--knowledge", config.knowledge_path, "Narsese knowledge file")->required();
  run->add_option("--profiles", config.profiles_path, "Profile overrides (JSON)");
  run->add_option("--detector", config.detector,
                  "Detector profile (centernet, efficientdet, yolov4_pretrained, "
                  "yolov4_retrained, yolov4_cropped)");
  run->add_option("--sensor", config.sensor, "Range sensor: radar, lidar or depth")
      ->default_val("radar");
  run->add_option("--crash-db", config.crash_db_path, "Crash history CSV");
  run->add_option("--seed", seed_arg, "Seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  run->add_option("--out", config.out_dir, "Trace output directory");
  run->add_option("--cycles", config.cycles_per_step, "Reasoning cycles per timestep")
      ->default_val(20);

  std::string label_scenario, label_out;
  int label_frames = 0;
  CLI::App* label = cli.add_subcommand("label", "Generate a labeled dataset from a scenario");
  label->add_option("--scenario", label_scenario, "Scenario JSON file")->required();
  label->add_option("--frames", label_frames, "Number of frames")->required();
  label->add_option("--out", label_out, "Dataset output directory")->required();

  std::string cal_profile;
  double cal_target = 0.0;
  CLI::App* calibrate = cli.add_subcommand("calibrate", "Search detector jitter for a target IOU");
  calibrate->add_option("--profile", cal_profile, "Detector profile name")->required();
  calibrate->add_option("--target-iou", cal_target, "Target mean IOU (default: profile's)");

  std::string metrics_dir;
  CLI::App* metrics = cli.add_subcommand("metrics", "Recompute the report from a trace directory");
  metrics->add_option("--trace", metrics_dir, "Trace directory")->required();

  CLI11_PARSE(cli, argc, argv);

  try {
    if (run->parsed()) {
      if (seed_set) config.seed = seed_arg;
      return cmd_run(config);
    }
    if (label->parsed()) return cmd_label(label_scenario, label_frames, label_out);
    if (calibrate->parsed()) return cmd_calibrate(cal_profile, cal_target);
    if (metrics->parsed()) return cmd_metrics(metrics_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
