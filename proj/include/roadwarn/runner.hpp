#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roadwarn/risk.hpp"
#include "roadwarn/sensors.hpp"
#include "roadwarn/tracking.hpp"
#include "roadwarn/world.hpp"

namespace roadwarn::app {

struct RunConfig {
  std::string scenario_path;
  std::string knowledge_path;
  std::string profiles_path;  // optional overrides
  std::string crash_db_path;  // optional
  std::string detector;       // optional; empty disables the camera chain
  std::string sensor{"radar"};
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
  std::string out_dir;                // optional; empty skips writing
  int cycles_per_step{20};
  double fine_threshold_mps{2.0};
  double fine_window_deg{10.0};
  double weaving_window_s{6.0};
  bool log_all_detectors{true};
};

struct MeasurementLog {
  double t{0.0};
  std::string target;
  bool fine{false};
  double measured_range{0.0};
  double true_range{0.0};
  double bearing{0.0};
  double radial_speed{0.0};
};

struct DetectionLog {
  double t{0.0};
  std::string profile;
  std::string target;
  double confidence{0.0};
  Box box;
  Box gt_box;
  double iou{0.0};
  double true_range{0.0};
};

struct TrackLog {
  double t{0.0};
  int id{0};
  double x{0.0}, y{0.0}, vx{0.0}, vy{0.0};
  std::string status;
  double lateral{0.0};
  bool weaving{false};
};

struct WeavingLog {
  double t{0.0};
  int track_id{0};
  std::string target;
  double est_range{0.0};
  double true_range{0.0};
};

struct RunTrace {
  std::string scenario_name;
  std::uint64_t seed{0};
  std::string detector;
  std::string sensor;
  double timestep_s{0.05};
  std::vector<MeasurementLog> measurements;
  std::vector<DetectionLog> detections;
  std::vector<TrackLog> track_rows;
  std::vector<Alert> alerts;
  std::vector<world::Collision> collisions;
  std::vector<WeavingLog> weaving_events;
  std::vector<std::string> narsese_log;
  std::vector<std::string> derivation_log;
  world::Verdict verdict;
};

struct SensorBucketError {
  double bucket_m{0.0};
  double mape{0.0};
  int count{0};
};

struct FirstDetection {
  double t{0.0};
  double range{0.0};
};

struct AlertLead {
  std::string kind;
  double t{0.0};
  std::optional<double> lead_s;  // to first collision, else predicted contact
};

struct Metrics {
  std::map<std::string, FirstDetection> first_detection;       // by detector profile
  std::map<std::string, FirstDetection> first_measurement;     // by target id
  std::map<std::string, std::vector<SensorBucketError>> sensor_mape;  // by sensor name
  std::map<std::string, double> iou_mean;                      // by detector profile
  std::map<std::string, int> iou_count;
  std::vector<AlertLead> alert_leads;
  std::map<int, WeavingLog> weaving_first;  // by track id
  std::size_t collision_count{0};
  std::string verdict;
};

/// Runs the full pipeline: simulate, sense, track, encode, reason, alert.
/// Writes the trace directory when config.out_dir is set.
RunTrace run_scenario(const RunConfig& config);

Metrics compute_metrics(const RunTrace& trace);

/// Re-reads a written trace directory back into a trace (CSV logs only, as
/// needed for metrics).
RunTrace read_trace(const std::string& dir);

void write_trace(const RunTrace& trace, const std::string& out_dir);

std::string metrics_to_json(const Metrics& metrics);

/// Monte Carlo search for the jitter fraction whose mean IOU hits the
/// target; used by the `calibrate` CLI command.
double calibrate_jitter(double target_iou, std::uint64_t seed = 42, int frames = 20000);

}  // namespace roadwarn::app
