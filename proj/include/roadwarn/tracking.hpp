#pragma once

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roadwarn/geometry.hpp"
#include "roadwarn/sensors.hpp"

namespace roadwarn::tracking {

enum class TrackStatus { kTentative, kConfirmed, kDead };

const char* track_status_name(TrackStatus s);

struct Track {
  int id{0};
  Vec2 position;
  Vec2 velocity;
  double last_update{0.0};
  int hits{0};
  int misses{0};
  TrackStatus status{TrackStatus::kTentative};
  std::deque<std::pair<double, double>> lateral_history;  // (t, lateral offset m)
  double range_m{0.0};        // distance to observer at last update
  double radial_speed{0.0};   // measured closing rate at last update, m/s
  std::string klass;          // from detector fusion; empty when unknown
  std::string source_id;      // measurement target id, for evaluation only
  int lane_index{-1};         // lane locked at spawn; lateral is measured against it
  bool weaving_latched{false};
  double weaving_range{0.0};
};

struct TrackerParams {
  double alpha{0.5};
  double beta{0.1};
  int confirm_hits{3};
  int max_misses{5};
  double base_gate_m{5.0};
  double lateral_noise_gate_m{0.25};  // skip lateral samples noisier than this
  std::size_t history_capacity{256};
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (track index, measurement index)
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_measurements;
};

/// Greedy nearest-neighbor association on Euclidean distance between
/// predicted track positions and measured positions. Pairs beyond the gate
/// stay unmatched; every track and measurement is used at most once.
Assignment associate(std::span<const Vec2> predicted, std::span<const Vec2> measured,
                     double gate_m);
/// Same with a per-measurement gate.
Assignment associate(std::span<const Vec2> predicted, std::span<const Vec2> measured,
                     std::span<const double> gates_m);

/// Alpha-beta filter update; appends (t, lateral) to the history ring when a
/// lateral sample is given. Throws std::invalid_argument when dt <= 0.
Track update_track(Track track, const Vec2& measurement, double dt,
                   std::optional<double> lateral, const TrackerParams& params = {});

struct WeavingParams {
  int min_reversals{3};
  double min_amplitude_m{0.5};
  int smooth_samples{5};
};

struct WeavingVerdict {
  bool weaving{false};
  int reversals{0};
  double amplitude{0.0};
  double detected_range{0.0};
};

/// Weaving when, within the trailing window, the smoothed derivative of the
/// lateral offset reverses sign at least min_reversals times and the
/// peak-to-peak amplitude reaches min_amplitude. The history must span the
/// window; otherwise the verdict is false with reversals = 0.
WeavingVerdict detect_weaving(const Track& track, double window_s,
                              const WeavingParams& params = {});

struct TtcParams {
  double min_closing_mps{0.1};
  double miss_threshold_m{2.5};
};

/// range / closing speed, defined only when closing and the projected miss
/// distance at closest approach stays under the threshold.
std::optional<double> time_to_collision(const Track& ego, const Track& other,
                                        const TtcParams& params = {});

/// Per-run track owner: associates measurements, spawns/confirms/kills
/// tracks, and maintains lateral histories against the scenario lanes.
class TrackStore {
 public:
  TrackStore(TrackerParams params, std::vector<Polyline> lanes)
      : params_(params), lanes_(std::move(lanes)) {}

  /// One update with measurements converted to world positions.
  void step(double t, const std::vector<sensors::RangeMeasurement>& measurements,
            const Pose& observer, const sensors::SensorModel& model, bool fine_active);

  /// Assigns classes to tracks from detections by bearing proximity.
  void classify(const std::vector<sensors::Detection>& detections, const Pose& observer,
                const sensors::CameraIntrinsics& camera);

  /// Latches weaving verdicts on confirmed tracks; returns tracks that newly
  /// turned weaving this step.
  std::vector<int> update_weaving(double window_s, const WeavingParams& params = {});

  const std::vector<Track>& tracks() const { return tracks_; }
  const Track* find(int id) const;

 private:
  std::optional<double> lateral_sample(const Track& track, const Vec2& position,
                                       const Pose& observer, const sensors::SensorModel& model,
                                       bool fine_active) const;

  TrackerParams params_;
  std::vector<Polyline> lanes_;
  std::vector<Track> tracks_;
  int next_id_{1};
};

}  // namespace roadwarn::tracking
