#include "roadwarn/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace roadwarn::tracking {

const char* track_status_name(TrackStatus s) {
  switch (s) {
    case TrackStatus::kTentative: return "tentative";
    case TrackStatus::kConfirmed: return "confirmed";
    case TrackStatus::kDead: return "dead";
  }
  return "tentative";
}

Assignment associate(std::span<const Vec2> predicted, std::span<const Vec2> measured,
                     std::span<const double> gates_m) {
  struct Pair {
    double distance;
    std::size_t track;
    std::size_t measurement;
  };
  std::vector<Pair> candidates;
  for (std::size_t ti = 0; ti < predicted.size(); ++ti) {
    for (std::size_t mi = 0; mi < measured.size(); ++mi) {
      const double d = (predicted[ti] - measured[mi]).norm();
      if (d <= gates_m[mi]) candidates.push_back({d, ti, mi});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Pair& a, const Pair& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.track != b.track) return a.track < b.track;
    return a.measurement < b.measurement;
  });

  Assignment out;
  std::vector<bool> track_used(predicted.size(), false);
  std::vector<bool> meas_used(measured.size(), false);
  for (const Pair& p : candidates) {
    if (track_used[p.track] || meas_used[p.measurement]) continue;
    track_used[p.track] = true;
    meas_used[p.measurement] = true;
    out.pairs.emplace_back(p.track, p.measurement);
  }
  for (std::size_t ti = 0; ti < predicted.size(); ++ti) {
    if (!track_used[ti]) out.unmatched_tracks.push_back(ti);
  }
  for (std::size_t mi = 0; mi < measured.size(); ++mi) {
    if (!meas_used[mi]) out.unmatched_measurements.push_back(mi);
  }
  return out;
}

Assignment associate(std::span<const Vec2> predicted, std::span<const Vec2> measured,
                     double gate_m) {
  const std::vector<double> gates(measured.size(), gate_m);
  return associate(predicted, measured, gates);
}

Track update_track(Track track, const Vec2& measurement, double dt,
                   std::optional<double> lateral, const TrackerParams& params) {
  if (dt <= 0.0) throw std::invalid_argument("update_track: dt must be > 0");
  const Vec2 predicted = track.position + track.velocity * dt;
  const Vec2 residual = measurement - predicted;
  track.position = predicted + residual * params.alpha;
  track.velocity = track.velocity + residual * (params.beta / dt);
  track.last_update += dt;
  ++track.hits;
  track.misses = 0;
  if (track.status == TrackStatus::kTentative && track.hits >= params.confirm_hits) {
    track.status = TrackStatus::kConfirmed;
  }
  if (lateral) {
    track.lateral_history.emplace_back(track.last_update, *lateral);
    while (track.lateral_history.size() > params.history_capacity) {
      track.lateral_history.pop_front();
    }
  }
  return track;
}

WeavingVerdict detect_weaving(const Track& track, double window_s, const WeavingParams& params) {
  WeavingVerdict verdict;
  const auto& hist = track.lateral_history;
  if (hist.size() < 2) return verdict;
  const double t_end = hist.back().first;
  const double span = t_end - hist.front().first;
  if (span + 1e-9 < window_s) return verdict;  // insufficient history

  // samples in the trailing window
  std::vector<double> lateral;
  for (const auto& [t, l] : hist) {
    if (t >= t_end - window_s - 1e-9) lateral.push_back(l);
  }
  if (lateral.size() < 3) return verdict;

  double lo = lateral[0], hi = lateral[0];
  for (const double l : lateral) {
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  verdict.amplitude = hi - lo;

  // sign reversals of the smoothed first difference
  std::vector<double> diff(lateral.size() - 1);
  for (std::size_t i = 0; i + 1 < lateral.size(); ++i) diff[i] = lateral[i + 1] - lateral[i];
  const int w = std::max(1, params.smooth_samples);
  int last_sign = 0;
  for (std::size_t i = 0; i + static_cast<std::size_t>(w) <= diff.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < w; ++k) s += diff[i + static_cast<std::size_t>(k)];
    if (std::abs(s) < 1e-12) continue;
    const int sign = s > 0.0 ? 1 : -1;
    if (last_sign != 0 && sign != last_sign) ++verdict.reversals;
    last_sign = sign;
  }

  verdict.weaving =
      verdict.reversals >= params.min_reversals && verdict.amplitude >= params.min_amplitude_m;
  if (verdict.weaving) verdict.detected_range = track.range_m;
  return verdict;
}

std::optional<double> time_to_collision(const Track& ego, const Track& other,
                                        const TtcParams& params) {
  const Vec2 rel_p = other.position - ego.position;
  const Vec2 rel_v = other.velocity - ego.velocity;
  const double range = rel_p.norm();
  if (range < 1e-9) return 0.0;
  const double closing = -rel_p.dot(rel_v) / range;
  if (closing <= params.min_closing_mps) return std::nullopt;

  const double v2 = rel_v.dot(rel_v);
  if (v2 < 1e-12) return std::nullopt;
  const double t_cpa = -rel_p.dot(rel_v) / v2;
  const Vec2 at_cpa = rel_p + rel_v * t_cpa;
  if (at_cpa.norm() >= params.miss_threshold_m) return std::nullopt;
  return range / closing;
}

const Track* TrackStore::find(int id) const {
  for (const Track& t : tracks_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

std::optional<double> TrackStore::lateral_sample(const Track& track, const Vec2& position,
                                                 const Pose& observer,
                                                 const sensors::SensorModel& model,
                                                 bool fine_active) const {
  if (track.lane_index < 0 || track.lane_index >= static_cast<int>(lanes_.size())) {
    return position.y;  // no lane reference
  }
  const Polyline& lane = lanes_[static_cast<std::size_t>(track.lane_index)];
  // range noise lands along the line of sight; only its component across the
  // lane direction corrupts the lateral estimate. Samples too noisy to
  // resolve a weave are skipped.
  const Vec2 rel = position - observer.position();
  const double range = rel.norm();
  double sigma_abs = model.sigma_at(range) * range;
  if (fine_active) sigma_abs *= model.fine_noise_factor;
  if (range > 1e-9) {
    const Vec2 los = rel * (1.0 / range);
    const double h = lane.heading_at(lane.nearest_s(position));
    const Vec2 lane_dir{std::cos(h), std::sin(h)};
    if (sigma_abs * std::abs(los.cross(lane_dir)) > params_.lateral_noise_gate_m) {
      return std::nullopt;
    }
  }
  return lane.signed_lateral(position);
}

void TrackStore::step(double t, const std::vector<sensors::RangeMeasurement>& measurements,
                      const Pose& observer, const sensors::SensorModel& model,
                      bool fine_active) {
  // world-frame positions and noise-adaptive gates
  std::vector<Vec2> positions;
  std::vector<double> gates;
  positions.reserve(measurements.size());
  for (const auto& m : measurements) {
    const double a = observer.heading + m.bearing;
    positions.push_back(observer.position() + Vec2{std::cos(a), std::sin(a)} * m.measured_range);
    double sigma_abs = model.sigma_at(m.measured_range) * m.measured_range;
    if (fine_active) sigma_abs *= model.fine_noise_factor;
    gates.push_back(std::max(params_.base_gate_m, 4.0 * sigma_abs));
  }

  std::vector<Vec2> predicted;
  std::vector<std::size_t> live;  // indices into tracks_
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    if (tracks_[i].status == TrackStatus::kDead) continue;
    const double dt = t - tracks_[i].last_update;
    predicted.push_back(tracks_[i].position + tracks_[i].velocity * dt);
    live.push_back(i);
  }

  const Assignment assignment = associate(predicted, positions, gates);

  for (const auto& [pi, mi] : assignment.pairs) {
    Track& tr = tracks_[live[pi]];
    const double dt = t - tr.last_update;
    const auto lateral =
        lateral_sample(tr, positions[mi], observer, model, fine_active);
    tr = update_track(std::move(tr), positions[mi], dt > 0.0 ? dt : 1e-3, lateral, params_);
    tr.last_update = t;
    tr.range_m = (positions[mi] - observer.position()).norm();
    tr.radial_speed = measurements[mi].radial_speed;
    tr.source_id = measurements[mi].target;
  }

  for (const std::size_t pi : assignment.unmatched_tracks) {
    Track& tr = tracks_[live[pi]];
    ++tr.misses;
    if (tr.misses >= params_.max_misses) tr.status = TrackStatus::kDead;
  }

  for (const std::size_t mi : assignment.unmatched_measurements) {
    // an outlier near a live track is a missed update, not a new object
    bool near_existing = false;
    for (std::size_t pi = 0; pi < predicted.size(); ++pi) {
      if ((predicted[pi] - positions[mi]).norm() <= 2.0 * gates[mi]) {
        near_existing = true;
        break;
      }
    }
    if (near_existing) continue;
    Track tr;
    tr.id = next_id_++;
    tr.position = positions[mi];
    tr.velocity = {0.0, 0.0};
    tr.last_update = t;
    tr.hits = 1;
    tr.status = TrackStatus::kTentative;
    tr.range_m = (positions[mi] - observer.position()).norm();
    tr.radial_speed = measurements[mi].radial_speed;
    tr.source_id = measurements[mi].target;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < lanes_.size(); ++li) {
      const double d = lanes_[li].distance(positions[mi]);
      if (d < best) {
        best = d;
        tr.lane_index = static_cast<int>(li);
      }
    }
    const auto lateral = lateral_sample(tr, positions[mi], observer, model, fine_active);
    if (lateral) tr.lateral_history.emplace_back(t, *lateral);
    tracks_.push_back(std::move(tr));
  }

  // prune dead tracks so the store stays bounded
  tracks_.erase(std::remove_if(tracks_.begin(), tracks_.end(),
                               [](const Track& tr) { return tr.status == TrackStatus::kDead; }),
                tracks_.end());
}

void TrackStore::classify(const std::vector<sensors::Detection>& detections, const Pose& observer,
                          const sensors::CameraIntrinsics& camera) {
  constexpr double kBearingGate = 3.0 * std::numbers::pi / 180.0;
  const double fpx = camera.focal_px();
  const double cx = camera.width / 2.0;
  for (const auto& det : detections) {
    if (det.klass != sensors::CellClass::kVehicle &&
        det.klass != sensors::CellClass::kPedestrian) {
      continue;  // static furniture never classifies a moving track
    }
    const double u_center = 0.5 * (det.box.x_min + det.box.x_max);
    const double det_bearing = -std::atan2(u_center - cx, fpx);
    Track* best = nullptr;
    double best_gap = kBearingGate;
    for (Track& tr : tracks_) {
      const Vec2 rel = tr.position - observer.position();
      const double tr_bearing = wrap_angle(std::atan2(rel.y, rel.x) - observer.heading);
      const double gap = std::abs(wrap_angle(tr_bearing - det_bearing));
      if (gap <= best_gap) {
        best_gap = gap;
        best = &tr;
      }
    }
    if (best != nullptr) {
      best->klass = det.klass == sensors::CellClass::kVehicle ? "car" : "pedestrian";
    }
  }
}

std::vector<int> TrackStore::update_weaving(double window_s, const WeavingParams& params) {
  std::vector<int> newly;
  for (Track& tr : tracks_) {
    if (tr.status != TrackStatus::kConfirmed || tr.weaving_latched) continue;
    const WeavingVerdict v = detect_weaving(tr, window_s, params);
    if (v.weaving) {
      tr.weaving_latched = true;
      tr.weaving_range = v.detected_range;
      newly.push_back(tr.id);
    }
  }
  return newly;
}

}  // namespace roadwarn::tracking
