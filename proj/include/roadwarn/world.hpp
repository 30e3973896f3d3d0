#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadwarn/geometry.hpp"

namespace roadwarn::world {

enum class Role { kEgo, kResponder, kNpc };
enum class EntityClass { kVehicle, kPedestrian };
enum class LightPhase { kGreen, kYellow, kRed };

struct BrakeEvent {
  double t{0.0};
  double target_speed{0.0};
  double duration{1.0};
};

struct VehicleState {
  std::string id;
  Role role{Role::kNpc};
  EntityClass klass{EntityClass::kVehicle};
  Pose pose;
  double speed{0.0};  // m/s along the route
  double length{4.5};
  double width{2.0};
  Polyline route;  // starts at the initial position
  std::vector<BrakeEvent> brake_events;

  // integration state
  double route_progress{0.0};
  std::size_t next_brake{0};
  double ramp_t0{0.0};
  double ramp_v0{0.0};
  bool ramp_active{false};

  Obb footprint() const { return Obb{pose.position(), pose.heading, length, width}; }
  Vec2 velocity() const { return pose.forward() * speed; }
};

struct TrafficLight {
  std::string id;
  Pose position;
  LightPhase initial_phase{LightPhase::kGreen};
  double green_s{5.0};
  double yellow_s{2.0};
  double red_s{5.0};
  LightPhase phase{LightPhase::kGreen};
};

LightPhase light_phase_at(const TrafficLight& light, double t);

struct RectRegion {
  double x_min{0.0}, y_min{0.0}, x_max{0.0}, y_max{0.0};

  bool contains(const Vec2& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

struct SignPost {
  std::string id;
  Pose pose;
};

struct PassFailSpec {
  bool forbid_collision{false};
  bool forbid_alerts{false};
  std::optional<std::string> require_alert_kind;
  std::optional<double> min_alert_lead_s;
};

struct Scenario {
  std::string name;
  std::uint64_t seed{0};
  double duration_s{10.0};
  double timestep_s{0.05};
  int hour_of_day{12};
  double sensor_mount_deg{0.0};
  double lane_width{3.5};
  std::vector<Polyline> lanes;
  std::vector<RectRegion> intersections;
  std::vector<VehicleState> vehicles;
  std::vector<TrafficLight> lights;
  std::vector<SignPost> signs;
  PassFailSpec pass_fail;

  std::size_t step_count() const { return static_cast<std::size_t>(duration_s / timestep_s + 0.5); }
};

struct Collision {
  double t{0.0};
  std::string id_a;
  std::string id_b;
};

struct WorldState {
  double t{0.0};
  std::vector<VehicleState> vehicles;
  std::vector<TrafficLight> lights;
  std::vector<Collision> collisions;

  const VehicleState* find(const std::string& id) const;
};

struct GroundTruthEntry {
  std::string id;
  EntityClass klass{EntityClass::kVehicle};
  double range{0.0};
  double bearing{0.0};        // rad, relative to observer heading, left positive
  double closing_speed{0.0};  // m/s, positive when approaching
  double lateral_offset{0.0}; // m from the target's own lane centerline
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses and validates a scenario document (JSON, see schema/scenario.schema.json).
/// Throws ScenarioError with the offending field or line.
Scenario load_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);

WorldState initial_state(const Scenario& scenario);

/// Advances one timestep: route following at the current speed, scripted
/// speed ramps, light phases, and collision detection (each pair recorded
/// once, at first overlap).
WorldState step(const WorldState& state, const Scenario& scenario);

/// Exact geometry relative to the observer. Throws ScenarioError on an
/// unknown observer id.
std::vector<GroundTruthEntry> ground_truth(const WorldState& state, const Scenario& scenario,
                                           const std::string& observer);

struct AlertRecord {
  double t{0.0};
  std::string kind;
  std::optional<double> ttc;
};

struct RunSummary {
  std::vector<Collision> collisions;
  std::vector<AlertRecord> alerts;
};

struct Verdict {
  bool pass{true};
  std::string reason;
};

Verdict check_pass_fail(const RunSummary& summary, const Scenario& scenario);

}  // namespace roadwarn::world
