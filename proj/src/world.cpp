#include "roadwarn/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace roadwarn::world {

using nlohmann::json;

LightPhase light_phase_at(const TrafficLight& light, double t) {
  const double cycle = light.green_s + light.yellow_s + light.red_s;
  // t = 0 is the start of the configured initial phase; order G -> Y -> R
  double offset = 0.0;
  switch (light.initial_phase) {
    case LightPhase::kGreen: offset = 0.0; break;
    case LightPhase::kYellow: offset = light.green_s; break;
    case LightPhase::kRed: offset = light.green_s + light.yellow_s; break;
  }
  double u = std::fmod(t + offset, cycle);
  if (u < 0.0) u += cycle;
  if (u < light.green_s) return LightPhase::kGreen;
  if (u < light.green_s + light.yellow_s) return LightPhase::kYellow;
  return LightPhase::kRed;
}

const VehicleState* WorldState::find(const std::string& id) const {
  for (const VehicleState& v : vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ScenarioError(where + ": " + what);
}

double require_finite(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "value must be finite");
  return v;
}

Pose parse_pose(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object with x, y, heading");
  Pose p;
  p.x = require_finite(j.value("x", json(0.0)), where + ".x");
  p.y = require_finite(j.value("y", json(0.0)), where + ".y");
  p.heading = wrap_angle(require_finite(j.value("heading", json(0.0)), where + ".heading"));
  return p;
}

std::vector<Vec2> parse_point_list(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of [x, y] pairs");
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& p = j[i];
    const std::string at = where + "[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 2) fail(at, "expected [x, y]");
    pts.push_back({require_finite(p[0], at + "[0]"), require_finite(p[1], at + "[1]")});
  }
  return pts;
}

VehicleState parse_vehicle(const json& j, std::size_t index) {
  const std::string where = "vehicles[" + std::to_string(index) + "]";
  VehicleState v;
  if (!j.contains("id")) fail(where, "missing field 'id'");
  v.id = j["id"].get<std::string>();

  const std::string role = j.value("role", "npc");
  if (role == "ego") {
    v.role = Role::kEgo;
  } else if (role == "responder") {
    v.role = Role::kResponder;
  } else if (role == "npc") {
    v.role = Role::kNpc;
  } else {
    fail(where + ".role", "unknown role '" + role + "'");
  }

  const std::string klass = j.value("class", "vehicle");
  if (klass == "vehicle") {
    v.klass = EntityClass::kVehicle;
    v.length = 4.5;
    v.width = 2.0;
  } else if (klass == "pedestrian") {
    v.klass = EntityClass::kPedestrian;
    v.length = 0.5;
    v.width = 0.5;
  } else {
    fail(where + ".class", "unknown class '" + klass + "'");
  }

  if (!j.contains("pose")) fail(where, "missing field 'pose'");
  v.pose = parse_pose(j["pose"], where + ".pose");
  v.speed = require_finite(j.value("speed", json(0.0)), where + ".speed");
  if (v.speed < 0.0) fail(where + ".speed", "speed must be >= 0");
  if (j.contains("length")) v.length = require_finite(j["length"], where + ".length");
  if (j.contains("width")) v.width = require_finite(j["width"], where + ".width");
  if (v.length <= 0.0 || v.width <= 0.0) fail(where, "length and width must be > 0");

  std::vector<Vec2> route{v.pose.position()};
  if (j.contains("route")) {
    for (Vec2 p : parse_point_list(j["route"], where + ".route")) {
      if ((p - route.back()).norm() > 1e-9) route.push_back(p);
    }
  }
  v.route = Polyline(std::move(route));

  if (j.contains("brake_events")) {
    const json& evs = j["brake_events"];
    if (!evs.is_array()) fail(where + ".brake_events", "expected an array");
    for (std::size_t i = 0; i < evs.size(); ++i) {
      const std::string at = where + ".brake_events[" + std::to_string(i) + "]";
      BrakeEvent e;
      e.t = require_finite(evs[i].value("t", json(0.0)), at + ".t");
      e.target_speed = require_finite(evs[i].value("target_speed", json(0.0)), at + ".target_speed");
      e.duration = require_finite(evs[i].value("duration", json(1.0)), at + ".duration");
      if (e.target_speed < 0.0) fail(at, "target_speed must be >= 0");
      if (e.duration <= 0.0) fail(at, "duration must be > 0");
      v.brake_events.push_back(e);
    }
    std::sort(v.brake_events.begin(), v.brake_events.end(),
              [](const BrakeEvent& a, const BrakeEvent& b) { return a.t < b.t; });
  }
  return v;
}

TrafficLight parse_light(const json& j, std::size_t index) {
  const std::string where = "lights[" + std::to_string(index) + "]";
  TrafficLight l;
  l.id = j.value("id", "light" + std::to_string(index));
  if (!j.contains("pose")) fail(where, "missing field 'pose'");
  l.position = parse_pose(j["pose"], where + ".pose");
  const std::string phase = j.value("phase", "green");
  if (phase == "green") {
    l.initial_phase = LightPhase::kGreen;
  } else if (phase == "yellow") {
    l.initial_phase = LightPhase::kYellow;
  } else if (phase == "red") {
    l.initial_phase = LightPhase::kRed;
  } else {
    fail(where + ".phase", "unknown phase '" + phase + "'");
  }
  if (j.contains("cycle")) {
    const json& c = j["cycle"];
    l.green_s = require_finite(c.value("green", json(5.0)), where + ".cycle.green");
    l.yellow_s = require_finite(c.value("yellow", json(2.0)), where + ".cycle.yellow");
    l.red_s = require_finite(c.value("red", json(5.0)), where + ".cycle.red");
  }
  if (l.green_s <= 0.0 || l.yellow_s <= 0.0 || l.red_s <= 0.0) {
    fail(where + ".cycle", "phase durations must be > 0");
  }
  l.phase = l.initial_phase;
  return l;
}

}  // namespace

Scenario load_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ScenarioError("scenario: top level must be an object");

  Scenario s;
  s.name = doc.value("name", "unnamed");
  s.seed = doc.value("seed", 0ull);
  if (!doc.contains("duration_s")) fail("scenario", "missing field 'duration_s'");
  s.duration_s = require_finite(doc["duration_s"], "duration_s");
  s.timestep_s = require_finite(doc.value("timestep_s", json(0.05)), "timestep_s");
  if (s.timestep_s <= 0.0) fail("timestep_s", "timestep must be > 0");
  if (s.duration_s < s.timestep_s) fail("duration_s", "duration must be >= timestep");
  s.hour_of_day = doc.value("hour_of_day", 12);
  if (s.hour_of_day < 0 || s.hour_of_day > 23) fail("hour_of_day", "must be in [0, 23]");
  s.sensor_mount_deg = doc.value("sensor_mount_deg", 0.0);
  s.lane_width = doc.value("lane_width", 3.5);

  if (doc.contains("lanes")) {
    const json& lanes = doc["lanes"];
    if (!lanes.is_array()) fail("lanes", "expected an array of polylines");
    for (std::size_t i = 0; i < lanes.size(); ++i) {
      auto pts = parse_point_list(lanes[i], "lanes[" + std::to_string(i) + "]");
      if (pts.size() < 2) fail("lanes[" + std::to_string(i) + "]", "need at least 2 points");
      s.lanes.emplace_back(std::move(pts));
    }
  }
  if (doc.contains("intersections")) {
    for (std::size_t i = 0; i < doc["intersections"].size(); ++i) {
      const json& r = doc["intersections"][i];
      const std::string where = "intersections[" + std::to_string(i) + "]";
      RectRegion region;
      region.x_min = require_finite(r.value("x_min", json(0.0)), where + ".x_min");
      region.y_min = require_finite(r.value("y_min", json(0.0)), where + ".y_min");
      region.x_max = require_finite(r.value("x_max", json(0.0)), where + ".x_max");
      region.y_max = require_finite(r.value("y_max", json(0.0)), where + ".y_max");
      if (region.x_max <= region.x_min || region.y_max <= region.y_min) {
        fail(where, "empty region");
      }
      s.intersections.push_back(region);
    }
  }

  if (!doc.contains("vehicles") || !doc["vehicles"].is_array()) {
    fail("vehicles", "missing or not an array");
  }
  int ego_count = 0;
  for (std::size_t i = 0; i < doc["vehicles"].size(); ++i) {
    VehicleState v = parse_vehicle(doc["vehicles"][i], i);
    if (v.role == Role::kEgo) ++ego_count;
    for (const VehicleState& other : s.vehicles) {
      if (other.id == v.id) fail("vehicles[" + std::to_string(i) + "].id", "duplicate id");
    }
    s.vehicles.push_back(std::move(v));
  }
  if (ego_count != 1) {
    fail("vehicles", "scenario must contain exactly one 'ego' vehicle (found " +
                         std::to_string(ego_count) + ")");
  }

  if (doc.contains("lights")) {
    for (std::size_t i = 0; i < doc["lights"].size(); ++i) {
      s.lights.push_back(parse_light(doc["lights"][i], i));
    }
  }
  if (doc.contains("signs")) {
    for (std::size_t i = 0; i < doc["signs"].size(); ++i) {
      SignPost sp;
      sp.id = doc["signs"][i].value("id", "sign" + std::to_string(i));
      sp.pose = parse_pose(doc["signs"][i]["pose"], "signs[" + std::to_string(i) + "].pose");
      s.signs.push_back(sp);
    }
  }

  if (doc.contains("pass_fail")) {
    const json& pf = doc["pass_fail"];
    s.pass_fail.forbid_collision = pf.value("forbid_collision", false);
    s.pass_fail.forbid_alerts = pf.value("forbid_alerts", false);
    if (pf.contains("require_alert_kind")) {
      s.pass_fail.require_alert_kind = pf["require_alert_kind"].get<std::string>();
    }
    if (pf.contains("min_alert_lead_s")) {
      s.pass_fail.min_alert_lead_s = require_finite(pf["min_alert_lead_s"], "pass_fail.min_alert_lead_s");
    }
  }
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return load_scenario(buf.str());
  } catch (const ScenarioError& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

WorldState initial_state(const Scenario& scenario) {
  WorldState state;
  state.t = 0.0;
  state.vehicles = scenario.vehicles;
  state.lights = scenario.lights;
  for (TrafficLight& l : state.lights) l.phase = light_phase_at(l, 0.0);
  return state;
}

namespace {

void advance_vehicle(VehicleState& v, double t_next, double dt) {
  // scripted speed ramp (linear to target over duration)
  if (!v.ramp_active && v.next_brake < v.brake_events.size() &&
      t_next >= v.brake_events[v.next_brake].t) {
    v.ramp_active = true;
    v.ramp_t0 = v.brake_events[v.next_brake].t;
    v.ramp_v0 = v.speed;
  }
  if (v.ramp_active) {
    const BrakeEvent& e = v.brake_events[v.next_brake];
    const double u = std::clamp((t_next - v.ramp_t0) / e.duration, 0.0, 1.0);
    v.speed = v.ramp_v0 + (e.target_speed - v.ramp_v0) * u;
    if (u >= 1.0) {
      v.ramp_active = false;
      ++v.next_brake;
    }
  }

  if (v.route.length() <= 0.0) {
    v.speed = 0.0;  // no route to follow
    return;
  }
  v.route_progress += v.speed * dt;
  if (v.route_progress >= v.route.length()) {
    // route exhausted: hold the final waypoint
    v.route_progress = v.route.length();
    v.speed = 0.0;
    v.ramp_active = false;
  }
  const Vec2 p = v.route.point_at(v.route_progress);
  v.pose.x = p.x;
  v.pose.y = p.y;
  v.pose.heading = v.route.heading_at(v.route_progress);
}

bool pair_recorded(const std::vector<Collision>& collisions, const std::string& a,
                   const std::string& b) {
  for (const Collision& c : collisions) {
    if ((c.id_a == a && c.id_b == b) || (c.id_a == b && c.id_b == a)) return true;
  }
  return false;
}

}  // namespace

WorldState step(const WorldState& state, const Scenario& scenario) {
  WorldState next = state;
  const double dt = scenario.timestep_s;
  next.t = state.t + dt;

  for (VehicleState& v : next.vehicles) advance_vehicle(v, next.t, dt);
  for (TrafficLight& l : next.lights) l.phase = light_phase_at(l, next.t);

  for (std::size_t i = 0; i < next.vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < next.vehicles.size(); ++j) {
      const VehicleState& a = next.vehicles[i];
      const VehicleState& b = next.vehicles[j];
      if (pair_recorded(next.collisions, a.id, b.id)) continue;
      if (obb_overlap(a.footprint(), b.footprint())) {
        next.collisions.push_back({next.t, a.id, b.id});
      }
    }
  }
  return next;
}

std::vector<GroundTruthEntry> ground_truth(const WorldState& state, const Scenario& scenario,
                                           const std::string& observer) {
  const VehicleState* obs = state.find(observer);
  if (obs == nullptr) throw ScenarioError("unknown observer id: " + observer);

  std::vector<GroundTruthEntry> out;
  for (const VehicleState& v : state.vehicles) {
    if (v.id == observer) continue;
    GroundTruthEntry e;
    e.id = v.id;
    e.klass = v.klass;
    const Vec2 rel = v.pose.position() - obs->pose.position();
    e.range = rel.norm();
    e.bearing = wrap_angle(std::atan2(rel.y, rel.x) - obs->pose.heading);
    const Vec2 rel_v = v.velocity() - obs->velocity();
    e.closing_speed = e.range > 1e-9 ? -rel.dot(rel_v) / e.range : 0.0;

    // lateral offset against the target's own (nearest) lane centerline
    e.lateral_offset = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const Polyline& lane : scenario.lanes) {
      const double d = lane.distance(v.pose.position());
      if (d < best) {
        best = d;
        e.lateral_offset = lane.signed_lateral(v.pose.position());
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

Verdict check_pass_fail(const RunSummary& summary, const Scenario& scenario) {
  const PassFailSpec& pf = scenario.pass_fail;
  if (pf.forbid_collision && !summary.collisions.empty()) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "collision at t=%.2f s", summary.collisions.front().t);
    return {false, buf};
  }
  if (pf.forbid_alerts && !summary.alerts.empty()) {
    return {false, "unexpected alert '" + summary.alerts.front().kind + "'"};
  }

  if (pf.require_alert_kind || pf.min_alert_lead_s) {
    const std::optional<double> first_collision =
        summary.collisions.empty() ? std::nullopt
                                   : std::optional<double>(summary.collisions.front().t);
    const AlertRecord* chosen = nullptr;
    for (const AlertRecord& a : summary.alerts) {
      if (pf.require_alert_kind && a.kind != *pf.require_alert_kind) continue;
      if (first_collision && a.t >= *first_collision) continue;
      chosen = &a;
      break;  // alerts are time-ordered; first match has the largest lead
    }
    if (chosen == nullptr) {
      if (first_collision) return {false, "no alert before collision"};
      return {false, "required alert not emitted"};
    }
    if (pf.min_alert_lead_s) {
      std::optional<double> lead;
      if (first_collision) {
        lead = *first_collision - chosen->t;
      } else if (chosen->ttc) {
        lead = chosen->ttc;  // no collision happened; use predicted time to contact
      }
      if (!lead) return {false, "alert lead time not measurable"};
      if (*lead < *pf.min_alert_lead_s) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "alert lead %.2f s below required %.2f s", *lead,
                      *pf.min_alert_lead_s);
        return {false, buf};
      }
    }
  }
  return {true, "ok"};
}

}  // namespace roadwarn::world
