#include "roadwarn/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace roadwarn::sensors {

using nlohmann::json;
using world::EntityClass;
using world::VehicleState;
using world::WorldState;

double SensorModel::mape_at(double range) const {
  if (error_table.empty()) return 0.0;
  if (range <= error_table.front().first) return error_table.front().second;
  if (range >= error_table.back().first) return error_table.back().second;
  for (std::size_t i = 1; i < error_table.size(); ++i) {
    const auto& [r1, m1] = error_table[i];
    const auto& [r0, m0] = error_table[i - 1];
    if (range <= r1) {
      const double u = (range - r0) / (r1 - r0);
      return m0 + (m1 - m0) * u;
    }
  }
  return error_table.back().second;
}

double SensorModel::sigma_at(double range) const {
  // For zero-mean Gaussian relative error, E|eps| = sigma * sqrt(2/pi),
  // so matching a mean absolute percentage error m needs sigma = m/100 * sqrt(pi/2).
  return mape_at(range) / 100.0 * std::sqrt(std::numbers::pi / 2.0);
}

std::vector<RangeMeasurement> range_scan(const WorldState& state,
                                         const world::Scenario& scenario,
                                         const std::string& observer, const SensorModel& model,
                                         const ScanMode& mode, double mount_rad, Rng& rng) {
  const auto truth = world::ground_truth(state, scenario, observer);
  const double half_fov = model.fov_deg * std::numbers::pi / 360.0;
  const double half_window = mode.window_deg * std::numbers::pi / 360.0;

  std::vector<RangeMeasurement> out;
  for (const auto& gt : truth) {
    if (gt.range > model.max_range) continue;
    const double off_axis = wrap_angle(gt.bearing - mount_rad);
    if (std::abs(off_axis) > half_fov) continue;
    if (mode.fine && std::abs(wrap_angle(gt.bearing - mode.center_bearing)) > half_window) {
      continue;
    }
    double sigma = model.sigma_at(gt.range);
    if (mode.fine) sigma *= model.fine_noise_factor;
    RangeMeasurement m;
    m.target = gt.id;
    m.measured_range = std::max(0.0, gt.range * (1.0 + rng.gaussian(0.0, sigma)));
    m.bearing = gt.bearing;
    m.radial_speed = gt.closing_speed;
    m.t = state.t;
    out.push_back(std::move(m));
  }
  return out;
}

std::optional<std::pair<double, double>> select_fine_window(
    const std::vector<RangeMeasurement>& prev, const std::vector<RangeMeasurement>& cur,
    double threshold_mps, double window_deg, double bearing_gate_rad) {
  if (prev.empty() || cur.empty()) return std::nullopt;

  double best_rate = 0.0;
  std::optional<double> best_bearing;
  for (const RangeMeasurement& c : cur) {
    // match by closest bearing
    const RangeMeasurement* matched = nullptr;
    double best_gap = bearing_gate_rad;
    for (const RangeMeasurement& p : prev) {
      const double gap = std::abs(wrap_angle(c.bearing - p.bearing));
      if (gap <= best_gap) {
        best_gap = gap;
        matched = &p;
      }
    }
    if (matched == nullptr) continue;
    const double dt = c.t - matched->t;
    if (dt <= 0.0) continue;
    const double rate = std::abs(c.measured_range - matched->measured_range) / dt;
    if (rate > threshold_mps && rate > best_rate) {
      best_rate = rate;
      best_bearing = c.bearing;
    }
  }
  if (!best_bearing) return std::nullopt;
  return std::make_pair(*best_bearing, window_deg);
}

// ---------------------------------------------------------------------------
// Semantic grid

const char* cell_class_name(CellClass c) {
  switch (c) {
    case CellClass::kBackground: return "background";
    case CellClass::kRoad: return "road";
    case CellClass::kVehicle: return "vehicle";
    case CellClass::kPedestrian: return "pedestrian";
    case CellClass::kTrafficLight: return "traffic_light";
    case CellClass::kTrafficSign: return "traffic_sign";
  }
  return "background";
}

double CameraIntrinsics::focal_px() const {
  return (width / 2.0) / std::tan(hfov_deg * std::numbers::pi / 360.0);
}

namespace {

struct RenderEntity {
  std::string id;
  CellClass klass;
  Obb footprint;
  double height;
};

double class_height(CellClass c) {
  switch (c) {
    case CellClass::kVehicle: return 1.5;
    case CellClass::kPedestrian: return 1.8;
    case CellClass::kTrafficLight: return 3.0;
    case CellClass::kTrafficSign: return 2.0;
    default: return 0.0;
  }
}

void paint_entity(SemanticGrid& grid, const CameraIntrinsics& cam, const Pose& obs,
                  const RenderEntity& e, std::int32_t instance_index) {
  const Vec2 fwd = obs.forward();
  const Vec2 right{fwd.y, -fwd.x};
  const double fpx = cam.focal_px();
  const double cx = cam.width / 2.0;
  const double cy = cam.height / 2.0;

  const auto corners = e.footprint.corners();
  double u_min = std::numeric_limits<double>::infinity(), u_max = -u_min;
  double v_min = u_min, v_max = -u_min;
  bool any_in_front = false;
  for (const Vec2& c : corners) {
    const Vec2 rel = c - obs.position();
    double z = rel.dot(fwd);
    const double x = rel.dot(right);
    if (z >= cam.near_m) any_in_front = true;
    z = std::max(z, cam.near_m);
    const double u = cx + fpx * x / z;
    u_min = std::min(u_min, u);
    u_max = std::max(u_max, u);
    for (const double elev : {0.0, e.height}) {
      const double y = elev - cam.mount_height_m;
      const double v = cy - fpx * y / z;
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
    }
  }
  if (!any_in_front) return;

  const double center_range = (e.footprint.center - obs.position()).norm();
  const double half_diag = 0.5 * std::hypot(e.footprint.length, e.footprint.width);
  const float paint_depth =
      static_cast<float>(std::max(cam.near_m, center_range - half_diag));

  Box box{std::clamp(u_min, 0.0, static_cast<double>(cam.width)),
          std::clamp(v_min, 0.0, static_cast<double>(cam.height)),
          std::clamp(u_max, 0.0, static_cast<double>(cam.width)),
          std::clamp(v_max, 0.0, static_cast<double>(cam.height))};

  InstanceStats stats;
  stats.klass = e.klass;
  stats.projected_box = box;
  stats.range = center_range;

  const int x0 = static_cast<int>(std::floor(box.x_min));
  const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(box.x_max)) - 1);
  const int y0 = static_cast<int>(std::floor(box.y_min));
  const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(box.y_max)) - 1);
  for (int y = std::max(0, y0); y <= y1; ++y) {
    for (int x = std::max(0, x0); x <= x1; ++x) {
      ++stats.projected_cells;
      const std::size_t idx = static_cast<std::size_t>(y) * grid.width + x;
      if (paint_depth < grid.depth[idx]) {
        grid.depth[idx] = paint_depth;
        grid.cells[idx] = e.klass;
        grid.instance[idx] = instance_index;
      }
    }
  }
  if (box.area() > 0.0 && stats.projected_cells == 0) stats.projected_cells = 1;
  grid.stats.emplace(e.id, stats);
}

}  // namespace

SemanticGrid render_semantic_grid(const WorldState& state, const world::Scenario& scenario,
                                  const std::string& observer, const CameraIntrinsics& cam) {
  const VehicleState* obs = state.find(observer);
  if (obs == nullptr) throw world::ScenarioError("unknown observer id: " + observer);

  SemanticGrid grid;
  grid.width = cam.width;
  grid.height = cam.height;
  const std::size_t n = static_cast<std::size_t>(cam.width) * cam.height;
  grid.cells.assign(n, CellClass::kBackground);
  grid.depth.assign(n, std::numeric_limits<float>::infinity());
  grid.instance.assign(n, -1);

  // ground-plane road pass
  const Vec2 fwd = obs->pose.forward();
  const Vec2 right{fwd.y, -fwd.x};
  const double fpx = cam.focal_px();
  const double cx = cam.width / 2.0;
  const double cy = cam.height / 2.0;
  constexpr double kRoadFar = 500.0;
  const double half_lane = scenario.lane_width / 2.0;
  if (!scenario.lanes.empty()) {
    for (int y = static_cast<int>(std::floor(cy)) + 1; y < cam.height; ++y) {
      const double vc = y + 0.5;
      const double z = fpx * cam.mount_height_m / (vc - cy);
      if (z < cam.near_m || z > kRoadFar) continue;
      for (int x = 0; x < cam.width; ++x) {
        const double uc = x + 0.5;
        const double lateral = (uc - cx) * z / fpx;
        const Vec2 p = obs->pose.position() + fwd * z + right * lateral;
        for (const Polyline& lane : scenario.lanes) {
          if (lane.distance(p) <= half_lane) {
            const std::size_t idx = static_cast<std::size_t>(y) * cam.width + x;
            grid.cells[idx] = CellClass::kRoad;
            grid.depth[idx] = static_cast<float>(std::hypot(z, lateral));
            break;
          }
        }
      }
    }
  }

  // entity pass, depth-buffered
  std::vector<RenderEntity> entities;
  for (const VehicleState& v : state.vehicles) {
    if (v.id == observer) continue;
    entities.push_back({v.id,
                        v.klass == EntityClass::kVehicle ? CellClass::kVehicle
                                                         : CellClass::kPedestrian,
                        v.footprint(), 0.0});
  }
  for (const world::TrafficLight& l : state.lights) {
    entities.push_back({l.id, CellClass::kTrafficLight,
                        Obb{l.position.position(), l.position.heading, 0.6, 0.6}, 0.0});
  }
  for (const world::SignPost& s : scenario.signs) {
    entities.push_back({s.id, CellClass::kTrafficSign,
                        Obb{s.pose.position(), s.pose.heading, 0.5, 0.5}, 0.0});
  }
  for (RenderEntity& e : entities) e.height = class_height(e.klass);

  grid.instance_ids.reserve(entities.size());
  for (std::size_t i = 0; i < entities.size(); ++i) {
    grid.instance_ids.push_back(entities[i].id);
    paint_entity(grid, cam, obs->pose, entities[i], static_cast<std::int32_t>(i));
  }

  // visibility counts after all entities competed for cells
  for (const std::int32_t inst : grid.instance) {
    if (inst >= 0) ++grid.stats[grid.instance_ids[static_cast<std::size_t>(inst)]].visible_cells;
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Detector emulation

std::vector<Detection> camera_detect(const WorldState& state, const std::string& observer,
                                     const DetectorProfile& profile, const SemanticGrid& grid,
                                     Rng& rng) {
  if (state.find(observer) == nullptr) {
    throw world::ScenarioError("unknown observer id: " + observer);
  }
  std::vector<Detection> out;
  for (const auto& [id, stats] : grid.stats) {
    if (stats.range > profile.r_max) continue;
    if (stats.visible_cells < 1) continue;

    const Box& gt = stats.projected_box;
    const double w = gt.width();
    const double h = gt.height();
    Box box = gt;
    box.x_min += profile.jitter_frac * w * rng.uniform(-1.0, 1.0);
    box.x_max += profile.jitter_frac * w * rng.uniform(-1.0, 1.0);
    box.y_min += profile.jitter_frac * h * rng.uniform(-1.0, 1.0);
    box.y_max += profile.jitter_frac * h * rng.uniform(-1.0, 1.0);

    box.x_min = std::clamp(box.x_min, 0.0, static_cast<double>(grid.width));
    box.x_max = std::clamp(box.x_max, 0.0, static_cast<double>(grid.width));
    box.y_min = std::clamp(box.y_min, 0.0, static_cast<double>(grid.height));
    box.y_max = std::clamp(box.y_max, 0.0, static_cast<double>(grid.height));
    if (box.x_max - box.x_min < 0.5) {
      const double c = 0.5 * (box.x_min + box.x_max);
      box.x_min = c - 0.25;
      box.x_max = c + 0.25;
    }
    if (box.y_max - box.y_min < 0.5) {
      const double c = 0.5 * (box.y_min + box.y_max);
      box.y_min = c - 0.25;
      box.y_max = c + 0.25;
    }

    Detection d;
    d.klass = stats.klass;
    d.box = box;
    d.confidence = profile.confidence;
    d.t = state.t;
    d.target = id;
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in profiles

namespace {

// Jitter fractions reproducing the target mean IOUs under independent
// uniform per-edge offsets; found with the `calibrate` CLI command.
constexpr double kJitterIou031 = 0.6044;
constexpr double kJitterIou065 = 0.2258;

}  // namespace

std::map<std::string, DetectorProfile> builtin_detectors() {
  std::map<std::string, DetectorProfile> m;
  m["centernet"] = {"centernet", 51.73, 0.45, 0.31, kJitterIou031};
  m["efficientdet"] = {"efficientdet", 45.38, 0.39, 0.31, kJitterIou031};
  m["yolov4_pretrained"] = {"yolov4_pretrained", 60.32, 0.94, 0.31, kJitterIou031};
  m["yolov4_retrained"] = {"yolov4_retrained", 88.0, 0.94, 0.65, kJitterIou065};
  m["yolov4_cropped"] = {"yolov4_cropped", 135.0, 0.94, 0.65, kJitterIou065};
  return m;
}

std::map<std::string, SensorModel> builtin_sensors() {
  std::map<std::string, SensorModel> m;
  m["radar"] = {SensorKind::kRadar, 321.0, 45.0, {{100, 4.7}, {200, 6.1}, {300, 8.3}}, 0.5};
  m["lidar"] = {SensorKind::kLidar, 300.0, 360.0, {{100, 5.2}, {200, 7.7}, {300, 10.3}}, 0.5};
  m["depth"] = {SensorKind::kDepth, 300.0, 90.0, {{100, 5.8}, {200, 8.2}, {300, 11.3}}, 0.5};
  return m;
}

void load_profiles(const std::string& json_text, std::map<std::string, DetectorProfile>& detectors,
                   std::map<std::string, SensorModel>& sensors) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw world::ScenarioError(std::string("profiles parse error: ") + e.what());
  }
  if (doc.contains("detectors")) {
    for (const auto& [name, spec] : doc["detectors"].items()) {
      DetectorProfile p = detectors.count(name) ? detectors[name] : DetectorProfile{};
      p.name = name;
      p.r_max = spec.value("r_max", p.r_max);
      p.confidence = spec.value("confidence", p.confidence);
      p.iou_target = spec.value("iou_target", p.iou_target);
      p.jitter_frac = spec.value("jitter_frac", p.jitter_frac);
      if (p.r_max <= 0.0) throw world::ScenarioError("detector '" + name + "': r_max must be > 0");
      detectors[name] = p;
    }
  }
  if (doc.contains("sensors")) {
    for (const auto& [name, spec] : doc["sensors"].items()) {
      SensorModel s = sensors.count(name) ? sensors[name] : SensorModel{};
      s.max_range = spec.value("max_range", s.max_range);
      s.fov_deg = spec.value("fov_deg", s.fov_deg);
      s.fine_noise_factor = spec.value("fine_noise_factor", s.fine_noise_factor);
      if (spec.contains("error_table")) {
        s.error_table.clear();
        for (const auto& row : spec["error_table"]) {
          s.error_table.emplace_back(row[0].get<double>(), row[1].get<double>());
        }
      }
      double last = 0.0;
      for (const auto& [r, mape] : s.error_table) {
        if (r <= last && last != 0.0) {
          throw world::ScenarioError("sensor '" + name + "': error_table ranges must increase");
        }
        if (mape < 0.0) throw world::ScenarioError("sensor '" + name + "': mape must be >= 0");
        last = r;
      }
      if (s.max_range <= 0.0) throw world::ScenarioError("sensor '" + name + "': max_range must be > 0");
      sensors[name] = s;
    }
  }
}

void load_profiles_file(const std::string& path, std::map<std::string, DetectorProfile>& detectors,
                        std::map<std::string, SensorModel>& sensors) {
  std::ifstream in(path);
  if (!in) throw world::ScenarioError("cannot open profiles file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  load_profiles(buf.str(), detectors, sensors);
}

}  // namespace roadwarn::sensors
