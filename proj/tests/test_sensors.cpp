#include "doctest.h"

#include <cmath>
#include <numbers>
#include <set>

#include "roadwarn/autolabel.hpp"
#include "roadwarn/rng.hpp"
#include "roadwarn/sensors.hpp"
#include "roadwarn/world.hpp"

using namespace roadwarn;
using namespace roadwarn::sensors;
using world::EntityClass;
using world::Role;
using world::Scenario;
using world::VehicleState;
using world::WorldState;

TEST_SUITE_BEGIN("sensors");

namespace {

VehicleState make_vehicle(const std::string& id, Role role, double x, double y, double heading,
                          double speed, EntityClass klass = EntityClass::kVehicle) {
  VehicleState v;
  v.id = id;
  v.role = role;
  v.klass = klass;
  if (klass == EntityClass::kPedestrian) {
    v.length = 0.5;
    v.width = 0.5;
  }
  v.pose = {x, y, heading};
  v.speed = speed;
  v.route = Polyline({{x, y}, {x + 2000.0 * std::cos(heading), y + 2000.0 * std::sin(heading)}});
  return v;
}

struct Scene {
  Scenario scenario;
  WorldState state;
};

Scene two_vehicle_scene(double target_x, double target_y, double target_heading = 0.0,
                        double target_speed = 0.0,
                        EntityClass klass = EntityClass::kVehicle) {
  Scene scene;
  scene.scenario.name = "test";
  scene.scenario.duration_s = 10.0;
  scene.scenario.vehicles.push_back(make_vehicle("ego", Role::kEgo, 0, 0, 0, 0));
  scene.scenario.vehicles.push_back(
      make_vehicle("npc", Role::kNpc, target_x, target_y, target_heading, target_speed, klass));
  scene.state = world::initial_state(scene.scenario);
  return scene;
}

}  // namespace

TEST_CASE("error table interpolates linearly and clamps at the ends") {
  const SensorModel radar = builtin_sensors().at("radar");
  CHECK(radar.mape_at(100.0) == doctest::Approx(4.7));
  CHECK(radar.mape_at(200.0) == doctest::Approx(6.1));
  CHECK(radar.mape_at(300.0) == doctest::Approx(8.3));
  CHECK(radar.mape_at(150.0) == doctest::Approx(5.4));
  CHECK(radar.mape_at(10.0) == doctest::Approx(4.7));   // clamped low
  CHECK(radar.mape_at(400.0) == doctest::Approx(8.3));  // clamped high
}

TEST_CASE("radar range gate is exact at 321 m") {
  const SensorModel radar = builtin_sensors().at("radar");
  Rng rng(1);
  {
    const Scene scene = two_vehicle_scene(321.0, 0.0);
    const auto m = range_scan(scene.state, scene.scenario, "ego", radar, {}, 0.0, rng);
    CHECK(m.size() == 1);
  }
  {
    const Scene scene = two_vehicle_scene(322.0, 0.0);
    const auto m = range_scan(scene.state, scene.scenario, "ego", radar, {}, 0.0, rng);
    CHECK(m.empty());
  }
}

TEST_CASE("targets outside the field of view are absent") {
  const SensorModel radar = builtin_sensors().at("radar");  // 45 degrees total
  Rng rng(2);
  const Scene ahead = two_vehicle_scene(100.0, 100.0 * std::tan(0.3));  // ~17 deg < 22.5
  CHECK(range_scan(ahead.state, ahead.scenario, "ego", radar, {}, 0.0, rng).size() == 1);
  const Scene wide = two_vehicle_scene(100.0, 100.0 * std::tan(0.5));  // ~28.6 deg > 22.5
  CHECK(range_scan(wide.state, wide.scenario, "ego", radar, {}, 0.0, rng).empty());
  // a rear mount flips the gate
  const Scene behind = two_vehicle_scene(-100.0, 0.0);
  CHECK(range_scan(behind.state, behind.scenario, "ego", radar, {}, 0.0, rng).empty());
  CHECK(range_scan(behind.state, behind.scenario, "ego", radar, {}, std::numbers::pi, rng).size() ==
        1);
}

TEST_CASE("zero-noise model measures the true range exactly") {
  SensorModel ideal;
  ideal.max_range = 500.0;
  ideal.fov_deg = 360.0;
  ideal.error_table = {{100.0, 0.0}};
  Rng rng(3);
  const Scene scene = two_vehicle_scene(123.456, 0.0);
  const auto m = range_scan(scene.state, scene.scenario, "ego", ideal, {}, 0.0, rng);
  REQUIRE(m.size() == 1);
  CHECK(m[0].measured_range == doctest::Approx(123.456).epsilon(1e-12));
}

TEST_CASE("Monte Carlo: radar error at 100 m reproduces 4.7% within half a point") {
  const SensorModel radar = builtin_sensors().at("radar");
  const Scene scene = two_vehicle_scene(100.0, 0.0);
  Rng rng(4);
  double abs_err = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto m = range_scan(scene.state, scene.scenario, "ego", radar, {}, 0.0, rng);
    abs_err += std::abs(m[0].measured_range - 100.0) / 100.0;
  }
  CHECK(abs_err / n * 100.0 == doctest::Approx(4.7).epsilon(0.5 / 4.7));
}

TEST_CASE("fine mode scales the variance by the square of the noise factor") {
  const SensorModel radar = builtin_sensors().at("radar");
  const Scene scene = two_vehicle_scene(150.0, 0.0);
  const auto variance = [&](bool fine, std::uint64_t seed) {
    Rng rng(seed);
    ScanMode mode;
    mode.fine = fine;
    double sum = 0.0, sum2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const auto m = range_scan(scene.state, scene.scenario, "ego", radar, mode, 0.0, rng);
      sum += m[0].measured_range;
      sum2 += m[0].measured_range * m[0].measured_range;
    }
    const double mean = sum / n;
    return sum2 / n - mean * mean;
  };
  const double coarse = variance(false, 5);
  const double fine = variance(true, 6);
  CHECK(fine / coarse == doctest::Approx(0.25).epsilon(0.08));  // factor 0.5 squared
}

TEST_CASE("fine window: static scene selects nothing") {
  SensorModel ideal;
  ideal.max_range = 500.0;
  ideal.fov_deg = 360.0;
  ideal.error_table = {{100.0, 0.0}};
  const Scene scene = two_vehicle_scene(100.0, 0.0);
  Rng rng(7);
  const auto a = range_scan(scene.state, scene.scenario, "ego", ideal, {}, 0.0, rng);
  const auto b = range_scan(scene.state, scene.scenario, "ego", ideal, {}, 0.0, rng);
  CHECK_FALSE(select_fine_window(a, b, 5.0).has_value());
}

TEST_CASE("fine window: one closing target wins; two movers pick the faster") {
  SensorModel ideal;
  ideal.max_range = 500.0;
  ideal.fov_deg = 360.0;
  ideal.error_table = {{100.0, 0.0}};
  Rng rng(8);

  Scene scene = two_vehicle_scene(100.0, 0.0, std::numbers::pi, 18.68);
  const auto before = range_scan(scene.state, scene.scenario, "ego", ideal, {}, 0.0, rng);
  scene.state = world::step(scene.state, scene.scenario);
  const auto after = range_scan(scene.state, scene.scenario, "ego", ideal, {}, 0.0, rng);
  const auto window = select_fine_window(before, after, 5.0);
  REQUIRE(window.has_value());
  CHECK(window->first == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(window->second == doctest::Approx(10.0));
  // oracle: |rate| = 18.68 > 5
  CHECK(std::abs(before[0].measured_range - after[0].measured_range) / 0.05 ==
        doctest::Approx(18.68).epsilon(1e-6));

  // two movers: the faster one (off to the left) wins
  Scene duo;
  duo.scenario.duration_s = 10.0;
  duo.scenario.vehicles.push_back(make_vehicle("ego", Role::kEgo, 0, 0, 0, 0));
  duo.scenario.vehicles.push_back(make_vehicle("slow", Role::kNpc, 100, -20, std::numbers::pi, 6.0));
  duo.scenario.vehicles.push_back(make_vehicle("fast", Role::kNpc, 100, 20, std::numbers::pi, 20.0));
  duo.state = world::initial_state(duo.scenario);
  const auto d0 = range_scan(duo.state, duo.scenario, "ego", ideal, {}, 0.0, rng);
  duo.state = world::step(duo.state, duo.scenario);
  const auto d1 = range_scan(duo.state, duo.scenario, "ego", ideal, {}, 0.0, rng);
  const auto w2 = select_fine_window(d0, d1, 5.0);
  REQUIRE(w2.has_value());
  const double fast_bearing = std::atan2(20.0, 100.0 - 20.0 * 0.05);
  CHECK(w2->first == doctest::Approx(fast_bearing).epsilon(1e-3));
}

TEST_CASE("empty world renders only background and road") {
  Scenario scenario;
  scenario.duration_s = 1.0;
  scenario.vehicles.push_back(make_vehicle("ego", Role::kEgo, 0, 0, 0, 0));
  scenario.lanes.emplace_back(std::vector<Vec2>{{-50, 0}, {200, 0}});
  const WorldState state = world::initial_state(scenario);
  const SemanticGrid grid = render_semantic_grid(state, scenario, "ego");
  int road = 0;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const CellClass c = grid.at(x, y);
      CHECK((c == CellClass::kBackground || c == CellClass::kRoad));
      if (c == CellClass::kRoad) ++road;
    }
  }
  CHECK(road > 1000);  // the lane ahead fills a wedge of the lower half
}

TEST_CASE("a vehicle 20 m dead ahead renders one horizontally centered blob") {
  const Scene scene = two_vehicle_scene(20.0, 0.0);
  const SemanticGrid grid = render_semantic_grid(scene.state, scene.scenario, "ego");
  int x_min = 1 << 20, x_max = -1, y_min = 1 << 20, y_max = -1, count = 0;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      if (grid.at(x, y) == CellClass::kVehicle) {
        x_min = std::min(x_min, x);
        x_max = std::max(x_max, x);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
        ++count;
      }
    }
  }
  REQUIRE(count > 0);
  // blob is contiguous: it fills its bounding box
  CHECK(count == (x_max - x_min + 1) * (y_max - y_min + 1));
  // centered: projection arithmetic puts the center at column width/2
  CHECK(std::abs((x_min + x_max + 1) / 2.0 - 240.0) <= 1.0);
  // oracle: half-width in cells = focal * (width/2) / range
  const double fpx = CameraIntrinsics{}.focal_px();
  const double expected_half_width = fpx * 1.0 / 20.0;
  CHECK((x_max - x_min + 1) / 2.0 == doctest::Approx(expected_half_width).epsilon(0.35));
}

TEST_CASE("a near vehicle fully hides a far pedestrian") {
  Scene scene = two_vehicle_scene(20.0, 0.0);
  scene.scenario.vehicles.push_back(
      make_vehicle("ped", Role::kNpc, 40.0, 0.0, 0.0, 0.0, EntityClass::kPedestrian));
  scene.state = world::initial_state(scene.scenario);
  const SemanticGrid grid = render_semantic_grid(scene.state, scene.scenario, "ego");
  int ped_cells = 0;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      if (grid.at(x, y) == CellClass::kPedestrian) ++ped_cells;
    }
  }
  CHECK(ped_cells == 0);
  REQUIRE(grid.stats.count("ped") == 1);
  CHECK(grid.stats.at("ped").visible_cells == 0);
  CHECK(grid.stats.at("ped").projected_cells > 0);
}

TEST_CASE("detector range gates: 60 m detected at 0.94, 61 m not; cropped reaches 135 m") {
  const auto detectors = builtin_detectors();
  {
    const Scene scene = two_vehicle_scene(61.0, 0.0);
    const SemanticGrid grid = render_semantic_grid(scene.state, scene.scenario, "ego");
    Rng rng(10);
    CHECK(camera_detect(scene.state, "ego", detectors.at("yolov4_pretrained"), grid, rng).empty());
  }
  {
    const Scene scene = two_vehicle_scene(60.0, 0.0);
    const SemanticGrid grid = render_semantic_grid(scene.state, scene.scenario, "ego");
    Rng rng(11);
    const auto d = camera_detect(scene.state, "ego", detectors.at("yolov4_pretrained"), grid, rng);
    REQUIRE(d.size() == 1);
    CHECK(d[0].confidence == doctest::Approx(0.94));
  }
  {
    const Scene scene = two_vehicle_scene(135.0, 0.0);
    const SemanticGrid grid = render_semantic_grid(scene.state, scene.scenario, "ego");
    Rng rng(12);
    CHECK(camera_detect(scene.state, "ego", detectors.at("yolov4_cropped"), grid, rng).size() == 1);
    CHECK(camera_detect(scene.state, "ego", detectors.at("yolov4_retrained"), grid, rng).empty());
  }
}

TEST_CASE("zero jitter reproduces the ground-truth box with IOU 1") {
  const Scene scene = two_vehicle_scene(30.0, 2.0);
  const SemanticGrid grid = render_semantic_grid(scene.state, scene.scenario, "ego");
  DetectorProfile profile{"ideal", 100.0, 1.0, 1.0, 0.0};
  Rng rng(13);
  const auto d = camera_detect(scene.state, "ego", profile, grid, rng);
  REQUIRE(d.size() == 1);
  CHECK(autolabel::iou(d[0].box, grid.stats.at("npc").projected_box) == doctest::Approx(1.0));
}

TEST_CASE("property: no measurement or detection ever exceeds the range gate") {
  Rng rng(14);
  const auto detectors = builtin_detectors();
  const auto sensors_map = builtin_sensors();
  for (int trial = 0; trial < 60; ++trial) {
    Scenario scenario;
    scenario.duration_s = 1.0;
    scenario.vehicles.push_back(make_vehicle("ego", Role::kEgo, 0, 0, 0, 0));
    const int n = rng.uniform_int(1, 6);
    for (int i = 0; i < n; ++i) {
      scenario.vehicles.push_back(make_vehicle(
          "npc" + std::to_string(i), Role::kNpc, rng.uniform(-400, 400), rng.uniform(-400, 400),
          rng.uniform(-3.1, 3.1), rng.uniform(0, 30),
          rng.uniform() < 0.3 ? EntityClass::kPedestrian : EntityClass::kVehicle));
    }
    WorldState state = world::initial_state(scenario);
    const auto truth = world::ground_truth(state, scenario, "ego");
    std::map<std::string, double> range_of;
    for (const auto& gt : truth) range_of[gt.id] = gt.range;

    for (const auto& [name, model] : sensors_map) {
      for (const auto& m :
           range_scan(state, scenario, "ego", model, {}, 0.0, rng)) {
        CHECK(range_of.at(m.target) <= model.max_range);
      }
    }
    const SemanticGrid grid = render_semantic_grid(state, scenario, "ego");
    for (const auto& [name, profile] : detectors) {
      for (const auto& d : camera_detect(state, "ego", profile, grid, rng)) {
        CHECK(range_of.at(d.target) <= profile.r_max);
      }
    }
  }
}

TEST_CASE("profiles document merges over the built-ins") {
  auto detectors = builtin_detectors();
  auto sensors_map = builtin_sensors();
  load_profiles(R"({
    "detectors": {"yolov4_pretrained": {"confidence": 0.5},
                  "custom": {"r_max": 42.0, "confidence": 0.7}},
    "sensors": {"radar": {"fine_noise_factor": 0.25}}
  })",
                detectors, sensors_map);
  CHECK(detectors.at("yolov4_pretrained").confidence == doctest::Approx(0.5));
  CHECK(detectors.at("yolov4_pretrained").r_max == doctest::Approx(60.32));  // untouched
  CHECK(detectors.at("custom").r_max == doctest::Approx(42.0));
  CHECK(sensors_map.at("radar").fine_noise_factor == doctest::Approx(0.25));
  CHECK_THROWS_AS(load_profiles(R"({"sensors": {"radar": {"max_range": -1}}})", detectors,
                                sensors_map),
                  world::ScenarioError);
}

TEST_SUITE_END();
