#include "roadwarn/runner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

#include "roadwarn/autolabel.hpp"
#include "roadwarn/nars.hpp"

namespace roadwarn::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> read_knowledge_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw world::ScenarioError("cannot open knowledge file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool blank_or_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) continue;
    return line.compare(i, 2, "//") == 0;
  }
  return true;
}

/// Extracts "objN" from the first binding that is a one-atom extensional set.
std::string bound_object(const narsese::Substitution& binding) {
  for (const auto& [var, term] : binding) {
    if (term->type() == narsese::TermType::kExtSet && term->args().size() == 1 &&
        term->args()[0]->type() == narsese::TermType::kAtom) {
      const std::string& name = term->args()[0]->name();
      if (name.rfind("obj", 0) == 0) return name;
    }
  }
  return {};
}

std::string fmt(double v, int precision = 6) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

RunTrace run_scenario(const RunConfig& config) {
  const world::Scenario scenario = world::load_scenario_file(config.scenario_path);

  auto detectors = sensors::builtin_detectors();
  auto sensor_models = sensors::builtin_sensors();
  if (!config.profiles_path.empty()) {
    sensors::load_profiles_file(config.profiles_path, detectors, sensor_models);
  }
  if (!sensor_models.count(config.sensor)) {
    throw world::ScenarioError("unknown sensor '" + config.sensor + "'");
  }
  const sensors::SensorModel sensor_model = sensor_models.at(config.sensor);
  if (!config.detector.empty() && !detectors.count(config.detector)) {
    throw world::ScenarioError("unknown detector '" + config.detector + "'");
  }

  CrashHistory crash_db;
  if (!config.crash_db_path.empty()) crash_db = CrashHistory::load_csv(config.crash_db_path);

  RunTrace trace;
  trace.scenario_name = scenario.name;
  trace.seed = config.seed.value_or(scenario.seed);
  trace.detector = config.detector;
  trace.sensor = config.sensor;
  trace.timestep_s = scenario.timestep_s;

  // engine setup
  nars::EngineParams engine_params;
  engine_params.exec_refractory_cycles = config.cycles_per_step;
  nars::Memory memory(engine_params);
  memory.register_operation("alert");
  const auto knowledge_lines = read_knowledge_lines(config.knowledge_path);
  for (std::size_t i = 0; i < knowledge_lines.size(); ++i) {
    if (blank_or_comment(knowledge_lines[i])) continue;
    narsese::Task task;
    try {
      task = narsese::parse_task(knowledge_lines[i]);
    } catch (const narsese::ParseError& e) {
      throw world::ScenarioError(config.knowledge_path + ":" + std::to_string(i + 1) + ": " +
                                 e.what());
    }
    // register every operation named by the knowledge base
    std::function<void(const narsese::TermPtr&)> scan = [&](const narsese::TermPtr& t) {
      if (t->type() == narsese::TermType::kOperation) memory.register_operation(t->name());
      for (const auto& a : t->args()) scan(a);
    };
    scan(task.term);
    task.trace = {"knowledge: " + narsese::format_task(task)};
    memory.input_task(task);
  }

  // rng streams: the selected pipeline stays identical no matter which extra
  // detectors get logged
  Rng root(trace.seed);
  Rng sensor_rng = root.derive("sensors");
  Rng engine_rng = root.derive("engine");
  std::map<std::string, Rng> detector_rngs;
  for (const auto& [name, profile] : detectors) {
    detector_rngs.emplace(name, root.derive("detector/" + name));
  }

  tracking::TrackStore store(tracking::TrackerParams{}, scenario.lanes);
  const double mount_rad = scenario.sensor_mount_deg * std::numbers::pi / 180.0;

  world::WorldState state = world::initial_state(scenario);
  std::vector<sensors::RangeMeasurement> prev_coarse;
  std::set<std::pair<std::string, std::string>> alerted;
  std::string ego_id;
  for (const auto& v : scenario.vehicles) {
    if (v.role == world::Role::kEgo) ego_id = v.id;
  }

  const std::size_t steps = scenario.step_count();
  for (std::size_t k = 0; k < steps; ++k) {
    state = world::step(state, scenario);
    const double t = state.t;
    const world::VehicleState& ego = *state.find(ego_id);
    const auto truth = world::ground_truth(state, scenario, ego_id);
    std::map<std::string, const world::GroundTruthEntry*> truth_by_id;
    for (const auto& gt : truth) truth_by_id[gt.id] = &gt;

    // coarse scan, then an optional fine pass over the fastest mover
    const auto coarse = sensors::range_scan(state, scenario, ego_id, sensor_model, {}, mount_rad,
                                            sensor_rng);
    auto measurements = coarse;
    std::vector<bool> fine_flags(measurements.size(), false);
    bool fine_active = false;
    const auto window = sensors::select_fine_window(prev_coarse, coarse,
                                                    config.fine_threshold_mps,
                                                    config.fine_window_deg);
    if (window) {
      sensors::ScanMode fine_mode{true, window->first, window->second};
      const auto fine = sensors::range_scan(state, scenario, ego_id, sensor_model, fine_mode,
                                            mount_rad, sensor_rng);
      // fine returns replace their coarse counterparts
      for (const auto& f : fine) {
        fine_active = true;
        bool replaced = false;
        for (std::size_t i = 0; i < measurements.size(); ++i) {
          if (measurements[i].target == f.target) {
            measurements[i] = f;
            fine_flags[i] = true;
            replaced = true;
            break;
          }
        }
        if (!replaced) {
          measurements.push_back(f);
          fine_flags.push_back(true);
        }
      }
    }
    prev_coarse = coarse;

    for (std::size_t i = 0; i < measurements.size(); ++i) {
      const auto& m = measurements[i];
      const auto it = truth_by_id.find(m.target);
      const double true_range = it != truth_by_id.end() ? it->second->range : 0.0;
      trace.measurements.push_back(
          {t, m.target, fine_flags[i], m.measured_range, true_range, m.bearing, m.radial_speed});
    }

    // camera chain
    std::vector<sensors::Detection> selected_detections;
    if (!config.detector.empty()) {
      const sensors::CameraIntrinsics camera;
      const sensors::SemanticGrid grid =
          sensors::render_semantic_grid(state, scenario, ego_id, camera);
      for (const auto& [name, profile] : detectors) {
        if (!config.log_all_detectors && name != config.detector) continue;
        const auto detections =
            sensors::camera_detect(state, ego_id, profile, grid, detector_rngs.at(name));
        for (const auto& d : detections) {
          const auto stats_it = grid.stats.find(d.target);
          DetectionLog log;
          log.t = t;
          log.profile = name;
          log.target = d.target;
          log.confidence = d.confidence;
          log.box = d.box;
          if (stats_it != grid.stats.end()) {
            log.gt_box = stats_it->second.projected_box;
            log.true_range = stats_it->second.range;
            log.iou = autolabel::iou(d.box, log.gt_box);
          }
          trace.detections.push_back(std::move(log));
        }
        if (name == config.detector) selected_detections = detections;
      }
    }

    store.step(t, measurements, ego.pose, sensor_model, fine_active);
    if (!selected_detections.empty()) {
      store.classify(selected_detections, ego.pose, sensors::CameraIntrinsics{});
    }
    const auto newly_weaving = store.update_weaving(config.weaving_window_s);
    for (const int id : newly_weaving) {
      const tracking::Track* tr = store.find(id);
      const auto it = tr ? truth_by_id.find(tr->source_id) : truth_by_id.end();
      trace.weaving_events.push_back({t, id, tr ? tr->source_id : "",
                                      tr ? tr->weaving_range : 0.0,
                                      it != truth_by_id.end() ? it->second->range : 0.0});
    }

    for (const tracking::Track& tr : store.tracks()) {
      trace.track_rows.push_back({t, tr.id, tr.position.x, tr.position.y, tr.velocity.x,
                                  tr.velocity.y, tracking::track_status_name(tr.status),
                                  tr.lateral_history.empty() ? 0.0
                                                             : tr.lateral_history.back().second,
                                  tr.weaving_latched});
    }

    // reasoning
    const double prior =
        crash_db.loaded() ? crash_db.query_position(ego.pose.position(), scenario.hour_of_day)
                          : 0.0;
    const auto events = encode_events(store.tracks(), ego, scenario, prior, t);
    memory.set_now(t);
    for (const auto& ev : events) {
      trace.narsese_log.push_back("t=" + fmt(t, 2) + " " + narsese::format_task(ev));
      memory.input_task(ev);
    }
    const tracking::Track self = ego_track(ego, t);
    for (int c = 0; c < config.cycles_per_step; ++c) {
      const nars::CycleOutput out = memory.cycle(engine_rng);
      for (const nars::Execution& exec : out.executions) {
        if (exec.op_name != "alert") continue;
        Alert alert;
        alert.t = t;
        alert.kind = exec.kind.empty() ? "collision_risk" : exec.kind;
        alert.object = bound_object(exec.binding);
        if (!alerted.insert({alert.kind, alert.object}).second) continue;
        if (!alert.object.empty()) {
          const int track_id = std::atoi(alert.object.c_str() + 3);
          const tracking::Track* tr = store.find(track_id);
          if (tr != nullptr) {
            // time to contact at the measured closing rate when available
            if (tr->radial_speed > 0.1) {
              alert.ttc = tr->range_m / tr->radial_speed;
            } else {
              alert.ttc = tracking::time_to_collision(self, *tr);
            }
          }
        }
        alert.message = alert.kind + (alert.object.empty() ? "" : ": " + alert.object);
        if (alert.ttc) alert.message += " (time to contact " + fmt(*alert.ttc, 1) + " s)";
        alert.derivation = exec.trace;
        trace.alerts.push_back(std::move(alert));
      }
    }
  }

  trace.collisions = state.collisions;
  trace.derivation_log = memory.trace_log();

  world::RunSummary summary;
  summary.collisions = trace.collisions;
  for (const Alert& a : trace.alerts) summary.alerts.push_back({a.t, a.kind, a.ttc});
  trace.verdict = world::check_pass_fail(summary, scenario);

  if (!config.out_dir.empty()) write_trace(trace, config.out_dir);
  return trace;
}

// ---------------------------------------------------------------------------
// Metrics

Metrics compute_metrics(const RunTrace& trace) {
  Metrics m;
  for (const auto& d : trace.detections) {
    auto it = m.first_detection.find(d.profile);
    if (it == m.first_detection.end() || d.t < it->second.t) {
      m.first_detection[d.profile] = {d.t, d.true_range};
    }
    m.iou_mean[d.profile] += d.iou;
    m.iou_count[d.profile] += 1;
  }
  for (auto& [profile, sum] : m.iou_mean) sum /= std::max(1, m.iou_count[profile]);

  std::map<double, std::pair<double, int>> buckets;
  for (const auto& r : trace.measurements) {
    auto it = m.first_measurement.find(r.target);
    if (it == m.first_measurement.end() || r.t < it->second.t) {
      m.first_measurement[r.target] = {r.t, r.true_range};
    }
    if (r.true_range > 1e-6) {
      const double bucket = std::floor(r.true_range / 50.0) * 50.0;
      auto& [sum, count] = buckets[bucket];
      sum += std::abs(r.measured_range - r.true_range) / r.true_range * 100.0;
      count += 1;
    }
  }
  auto& rows = m.sensor_mape[trace.sensor.empty() ? "sensor" : trace.sensor];
  for (const auto& [bucket, agg] : buckets) {
    rows.push_back({bucket, agg.first / std::max(1, agg.second), agg.second});
  }

  const std::optional<double> first_collision =
      trace.collisions.empty() ? std::nullopt
                               : std::optional<double>(trace.collisions.front().t);
  for (const Alert& a : trace.alerts) {
    AlertLead lead;
    lead.kind = a.kind;
    lead.t = a.t;
    if (first_collision && a.t < *first_collision) {
      lead.lead_s = *first_collision - a.t;
    } else if (a.ttc) {
      lead.lead_s = a.ttc;
    }
    m.alert_leads.push_back(std::move(lead));
  }

  for (const auto& w : trace.weaving_events) {
    if (!m.weaving_first.count(w.track_id)) m.weaving_first[w.track_id] = w;
  }
  m.collision_count = trace.collisions.size();
  m.verdict = trace.verdict.pass ? "pass" : "fail: " + trace.verdict.reason;
  return m;
}

std::string metrics_to_json(const Metrics& m) {
  json j;
  for (const auto& [profile, fd] : m.first_detection) {
    j["first_detection"][profile] = {{"t", fd.t}, {"range_m", fd.range}};
  }
  for (const auto& [target, fd] : m.first_measurement) {
    j["first_measurement"][target] = {{"t", fd.t}, {"range_m", fd.range}};
  }
  for (const auto& [sensor, rows] : m.sensor_mape) {
    json arr = json::array();
    for (const auto& row : rows) {
      arr.push_back({{"bucket_m", row.bucket_m}, {"mape_pct", row.mape}, {"count", row.count}});
    }
    j["sensor_mape"][sensor] = arr;
  }
  for (const auto& [profile, mean] : m.iou_mean) {
    j["iou"][profile] = {{"mean", mean}, {"count", m.iou_count.at(profile)}};
  }
  j["alerts"] = json::array();
  for (const auto& lead : m.alert_leads) {
    json a = {{"kind", lead.kind}, {"t", lead.t}};
    if (lead.lead_s) a["lead_s"] = *lead.lead_s;
    j["alerts"].push_back(a);
  }
  for (const auto& [track, w] : m.weaving_first) {
    j["weaving"][std::to_string(track)] = {{"t", w.t},
                                           {"target", w.target},
                                           {"est_range_m", w.est_range},
                                           {"true_range_m", w.true_range}};
  }
  j["collisions"] = m.collision_count;
  j["verdict"] = m.verdict;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Trace files

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw world::ScenarioError("cannot write " + path.string());
  out << content;
}

}  // namespace

void write_trace(const RunTrace& trace, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw world::ScenarioError("cannot create output directory " + out_dir + ": " +
                                     ec.message());
  const fs::path dir(out_dir);

  {
    std::string s = "t,target,fine,measured_range,true_range,bearing,radial_speed\n";
    for (const auto& r : trace.measurements) {
      s += fmt(r.t, 2) + "," + r.target + "," + (r.fine ? "1" : "0") + "," +
           fmt(r.measured_range, 3) + "," + fmt(r.true_range, 3) + "," + fmt(r.bearing, 6) + "," +
           fmt(r.radial_speed, 3) + "\n";
    }
    write_file(dir / "measurements.csv", s);
  }
  {
    std::string s =
        "t,profile,target,confidence,x_min,y_min,x_max,y_max,gt_x_min,gt_y_min,gt_x_max,gt_y_max,"
        "iou,true_range\n";
    for (const auto& d : trace.detections) {
      s += fmt(d.t, 2) + "," + d.profile + "," + d.target + "," + fmt(d.confidence, 2) + "," +
           fmt(d.box.x_min, 2) + "," + fmt(d.box.y_min, 2) + "," + fmt(d.box.x_max, 2) + "," +
           fmt(d.box.y_max, 2) + "," + fmt(d.gt_box.x_min, 2) + "," + fmt(d.gt_box.y_min, 2) +
           "," + fmt(d.gt_box.x_max, 2) + "," + fmt(d.gt_box.y_max, 2) + "," + fmt(d.iou, 4) +
           "," + fmt(d.true_range, 3) + "\n";
    }
    write_file(dir / "detections.csv", s);
  }
  {
    std::string s = "t,id,x,y,vx,vy,status,lateral,weaving\n";
    for (const auto& r : trace.track_rows) {
      s += fmt(r.t, 2) + "," + std::to_string(r.id) + "," + fmt(r.x, 3) + "," + fmt(r.y, 3) +
           "," + fmt(r.vx, 3) + "," + fmt(r.vy, 3) + "," + r.status + "," + fmt(r.lateral, 3) +
           "," + (r.weaving ? "1" : "0") + "\n";
    }
    write_file(dir / "tracks.csv", s);
  }
  {
    std::string s = "t,track,target,est_range,true_range\n";
    for (const auto& w : trace.weaving_events) {
      s += fmt(w.t, 2) + "," + std::to_string(w.track_id) + "," + w.target + "," +
           fmt(w.est_range, 3) + "," + fmt(w.true_range, 3) + "\n";
    }
    write_file(dir / "weaving.csv", s);
  }
  {
    std::string s;
    for (const Alert& a : trace.alerts) {
      json j;
      j["t"] = a.t;
      j["kind"] = a.kind;
      j["message"] = a.message;
      if (!a.object.empty()) j["object"] = a.object;
      if (a.ttc) j["ttc_s"] = *a.ttc;
      j["derivation"] = a.derivation;
      s += j.dump() + "\n";
    }
    write_file(dir / "alerts.jsonl", s);
  }
  {
    std::string s;
    for (const auto& c : trace.collisions) {
      s += fmt(c.t, 2) + "," + c.id_a + "," + c.id_b + "\n";
    }
    write_file(dir / "collisions.csv", "t,id_a,id_b\n" + s);
  }
  {
    std::string s;
    for (const auto& line : trace.narsese_log) s += line + "\n";
    write_file(dir / "narsese.log", s);
  }
  {
    std::string s;
    for (const auto& line : trace.derivation_log) s += line + "\n";
    write_file(dir / "derivations.log", s);
  }
  write_file(dir / "verdict.txt",
             trace.verdict.pass ? "pass\n" : "fail: " + trace.verdict.reason + "\n");
  {
    json j;
    j["scenario"] = trace.scenario_name;
    j["seed"] = trace.seed;
    j["detector"] = trace.detector;
    j["sensor"] = trace.sensor;
    j["timestep_s"] = trace.timestep_s;
    write_file(dir / "run.json", j.dump(2) + "\n");
  }
  write_file(dir / "metrics.json", metrics_to_json(compute_metrics(trace)) + "\n");
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

RunTrace read_trace(const std::string& dir) {
  RunTrace trace;
  const fs::path base(dir);

  const auto each_row = [](const fs::path& path, auto&& fn) {
    std::ifstream in(path);
    if (!in) throw world::ScenarioError("cannot open " + path.string());
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (!line.empty()) fn(split_csv(line));
    }
  };

  each_row(base / "measurements.csv", [&](const std::vector<std::string>& f) {
    trace.measurements.push_back({std::stod(f[0]), f[1], f[2] == "1", std::stod(f[3]),
                                  std::stod(f[4]), std::stod(f[5]), std::stod(f[6])});
  });
  each_row(base / "detections.csv", [&](const std::vector<std::string>& f) {
    DetectionLog d;
    d.t = std::stod(f[0]);
    d.profile = f[1];
    d.target = f[2];
    d.confidence = std::stod(f[3]);
    d.box = {std::stod(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
    d.gt_box = {std::stod(f[8]), std::stod(f[9]), std::stod(f[10]), std::stod(f[11])};
    d.iou = std::stod(f[12]);
    d.true_range = std::stod(f[13]);
    trace.detections.push_back(std::move(d));
  });
  each_row(base / "weaving.csv", [&](const std::vector<std::string>& f) {
    trace.weaving_events.push_back(
        {std::stod(f[0]), std::stoi(f[1]), f[2], std::stod(f[3]), std::stod(f[4])});
  });
  each_row(base / "collisions.csv", [&](const std::vector<std::string>& f) {
    trace.collisions.push_back({std::stod(f[0]), f[1], f[2]});
  });
  {
    std::ifstream in(base / "alerts.jsonl");
    if (in) {
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        Alert a;
        a.t = j.at("t").get<double>();
        a.kind = j.at("kind").get<std::string>();
        a.message = j.value("message", "");
        if (j.contains("ttc_s")) a.ttc = j["ttc_s"].get<double>();
        if (j.contains("object")) a.object = j["object"].get<std::string>();
        for (const auto& l : j.value("derivation", json::array())) {
          a.derivation.push_back(l.get<std::string>());
        }
        trace.alerts.push_back(std::move(a));
      }
    }
  }
  {
    std::ifstream in(base / "run.json");
    if (in) {
      json j;
      in >> j;
      trace.scenario_name = j.value("scenario", "");
      trace.seed = j.value("seed", 0ull);
      trace.detector = j.value("detector", "");
      trace.sensor = j.value("sensor", "");
      trace.timestep_s = j.value("timestep_s", 0.05);
    }
  }
  {
    std::ifstream in(base / "verdict.txt");
    std::string line;
    if (in && std::getline(in, line)) {
      trace.verdict.pass = line.rfind("pass", 0) == 0;
      trace.verdict.reason = trace.verdict.pass ? "ok" : line;
    }
  }
  return trace;
}

double calibrate_jitter(double target_iou, std::uint64_t seed, int frames) {
  Rng rng(seed);
  const auto mean_iou = [&](double jitter) {
    Rng local = rng.derive("calibrate/" + fmt(jitter, 6));
    double sum = 0.0;
    const Box gt{100.0, 80.0, 180.0, 130.0};  // shape does not matter; IOU is scale-free
    for (int i = 0; i < frames; ++i) {
      Box b = gt;
      b.x_min += jitter * gt.width() * local.uniform(-1.0, 1.0);
      b.x_max += jitter * gt.width() * local.uniform(-1.0, 1.0);
      b.y_min += jitter * gt.height() * local.uniform(-1.0, 1.0);
      b.y_max += jitter * gt.height() * local.uniform(-1.0, 1.0);
      sum += autolabel::iou(gt, b);
    }
    return sum / frames;
  };
  double lo = 0.0, hi = 1.5;
  for (int iter = 0; iter < 40; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mean_iou(mid) > target_iou) {
      lo = mid;  // more jitter lowers the IOU
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace roadwarn::app
