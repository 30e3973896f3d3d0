#include "roadwarn/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace roadwarn::app {

using narsese::Punctuation;
using narsese::Task;
using narsese::Tense;
using narsese::Term;
using narsese::TermPtr;
using narsese::TruthValue;

std::pair<int, int> CrashHistory::cell_of(const Vec2& position) {
  return {static_cast<int>(std::floor(position.x / kCellSize)),
          static_cast<int>(std::floor(position.y / kCellSize))};
}

CrashHistory CrashHistory::from_records(std::vector<CrashRecord> records) {
  CrashHistory h;
  h.records_ = std::move(records);
  h.loaded_ = true;
  return h;
}

CrashHistory CrashHistory::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw world::ScenarioError("cannot open crash database: " + path);
  std::vector<CrashRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) continue;  // header: cell_x,cell_y,hour,crash_type,count
    std::stringstream ss(line);
    std::string field;
    CrashRecord r;
    try {
      std::getline(ss, field, ',');
      r.cell_x = std::stoi(field);
      std::getline(ss, field, ',');
      r.cell_y = std::stoi(field);
      std::getline(ss, field, ',');
      r.hour = std::stoi(field);
      std::getline(ss, r.crash_type, ',');
      std::getline(ss, field, ',');
      r.count = std::stoi(field);
    } catch (const std::exception&) {
      throw world::ScenarioError(path + ":" + std::to_string(line_no) + ": malformed crash record");
    }
    if (r.count < 1) {
      throw world::ScenarioError(path + ":" + std::to_string(line_no) + ": count must be >= 1");
    }
    if (r.hour < 0 || r.hour > 23) {
      throw world::ScenarioError(path + ":" + std::to_string(line_no) + ": hour must be 0-23");
    }
    records.push_back(std::move(r));
  }
  return from_records(std::move(records));
}

double CrashHistory::query(int cell_x, int cell_y, int hour) const {
  if (!loaded_) throw world::ScenarioError("crash history not loaded");
  double total = 0.0;
  for (const CrashRecord& r : records_) {
    if (std::abs(r.cell_x - cell_x) > 1 || std::abs(r.cell_y - cell_y) > 1) continue;
    const int dh = std::abs(r.hour - hour);
    if (std::min(dh, 24 - dh) > 1) continue;
    total += r.count;
  }
  return std::min(1.0, total / kSaturation);
}

double CrashHistory::query_position(const Vec2& position, int hour) const {
  const auto [cx, cy] = cell_of(position);
  return query(cx, cy, hour);
}

const char* bearing_quadrant(double bearing) {
  constexpr double kQuarter = std::numbers::pi / 4.0;
  if (std::abs(bearing) <= kQuarter) return "front";
  if (std::abs(bearing) >= 3.0 * kQuarter) return "behind";
  return bearing > 0.0 ? "left" : "right";
}

tracking::Track ego_track(const world::VehicleState& ego, double t) {
  tracking::Track tr;
  tr.id = 0;
  tr.position = ego.pose.position();
  tr.velocity = ego.velocity();
  tr.last_update = t;
  tr.status = tracking::TrackStatus::kConfirmed;
  return tr;
}

namespace {

Task present_event(TermPtr term, double t, TruthValue truth, double priority,
                   std::string note) {
  Task task;
  task.term = std::move(term);
  task.punctuation = Punctuation::kJudgment;
  task.tense = Tense::kPresent;
  task.occurrence = t;
  task.truth = truth;
  task.budget.priority = priority;
  char head[48];
  std::snprintf(head, sizeof(head), "t=%.2f input ", t);
  task.trace = {head + narsese::format_task(task) + (note.empty() ? "" : " (" + note + ")")};
  return task;
}

TermPtr obj_term(int track_id) {
  return Term::ext_set({Term::atom("obj" + std::to_string(track_id))});
}

TermPtr property(const char* name) { return Term::int_set({Term::atom(name)}); }

}  // namespace

std::vector<Task> encode_events(const std::vector<tracking::Track>& tracks,
                                const world::VehicleState& ego, const world::Scenario& scenario,
                                double risk_prior, double t, const EncodeParams& params) {
  std::vector<Task> out;
  const TruthValue default_truth{1.0, 0.9};
  const tracking::Track self = ego_track(ego, t);

  for (const tracking::Track& tr : tracks) {
    if (tr.status != tracking::TrackStatus::kConfirmed) continue;
    const TermPtr obj = obj_term(tr.id);
    char note[64];
    std::snprintf(note, sizeof(note), "track obj%d, range %.1f m", tr.id, tr.range_m);

    if (!tr.klass.empty()) {
      out.push_back(present_event(
          Term::statement(obj, narsese::Copula::kInheritance, Term::atom(tr.klass)), t,
          default_truth, 0.8, note));
    }
    // both the track-kinematics TTC and the measured closing rate must agree;
    // the alpha-beta velocity alone is too noisy at long radar ranges
    const auto ttc = tracking::time_to_collision(self, tr);
    const bool doppler_closing =
        tr.radial_speed > 0.1 && tr.range_m / tr.radial_speed < params.approach_ttc_s;
    if (ttc && *ttc < params.approach_ttc_s && doppler_closing) {
      out.push_back(present_event(
          Term::statement(obj, narsese::Copula::kInheritance, property("approaching")), t,
          default_truth, 0.8, note));
    }
    const Vec2 rel = tr.position - ego.pose.position();
    const double bearing = wrap_angle(std::atan2(rel.y, rel.x) - ego.pose.heading);
    out.push_back(present_event(
        Term::statement(obj, narsese::Copula::kInheritance, property(bearing_quadrant(bearing))),
        t, default_truth, 0.8, note));
    if (tr.weaving_latched) {
      out.push_back(present_event(
          Term::statement(obj, narsese::Copula::kInheritance, property("weaving")), t,
          default_truth, 0.8, note));
    }
  }

  const TermPtr self_term = Term::ext_set({Term::atom("SELF")});
  if (ego.speed < params.parked_speed_mps) {
    out.push_back(present_event(
        Term::statement(self_term, narsese::Copula::kInheritance, property("parked")), t,
        default_truth, 0.8, "ego"));
  }
  for (const world::RectRegion& region : scenario.intersections) {
    if (region.contains(ego.pose.position())) {
      out.push_back(present_event(
          Term::statement(self_term, narsese::Copula::kInheritance, property("at_intersection")),
          t, default_truth, 0.8, "ego"));
      break;
    }
  }

  if (risk_prior >= params.risk_prior_floor) {
    const double priority = 0.5 + 0.5 * risk_prior;
    char note[64];
    std::snprintf(note, sizeof(note), "crash history prior %.2f", risk_prior);
    out.push_back(present_event(
        Term::statement(Term::ext_set({Term::atom("HERE")}), narsese::Copula::kInheritance,
                        property("high_risk_location")),
        t, TruthValue{risk_prior, 0.9}, priority, note));
  }
  return out;
}

}  // namespace roadwarn::app
