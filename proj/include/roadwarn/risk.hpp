#pragma once

#include <optional>
#include <string>
#include <vector>

#include "roadwarn/narsese.hpp"
#include "roadwarn/tracking.hpp"
#include "roadwarn/world.hpp"

namespace roadwarn::app {

struct CrashRecord {
  int cell_x{0};
  int cell_y{0};
  int hour{0};  // 0-23
  std::string crash_type;
  int count{1};
};

/// Crash-history store over 50 m grid cells. The risk prior for a query is
/// min(1, sum of matching counts / saturation) over records within one cell
/// (Chebyshev) and one hour (circular).
class CrashHistory {
 public:
  CrashHistory() = default;

  static CrashHistory load_csv(const std::string& path);
  static CrashHistory from_records(std::vector<CrashRecord> records);

  bool loaded() const { return loaded_; }
  std::size_t size() const { return records_.size(); }

  double query(int cell_x, int cell_y, int hour) const;
  double query_position(const Vec2& position, int hour) const;

  static constexpr double kCellSize = 50.0;
  static constexpr double kSaturation = 20.0;
  static std::pair<int, int> cell_of(const Vec2& position);

 private:
  std::vector<CrashRecord> records_;
  bool loaded_{false};
};

struct Alert {
  double t{0.0};
  std::string kind;
  std::string message;
  std::optional<double> ttc;
  std::vector<std::string> derivation;
  std::string object;  // bound object token, e.g. "obj3", when any
};

struct EncodeParams {
  double approach_ttc_s{5.0};
  double parked_speed_mps{0.1};
  double risk_prior_floor{0.5};
};

/// Builds the present-tense task set for one timestep: per confirmed track a
/// class judgment, an [approaching] mark under the TTC threshold, a bearing
/// quadrant, and [weaving] when latched; ego context ([parked],
/// [at_intersection]); and a location-risk judgment when the crash-history
/// prior is high, with priority scaled by the prior.
std::vector<narsese::Task> encode_events(const std::vector<tracking::Track>& tracks,
                                         const world::VehicleState& ego,
                                         const world::Scenario& scenario, double risk_prior,
                                         double t, const EncodeParams& params = {});

/// Quadrant token for a bearing (rad, left positive): front, left, behind, right.
const char* bearing_quadrant(double bearing);

/// Builds the synthetic ego track used for TTC queries.
tracking::Track ego_track(const world::VehicleState& ego, double t);

}  // namespace roadwarn::app
