#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roadwarn/geometry.hpp"
#include "roadwarn/rng.hpp"
#include "roadwarn/world.hpp"

namespace roadwarn::sensors {

enum class SensorKind { kRadar, kLidar, kDepth };

/// Parametric range sensor. The error table holds (range m, mean absolute
/// percentage error %) anchors; between anchors the error interpolates
/// linearly and clamps at the ends. Relative errors are zero-mean Gaussian,
/// so sigma = (mape/100) * sqrt(pi/2).
struct SensorModel {
  SensorKind kind{SensorKind::kRadar};
  double max_range{321.0};
  double fov_deg{45.0};
  std::vector<std::pair<double, double>> error_table;
  double fine_noise_factor{0.5};

  /// Relative (unitless) sigma at a given true range.
  double sigma_at(double range) const;
  double mape_at(double range) const;
};

struct RangeMeasurement {
  std::string target;  // for evaluation only
  double measured_range{0.0};
  double bearing{0.0};       // rad, relative to vehicle heading, left positive
  double radial_speed{0.0};  // m/s, positive when approaching
  double t{0.0};
};

struct ScanMode {
  bool fine{false};
  double center_bearing{0.0};  // rad, vehicle frame
  double window_deg{10.0};
};

/// Simulates one scan. Targets beyond max_range or outside the angular gate
/// (full FOV around the mount in coarse mode, the window in fine mode) are
/// absent. Fine mode scales the range noise by fine_noise_factor.
std::vector<RangeMeasurement> range_scan(const world::WorldState& state,
                                         const world::Scenario& scenario,
                                         const std::string& observer, const SensorModel& model,
                                         const ScanMode& mode, double mount_rad, Rng& rng);

/// Picks a fine-scan window from two successive coarse scans: returns the
/// bearing of the fastest-changing matched return when its absolute range
/// rate exceeds the threshold.
std::optional<std::pair<double, double>> select_fine_window(
    const std::vector<RangeMeasurement>& prev, const std::vector<RangeMeasurement>& cur,
    double threshold_mps, double window_deg = 10.0, double bearing_gate_rad = 0.05);

// ---------------------------------------------------------------------------
// Semantic grid camera

enum class CellClass : std::uint8_t {
  kBackground = 0,
  kRoad,
  kVehicle,
  kPedestrian,
  kTrafficLight,
  kTrafficSign,
};

const char* cell_class_name(CellClass c);

struct CameraIntrinsics {
  int width{480};
  int height{270};
  double hfov_deg{90.0};
  double mount_height_m{1.0};  // below vehicle-top height, so near traffic can occlude
  double near_m{0.5};

  double focal_px() const;
};

struct InstanceStats {
  CellClass klass{CellClass::kBackground};
  Box projected_box;        // image-plane box, clipped to the grid
  int projected_cells{0};   // cells the box covers before occlusion
  int visible_cells{0};     // cells surviving the depth test
  double range{0.0};        // true distance to the entity center
};

struct SemanticGrid {
  int width{0};
  int height{0};
  std::vector<CellClass> cells;
  std::vector<float> depth;       // meters; +inf for sky
  std::vector<std::int32_t> instance;  // index into instance_ids, -1 for none
  std::vector<std::string> instance_ids;
  std::map<std::string, InstanceStats> stats;  // keyed by entity id

  CellClass at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
  std::int32_t instance_at(int x, int y) const {
    return instance[static_cast<std::size_t>(y) * width + x];
  }
};

/// Renders the scene into a semantic grid: road lanes on the ground plane,
/// then entity boxes (vehicles, pedestrians, lights, signs) extruded to a
/// per-class height and depth-buffered.
SemanticGrid render_semantic_grid(const world::WorldState& state,
                                  const world::Scenario& scenario, const std::string& observer,
                                  const CameraIntrinsics& camera = {});

// ---------------------------------------------------------------------------
// Detector emulation

struct DetectorProfile {
  std::string name;
  double r_max{60.32};
  double confidence{0.94};
  double iou_target{0.31};
  double jitter_frac{0.0};  // per-edge offset scale, fraction of box size
};

struct Detection {
  CellClass klass{CellClass::kVehicle};
  Box box;  // grid cells, continuous
  double confidence{0.0};
  double t{0.0};
  std::string target;  // for evaluation only
};

/// Emits one detection per entity that is within r_max and has at least one
/// visible cell. The box is the ground-truth projected box with independent
/// per-edge offsets of scale jitter_frac * box size.
std::vector<Detection> camera_detect(const world::WorldState& state, const std::string& observer,
                                     const DetectorProfile& profile, const SemanticGrid& grid,
                                     Rng& rng);

// ---------------------------------------------------------------------------
// Built-in profiles

/// Detector profiles with the measured range/confidence/IOU behavior of the
/// emulated networks; jitter fractions are calibrated offline against the
/// IOU targets.
std::map<std::string, DetectorProfile> builtin_detectors();

/// radar / lidar / depth models with their measured error tables.
std::map<std::string, SensorModel> builtin_sensors();

/// Loads profile overrides from a JSON document {"detectors": {...}, "sensors": {...}};
/// entries merge over the built-ins.
void load_profiles(const std::string& json_text, std::map<std::string, DetectorProfile>& detectors,
                   std::map<std::string, SensorModel>& sensors);
void load_profiles_file(const std::string& path, std::map<std::string, DetectorProfile>& detectors,
                        std::map<std::string, SensorModel>& sensors);

}  // namespace roadwarn::sensors
