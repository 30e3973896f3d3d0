#pragma once

#include <map>
#include <string>
#include <vector>

#include "roadwarn/geometry.hpp"
#include "roadwarn/sensors.hpp"

namespace roadwarn::autolabel {

struct DbscanParams {
  double eps{1.5};   // cells
  int min_pts{3};    // neighborhood count, the point itself included
};

/// Density-based clustering. Returns one label per input point: a cluster
/// index >= 0, or -1 for noise. Cluster membership does not depend on input
/// order (indices may permute).
std::vector<int> dbscan(const std::vector<Vec2>& points, const DbscanParams& params);

struct LabeledBox {
  sensors::CellClass klass{sensors::CellClass::kVehicle};
  Box box;            // grid cells
  int instance{-1};   // index into the grid's instance table, when known
  double range{0.0};  // meters
};

/// Clusters each non-background, non-road class and returns one tight box
/// per cluster; noise cells are dropped.
std::vector<LabeledBox> extract_boxes(const sensors::SemanticGrid& grid,
                                      const DbscanParams& params = {});

struct FilterParams {
  double max_range_m{200.0};
  double min_visibility{0.4};
};

/// Drops boxes at or beyond max_range and boxes whose instance is occluded
/// below the visibility threshold (visible cells / unoccluded projected
/// cells). Boxes without a resolvable instance pass the visibility check.
std::vector<LabeledBox> filter_labels(const std::vector<LabeledBox>& boxes,
                                      const std::map<int, double>& range_by_instance,
                                      const std::map<int, double>& visibility_by_instance,
                                      const FilterParams& params = {});

/// area(a & b) / area(a | b), in [0, 1].
double iou(const Box& a, const Box& b);

struct Manifest {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::size_t total{0};
};

/// Writes one `frames/NNNNNN.labels` file per frame (lines of
/// `class x_min y_min x_max y_max range`) plus `manifest.json` with a
/// deterministic 80/20 split ordered by a hash of the frame index.
Manifest write_dataset(const std::vector<std::vector<LabeledBox>>& frames,
                       const std::string& out_dir);

}  // namespace roadwarn::autolabel
