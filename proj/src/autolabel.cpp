#include "roadwarn/autolabel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "json.hpp"

namespace roadwarn::autolabel {

namespace fs = std::filesystem;
using sensors::CellClass;
using sensors::SemanticGrid;

std::vector<int> dbscan(const std::vector<Vec2>& points, const DbscanParams& params) {
  const std::size_t n = points.size();
  std::vector<int> labels(n, -1);
  if (n == 0) return labels;

  // bucket grid with cell size eps for neighbor queries
  const double inv_eps = 1.0 / params.eps;
  const auto bucket_of = [&](const Vec2& p) {
    return std::pair<std::int64_t, std::int64_t>{
        static_cast<std::int64_t>(std::floor(p.x * inv_eps)),
        static_cast<std::int64_t>(std::floor(p.y * inv_eps))};
  };
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> buckets;
  const auto key_of = [](std::int64_t bx, std::int64_t by) {
    return (bx << 32) ^ (by & 0xffffffffll);
  };
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto [bx, by] = bucket_of(points[i]);
    buckets[key_of(bx, by)].push_back(i);
  }

  const double eps2 = params.eps * params.eps;
  std::vector<std::uint32_t> neighbors;
  const auto query = [&](std::uint32_t i) {
    neighbors.clear();
    const auto [bx, by] = bucket_of(points[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = buckets.find(key_of(bx + dx, by + dy));
        if (it == buckets.end()) continue;
        for (const std::uint32_t j : it->second) {
          const Vec2 d = points[j] - points[i];
          if (d.dot(d) <= eps2) neighbors.push_back(j);  // includes i itself
        }
      }
    }
  };

  std::vector<bool> is_core(n, false);
  for (std::uint32_t i = 0; i < n; ++i) {
    query(i);
    is_core[i] = static_cast<int>(neighbors.size()) >= params.min_pts;
  }

  int next_cluster = 0;
  std::deque<std::uint32_t> frontier;
  for (std::uint32_t seed = 0; seed < n; ++seed) {
    if (!is_core[seed] || labels[seed] != -1) continue;
    const int cluster = next_cluster++;
    labels[seed] = cluster;
    frontier.push_back(seed);
    while (!frontier.empty()) {
      const std::uint32_t p = frontier.front();
      frontier.pop_front();
      if (!is_core[p]) continue;  // border points don't expand
      query(p);
      for (const std::uint32_t q : neighbors) {
        if (labels[q] == -1) {
          labels[q] = cluster;
          if (is_core[q]) frontier.push_back(q);
        }
      }
    }
  }
  return labels;
}

std::vector<LabeledBox> extract_boxes(const SemanticGrid& grid, const DbscanParams& params) {
  std::vector<LabeledBox> out;
  const CellClass targets[] = {CellClass::kVehicle, CellClass::kPedestrian,
                               CellClass::kTrafficLight, CellClass::kTrafficSign};
  for (const CellClass klass : targets) {
    std::vector<Vec2> cells;
    std::vector<std::size_t> flat_index;
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        if (grid.at(x, y) == klass) {
          cells.push_back({static_cast<double>(x), static_cast<double>(y)});
          flat_index.push_back(static_cast<std::size_t>(y) * grid.width + x);
        }
      }
    }
    if (cells.empty()) continue;
    const std::vector<int> labels = dbscan(cells, params);
    const int clusters = *std::max_element(labels.begin(), labels.end()) + 1;
    if (clusters <= 0) continue;

    struct Acc {
      double x_min = std::numeric_limits<double>::infinity();
      double y_min = std::numeric_limits<double>::infinity();
      double x_max = -std::numeric_limits<double>::infinity();
      double y_max = -std::numeric_limits<double>::infinity();
      double depth_sum = 0.0;
      int count = 0;
      std::map<int, int> instance_votes;
    };
    std::vector<Acc> acc(static_cast<std::size_t>(clusters));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (labels[i] < 0) continue;
      Acc& a = acc[static_cast<std::size_t>(labels[i])];
      a.x_min = std::min(a.x_min, cells[i].x);
      a.y_min = std::min(a.y_min, cells[i].y);
      a.x_max = std::max(a.x_max, cells[i].x + 1.0);
      a.y_max = std::max(a.y_max, cells[i].y + 1.0);
      const float d = grid.depth[flat_index[i]];
      if (std::isfinite(d)) a.depth_sum += d;
      ++a.count;
      const std::int32_t inst = grid.instance[flat_index[i]];
      if (inst >= 0) ++a.instance_votes[inst];
    }
    for (const Acc& a : acc) {
      if (a.count == 0) continue;
      LabeledBox b;
      b.klass = klass;
      b.box = {a.x_min, a.y_min, a.x_max, a.y_max};
      b.range = a.depth_sum / a.count;
      int best_votes = 0;
      for (const auto& [inst, votes] : a.instance_votes) {
        if (votes > best_votes) {
          best_votes = votes;
          b.instance = inst;
        }
      }
      out.push_back(b);
    }
  }
  return out;
}

std::vector<LabeledBox> filter_labels(const std::vector<LabeledBox>& boxes,
                                      const std::map<int, double>& range_by_instance,
                                      const std::map<int, double>& visibility_by_instance,
                                      const FilterParams& params) {
  std::vector<LabeledBox> out;
  for (const LabeledBox& b : boxes) {
    double range = b.range;
    if (b.instance >= 0) {
      const auto it = range_by_instance.find(b.instance);
      if (it != range_by_instance.end()) range = it->second;
    }
    if (range >= params.max_range_m) continue;
    if (b.instance >= 0) {
      const auto it = visibility_by_instance.find(b.instance);
      if (it != visibility_by_instance.end() && it->second < params.min_visibility) continue;
    }
    out.push_back(b);
  }
  return out;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

Manifest write_dataset(const std::vector<std::vector<LabeledBox>>& frames,
                       const std::string& out_dir) {
  std::error_code ec;
  const fs::path frames_dir = fs::path(out_dir) / "frames";
  fs::create_directories(frames_dir, ec);
  if (ec) throw std::runtime_error("cannot create dataset directory " + frames_dir.string() +
                                   ": " + ec.message());

  Manifest manifest;
  manifest.total = frames.size();
  std::vector<std::string> names(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.labels", i);
    names[i] = name;
    const fs::path path = frames_dir / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write label file " + path.string());
    for (const LabeledBox& b : frames[i]) {
      char line[160];
      std::snprintf(line, sizeof(line), "%s %.1f %.1f %.1f %.1f %.2f\n",
                    sensors::cell_class_name(b.klass), b.box.x_min, b.box.y_min, b.box.x_max,
                    b.box.y_max, b.range);
      out << line;
    }
    if (!out.good()) throw std::runtime_error("write failure on " + path.string());
  }

  // deterministic 80/20 split: order frames by hashed index, first 80% train
  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [](std::size_t a, std::size_t b) {
    const std::uint64_t ha = splitmix64(a), hb = splitmix64(b);
    return ha != hb ? ha < hb : a < b;
  });
  const std::size_t train_count = frames.size() * 4 / 5;
  std::vector<bool> in_train(frames.size(), false);
  for (std::size_t k = 0; k < train_count; ++k) in_train[order[k]] = true;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    (in_train[i] ? manifest.train : manifest.test).push_back(names[i]);
  }

  nlohmann::json j;
  j["counts"] = {{"train", manifest.train.size()},
                 {"test", manifest.test.size()},
                 {"total", manifest.total}};
  j["train"] = manifest.train;
  j["test"] = manifest.test;
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  std::ofstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot write manifest " + manifest_path.string());
  mf << j.dump(2) << "\n";
  return manifest;
}

}  // namespace roadwarn::autolabel
