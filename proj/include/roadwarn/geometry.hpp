#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace roadwarn {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

/// Normalizes an angle to [-pi, pi).
double wrap_angle(double a);

struct Pose {
  double x{0.0};
  double y{0.0};
  double heading{0.0};

  Vec2 position() const { return {x, y}; }
  Vec2 forward() const { return {std::cos(heading), std::sin(heading)}; }
  Vec2 left() const { return {-std::sin(heading), std::cos(heading)}; }
};

/// Oriented rectangle footprint; `length` runs along `heading`.
struct Obb {
  Vec2 center;
  double heading{0.0};
  double length{0.0};
  double width{0.0};

  std::array<Vec2, 4> corners() const;
};

/// Exact overlap test via the separating-axis theorem.
bool obb_overlap(const Obb& a, const Obb& b);

/// Axis-aligned box in continuous coordinates (grid cells or meters).
struct Box {
  double x_min{0.0};
  double y_min{0.0};
  double x_max{0.0};
  double y_max{0.0};

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
};

/// Piecewise-linear path with arc-length parameterization.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  bool empty() const { return points_.empty(); }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  const std::vector<Vec2>& points() const { return points_; }

  /// Point at arc length s, clamped to [0, length()].
  Vec2 point_at(double s) const;
  /// Direction of the segment containing s (end segment when clamped).
  double heading_at(double s) const;
  /// Arc length of the closest point on the path to p.
  double nearest_s(const Vec2& p) const;
  /// Perpendicular offset of p from the path, positive to the left of travel.
  double signed_lateral(const Vec2& p) const;
  /// Euclidean distance from p to the path.
  double distance(const Vec2& p) const;

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

}  // namespace roadwarn
