#include "roadwarn/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace roadwarn {

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

std::array<Vec2, 4> Obb::corners() const {
  const Vec2 fwd{std::cos(heading), std::sin(heading)};
  const Vec2 left{-fwd.y, fwd.x};
  const Vec2 dl = fwd * (0.5 * length);
  const Vec2 dw = left * (0.5 * width);
  return {center + dl + dw, center + dl - dw, center - dl - dw, center - dl + dw};
}

namespace {

// Projects both rectangles on `axis` and checks for a gap.
bool separated_on(const Vec2& axis, const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  double a_min = std::numeric_limits<double>::infinity(), a_max = -a_min;
  double b_min = a_min, b_max = a_max;
  for (const Vec2& p : a) {
    const double v = p.dot(axis);
    a_min = std::min(a_min, v);
    a_max = std::max(a_max, v);
  }
  for (const Vec2& p : b) {
    const double v = p.dot(axis);
    b_min = std::min(b_min, v);
    b_max = std::max(b_max, v);
  }
  return a_max < b_min || b_max < a_min;
}

}  // namespace

bool obb_overlap(const Obb& a, const Obb& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes = {
      Vec2{std::cos(a.heading), std::sin(a.heading)},
      Vec2{-std::sin(a.heading), std::cos(a.heading)},
      Vec2{std::cos(b.heading), std::sin(b.heading)},
      Vec2{-std::sin(b.heading), std::cos(b.heading)},
  };
  for (const Vec2& axis : axes) {
    if (separated_on(axis, ca, cb)) return false;
  }
  return true;
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  cumulative_.reserve(points_.size());
  double s = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i > 0) s += (points_[i] - points_[i - 1]).norm();
    cumulative_.push_back(s);
  }
}

Vec2 Polyline::point_at(double s) const {
  if (points_.empty()) return {};
  if (points_.size() == 1 || s <= 0.0) return points_.front();
  if (s >= length()) return points_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
  const double seg_len = cumulative_[i] - cumulative_[i - 1];
  const double u = seg_len > 0.0 ? (s - cumulative_[i - 1]) / seg_len : 0.0;
  return points_[i - 1] + (points_[i] - points_[i - 1]) * u;
}

double Polyline::heading_at(double s) const {
  if (points_.size() < 2) return 0.0;
  std::size_t i = 1;
  if (s >= length()) {
    i = points_.size() - 1;
  } else if (s > 0.0) {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    i = static_cast<std::size_t>(it - cumulative_.begin());
    i = std::min(i, points_.size() - 1);
  }
  // skip zero-length segments
  std::size_t j = i;
  while (j < points_.size() - 1 && (points_[j] - points_[j - 1]).norm() == 0.0) ++j;
  const Vec2 d = points_[j] - points_[j - 1];
  return std::atan2(d.y, d.x);
}

double Polyline::nearest_s(const Vec2& p) const {
  if (points_.empty()) return 0.0;
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const Vec2 a = points_[i - 1];
    const Vec2 ab = points_[i] - a;
    const double len2 = ab.dot(ab);
    double u = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Vec2 q = a + ab * u;
    const double d2 = (p - q).dot(p - q);
    if (d2 < best_d2) {
      best_d2 = d2;
      best_s = cumulative_[i - 1] + std::sqrt(len2) * u;
    }
  }
  return best_s;
}

double Polyline::signed_lateral(const Vec2& p) const {
  if (points_.size() < 2) return 0.0;
  const double s = nearest_s(p);
  const Vec2 q = point_at(s);
  const double h = heading_at(std::min(s, length() * (1.0 - 1e-12)));
  const Vec2 dir{std::cos(h), std::sin(h)};
  return dir.cross(p - q);
}

double Polyline::distance(const Vec2& p) const {
  if (points_.empty()) return std::numeric_limits<double>::infinity();
  const Vec2 q = point_at(nearest_s(p));
  return (p - q).norm();
}

}  // namespace roadwarn
