#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ntg {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2 &) const = default;

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct BBox {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  bool empty() const { return min_x > max_x || min_y > max_y; }
  void extend(Vec2 p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  void extend(const BBox &o) {
    if (o.empty()) return;
    extend(Vec2{o.min_x, o.min_y});
    extend(Vec2{o.max_x, o.max_y});
  }
  BBox expanded(double margin) const {
    return {min_x - margin, min_y - margin, max_x + margin, max_y + margin};
  }
  bool contains(Vec2 p, double tol = 0.0) const {
    return p.x >= min_x - tol && p.x <= max_x + tol && p.y >= min_y - tol &&
           p.y <= max_y + tol;
  }
  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double area() const { return empty() ? 0.0 : width() * height(); }
  bool operator==(const BBox &) const = default;
};

/// Angle of v measured counter-clockwise from +x, in [0, 2pi).
inline double heading(Vec2 v) {
  double a = std::atan2(v.y, v.x);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a -= kTwoPi;
  return a;
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  return a;
}

/// Closest point on segment [a,b] to p, returned as the parameter t in [0,1].
inline double project_param(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = ab.squared_norm();
  if (len2 == 0.0) return 0.0;
  return std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  double t = project_param(p, a, b);
  return distance(p, a + (b - a) * t);
}

namespace detail {
inline int orientation(Vec2 a, Vec2 b, Vec2 c, double eps) {
  double v = (b - a).cross(c - a);
  if (v > eps) return 1;
  if (v < -eps) return -1;
  return 0;
}
inline bool on_segment(Vec2 p, Vec2 a, Vec2 b, double eps) {
  return p.x <= std::max(a.x, b.x) + eps && p.x >= std::min(a.x, b.x) - eps &&
         p.y <= std::max(a.y, b.y) + eps && p.y >= std::min(a.y, b.y) - eps;
}
}  // namespace detail

/// True if closed segments [a,b] and [c,d] share at least one point.
inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d, double eps = 1e-9) {
  int o1 = detail::orientation(a, b, c, eps);
  int o2 = detail::orientation(a, b, d, eps);
  int o3 = detail::orientation(c, d, a, eps);
  int o4 = detail::orientation(c, d, b, eps);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && detail::on_segment(c, a, b, eps)) return true;
  if (o2 == 0 && detail::on_segment(d, a, b, eps)) return true;
  if (o3 == 0 && detail::on_segment(a, c, d, eps)) return true;
  if (o4 == 0 && detail::on_segment(b, c, d, eps)) return true;
  return false;
}

inline double segment_distance(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  if (segments_intersect(a, b, c, d, 0.0)) return 0.0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                   point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

}  // namespace ntg
