#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>

namespace crossroads::geometry {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
};

// Heading psi is CCW from the +x axis, kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;

  Vec2 position() const { return {x, y}; }
  Vec2 heading() const { return {std::cos(psi), std::sin(psi)}; }
};

double normalize_angle(double a);

// Vehicle body plus safety redundancy. The occupied road region is a
// rectangle of (l_car + d_lon) x (w_car + d_lat) centered half a wheelbase
// ahead of the rear-axle reference point.
struct FootprintConfig {
  double l_car = 4.0;
  double w_car = 2.0;
  double d_lon = 4.0;
  double d_lat = 2.0;
  double l_w = 2.7;

  double region_length() const { return l_car + d_lon; }
  double region_width() const { return w_car + d_lat; }
  bool valid() const {
    return l_car > 0 && w_car > 0 && d_lon > 0 && d_lat > 0 && l_w > 0 &&
           l_w < l_car;
  }
};

// Corners stored CCW. Only rectangles are produced by occupied_region, and
// sat_disjoint assumes opposite edges are parallel (two unique normals per
// quad).
struct ConvexQuad {
  std::array<Vec2, 4> corners;

  Vec2 centroid() const {
    Vec2 c;
    for (const auto& p : corners) c = c + p;
    return c * 0.25;
  }
  double area() const;
  bool is_ccw() const;
};

ConvexQuad occupied_region(const Pose2D& pose, const FootprintConfig& cfg);

// True iff the two quads share no point at all. Touching boundaries count as
// NOT disjoint.
bool sat_disjoint(const ConvexQuad& a, const ConvexQuad& b);

// Positive when disjoint (largest separating-axis gap), negative when
// overlapping (minus the exact penetration depth over the edge-normal axes).
double signed_clearance(const ConvexQuad& a, const ConvexQuad& b);

// First lexicographic index pair whose occupied regions overlap.
std::optional<std::pair<std::size_t, std::size_t>> detect_collision(
    std::span<const Pose2D> poses, const FootprintConfig& cfg);

// Axis-aligned square of the given half size centered at the origin, as a
// quad (used for conflict-area occupancy tests).
ConvexQuad centered_square(double half_size);

}  // namespace crossroads::geometry
