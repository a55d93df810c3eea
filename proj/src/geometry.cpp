#include "crossroads/geometry.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace crossroads::geometry {

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

double ConvexQuad::area() const {
  double twice = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& p = corners[i];
    const Vec2& q = corners[(i + 1) % 4];
    twice += p.cross(q);
  }
  return 0.5 * twice;
}

bool ConvexQuad::is_ccw() const { return area() > 0.0; }

ConvexQuad occupied_region(const Pose2D& pose, const FootprintConfig& cfg) {
  const double half_l = 0.5 * cfg.region_length();
  const double half_w = 0.5 * cfg.region_width();
  const Vec2 u = pose.heading();
  const Vec2 v{-u.y, u.x};
  const Vec2 center = pose.position() + u * (0.5 * cfg.l_w);
  ConvexQuad q;
  q.corners[0] = center - u * half_l - v * half_w;
  q.corners[1] = center + u * half_l - v * half_w;
  q.corners[2] = center + u * half_l + v * half_w;
  q.corners[3] = center - u * half_l + v * half_w;
  return q;
}

namespace {

// Projection gap of b relative to a's interval on the given axis; positive
// means separated along this axis.
double axis_gap(const ConvexQuad& a, const ConvexQuad& b, const Vec2& axis) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (int i = 0; i < 4; ++i) {
    const double ta = a.corners[i].dot(axis);
    const double tb = b.corners[i].dot(axis);
    amin = std::min(amin, ta);
    amax = std::max(amax, ta);
    bmin = std::min(bmin, tb);
    bmax = std::max(bmax, tb);
  }
  return std::max(bmin - amax, amin - bmax);
}

std::array<Vec2, 4> unique_normals(const ConvexQuad& a, const ConvexQuad& b) {
  auto normal = [](const Vec2& p, const Vec2& q) {
    const Vec2 e = q - p;
    const double n = e.norm();
    return Vec2{-e.y / n, e.x / n};
  };
  // Two normals per rectangle (opposite edges are parallel).
  return {normal(a.corners[0], a.corners[1]), normal(a.corners[1], a.corners[2]),
          normal(b.corners[0], b.corners[1]), normal(b.corners[1], b.corners[2])};
}

}  // namespace

bool sat_disjoint(const ConvexQuad& a, const ConvexQuad& b) {
  for (const Vec2& axis : unique_normals(a, b)) {
    if (axis_gap(a, b, axis) > 0.0) return true;
  }
  return false;
}

double signed_clearance(const ConvexQuad& a, const ConvexQuad& b) {
  double best = -std::numeric_limits<double>::infinity();
  for (const Vec2& axis : unique_normals(a, b)) {
    best = std::max(best, axis_gap(a, b, axis));
  }
  return best;
}

std::optional<std::pair<std::size_t, std::size_t>> detect_collision(
    std::span<const Pose2D> poses, const FootprintConfig& cfg) {
  std::vector<ConvexQuad> quads;
  quads.reserve(poses.size());
  for (const Pose2D& p : poses) quads.push_back(occupied_region(p, cfg));
  for (std::size_t i = 0; i + 1 < quads.size(); ++i) {
    for (std::size_t j = i + 1; j < quads.size(); ++j) {
      if (!sat_disjoint(quads[i], quads[j])) return std::make_pair(i, j);
    }
  }
  return std::nullopt;
}

ConvexQuad centered_square(double half_size) {
  ConvexQuad q;
  q.corners[0] = {-half_size, -half_size};
  q.corners[1] = {half_size, -half_size};
  q.corners[2] = {half_size, half_size};
  q.corners[3] = {-half_size, half_size};
  return q;
}

}  // namespace crossroads::geometry
