#include "crossroads/vehicle.hpp"

#include <algorithm>
#include <cmath>

namespace crossroads::vehicle {

using geometry::ConvexQuad;
using geometry::Vec2;

const char* to_string(Intention i) {
  switch (i) {
    case Intention::left: return "left";
    case Intention::straight: return "straight";
    case Intention::right: return "right";
  }
  return "?";
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::waiting: return "WV";
    case Phase::controlled: return "CV";
    case Phase::safe: return "SV";
    case Phase::virtual_pad: return "virtual";
  }
  return "?";
}

bool intention_legal(int lane, int n_lanes, Intention intent) {
  if (intent == Intention::straight) return true;
  if (intent == Intention::left) return lane == 1;
  return lane == n_lanes;  // right
}

std::vector<Intention> legal_intentions(int lane, int n_lanes) {
  std::vector<Intention> out;
  if (lane == 1) out.push_back(Intention::left);
  out.push_back(Intention::straight);
  if (lane == n_lanes) out.push_back(Intention::right);
  return out;
}

namespace {

Vec2 dir_of(double heading) { return {std::cos(heading), std::sin(heading)}; }
Vec2 right_of(double heading) { return {std::sin(heading), -std::cos(heading)}; }

Pose2D pose_on_segment(const PathSegment& seg, double u) {
  if (seg.curvature == 0.0) {
    const Vec2 d = dir_of(seg.start.psi);
    return {seg.start.x + u * d.x, seg.start.y + u * d.y, seg.start.psi};
  }
  const double radius = 1.0 / std::abs(seg.curvature);
  const double side = seg.curvature > 0 ? 1.0 : -1.0;
  const Vec2 left{-std::sin(seg.start.psi), std::cos(seg.start.psi)};
  const Vec2 center = seg.start.position() + left * (side * radius);
  const double sweep = seg.curvature * u;
  const Vec2 arm = (seg.start.position() - center).rotated(sweep);
  return {center.x + arm.x, center.y + arm.y,
          geometry::normalize_angle(seg.start.psi + sweep)};
}

}  // namespace

ReferencePath build_path(const IntersectionGeometry& geom, int road, int lane,
                         Intention intent, double min_turn_radius) {
  if (road < 1 || road > geom.n_roads || lane < 1 || lane > geom.n_lanes) {
    throw OutOfRange("road/lane index outside intersection");
  }
  if (!intention_legal(lane, geom.n_lanes, intent)) {
    throw IllegalIntention(std::string("lane ") + std::to_string(lane) +
                           " cannot go " + to_string(intent));
  }

  ReferencePath path;
  path.road = road;
  path.lane = lane;
  path.intention = intent;

  const double heading = geom.road_heading(road);
  const Vec2 d = dir_of(heading);
  const Vec2 rt = right_of(heading);
  const double off = geom.lane_offset(lane);
  const double t_start = -std::sqrt(geom.ccz_radius * geom.ccz_radius - off * off);
  const Vec2 start = d * t_start + rt * off;

  if (intent == Intention::straight) {
    PathSegment seg;
    seg.start = {start.x, start.y, geometry::normalize_angle(heading)};
    seg.length = -2.0 * t_start;
    seg.curvature = 0.0;
    path.segments.push_back(seg);
    path.total_length = seg.length;
    return path;
  }

  const double turn_sign = intent == Intention::left ? 1.0 : -1.0;
  const double radius = intent == Intention::left ? geom.r_left : geom.r_right;
  if (radius < min_turn_radius) {
    throw InfeasibleRadius("turn radius " + std::to_string(radius) +
                           " below steering limit " +
                           std::to_string(min_turn_radius));
  }

  const double exit_heading =
      geometry::normalize_angle(heading + turn_sign * M_PI / 2.0);
  const int exit_lane = intent == Intention::left ? 1 : geom.n_lanes;
  const double exit_off = geom.lane_offset(exit_lane);
  const Vec2 d2 = dir_of(exit_heading);
  const Vec2 rt2 = right_of(exit_heading);

  // Arc center: rightward offset (off - sign*R) from the inbound line and
  // (exit_off - sign*R) from the outbound line.
  const double u1 = off - turn_sign * radius;
  const double u2 = exit_off - turn_sign * radius;
  const double det = rt.x * rt2.y - rt.y * rt2.x;
  const Vec2 center{(u1 * rt2.y - u2 * rt.y) / det,
                    (rt.x * u2 - rt2.x * u1) / det};

  const Vec2 t1 = d * center.dot(d) + rt * off;
  const Vec2 t2 = d2 * center.dot(d2) + rt2 * exit_off;
  const double lead_in = (t1 - start).dot(d);
  const double t_exit =
      std::sqrt(geom.ccz_radius * geom.ccz_radius - exit_off * exit_off);
  const double lead_out = t_exit - center.dot(d2);
  if (lead_in < 0.0 || lead_out < 0.0) {
    throw InfeasibleRadius("turn radius " + std::to_string(radius) +
                           " does not fit inside the control zone");
  }

  PathSegment in;
  in.start = {start.x, start.y, geometry::normalize_angle(heading)};
  in.length = lead_in;
  in.curvature = 0.0;
  PathSegment arc;
  arc.start = {t1.x, t1.y, geometry::normalize_angle(heading)};
  arc.length = radius * M_PI / 2.0;
  arc.curvature = turn_sign / radius;
  PathSegment out;
  out.start = {t2.x, t2.y, exit_heading};
  out.length = lead_out;
  out.curvature = 0.0;

  if (in.length > 1e-12) path.segments.push_back(in);
  path.segments.push_back(arc);
  if (out.length > 1e-12) path.segments.push_back(out);
  path.total_length = in.length + arc.length + out.length;
  return path;
}

std::pair<Pose2D, double> path_pose(const ReferencePath& path, double s,
                                    double l_w) {
  if (s < -1e-9 || s > path.total_length + 1e-9) {
    throw OutOfRange("arc length " + std::to_string(s) +
                     " outside [0, " + std::to_string(path.total_length) + "]");
  }
  s = std::clamp(s, 0.0, path.total_length);
  double remaining = s;
  for (std::size_t i = 0; i < path.segments.size(); ++i) {
    const PathSegment& seg = path.segments[i];
    const bool last = i + 1 == path.segments.size();
    if (remaining <= seg.length || last) {
      const double u = std::min(remaining, seg.length);
      return {pose_on_segment(seg, u), std::atan(l_w * seg.curvature)};
    }
    remaining -= seg.length;
  }
  const PathSegment& seg = path.segments.back();
  return {pose_on_segment(seg, seg.length), std::atan(l_w * seg.curvature)};
}

void attach_ca_window(ReferencePath& path, const IntersectionGeometry& geom,
                      const FootprintConfig& fp) {
  const ConvexQuad ca = geometry::centered_square(geom.ca_half_size);
  auto inside = [&](double s) {
    const Pose2D p = path_pose(path, s, fp.l_w).first;
    return !geometry::sat_disjoint(geometry::occupied_region(p, fp), ca);
  };

  const double step = 0.05;
  double first = -1.0, last = -1.0;
  for (double s = 0.0; s <= path.total_length; s += step) {
    if (inside(s)) {
      if (first < 0.0) first = s;
      last = s;
    }
  }
  if (first < 0.0) {
    path.ca_entry_s = path.total_length;
    path.ca_exit_s = path.total_length;
    return;
  }

  auto bisect = [&](double lo, double hi, bool want_inside_hi) {
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (inside(mid) == want_inside_hi) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  path.ca_entry_s = first <= 0.0 ? 0.0 : bisect(std::max(0.0, first - step), first, true);
  path.ca_exit_s = last >= path.total_length
                       ? path.total_length
                       : bisect(last, std::min(path.total_length, last + step), false);
}

VehicleRecord step_vehicle(const VehicleRecord& veh, double a, double dt,
                           double v_max) {
  VehicleRecord next = veh;
  next.s = std::min(veh.s + veh.v * dt, veh.path->total_length);
  next.v = std::clamp(veh.v + a * dt, 0.0, v_max);
  return next;
}

PathTable::PathTable(const IntersectionGeometry& geom,
                     const FootprintConfig& fp, double delta_max)
    : geom_(geom), fp_(fp) {
  const double min_radius = fp.l_w / std::tan(delta_max);
  const int n = geom.n_roads * geom.n_lanes * 3;
  paths_.resize(n);
  for (int road = 1; road <= geom.n_roads; ++road) {
    for (int lane = 1; lane <= geom.n_lanes; ++lane) {
      for (Intention intent : legal_intentions(lane, geom.n_lanes)) {
        auto path = std::make_shared<ReferencePath>(
            build_path(geom, road, lane, intent, min_radius));
        attach_ca_window(*path, geom, fp);
        paths_[index_of(road, lane, intent)] = std::move(path);
      }
    }
  }
  conflict_.assign(static_cast<std::size_t>(n) * n, -1);
}

int PathTable::index_of(int road, int lane, Intention intent) const {
  return ((road - 1) * geom_.n_lanes + (lane - 1)) * 3 + static_cast<int>(intent);
}

std::shared_ptr<const ReferencePath> PathTable::get(int road, int lane,
                                                    Intention intent) const {
  auto p = paths_[index_of(road, lane, intent)];
  if (!p) {
    throw IllegalIntention(std::string("no path for lane ") +
                           std::to_string(lane) + " going " + to_string(intent));
  }
  return p;
}

bool PathTable::conflicting(const ReferencePath& a,
                            const ReferencePath& b) const {
  const int ia = index_of(a.road, a.lane, a.intention);
  const int ib = index_of(b.road, b.lane, b.intention);
  signed char& memo = conflict_[static_cast<std::size_t>(ia) * paths_.size() + ib];
  if (memo >= 0) return memo == 1;

  const double step = 1.0;
  const double prefilter = fp_.region_length() + fp_.region_width() + 1.0;
  bool found = false;
  for (double sa = 0.0; sa <= a.total_length && !found; sa += step) {
    const Pose2D pa = path_pose(a, sa, fp_.l_w).first;
    const ConvexQuad qa = geometry::occupied_region(pa, fp_);
    const Vec2 ca = qa.centroid();
    for (double sb = 0.0; sb <= b.total_length; sb += step) {
      const Pose2D pb = path_pose(b, sb, fp_.l_w).first;
      if ((pb.position() - ca).norm() > prefilter) continue;
      const ConvexQuad qb = geometry::occupied_region(pb, fp_);
      // Near misses count as conflicts; the table is used for scheduling.
      if (geometry::signed_clearance(qa, qb) < 0.5) {
        found = true;
        break;
      }
    }
  }
  memo = found ? 1 : 0;
  conflict_[static_cast<std::size_t>(ib) * paths_.size() + ia] = memo;
  return found;
}

}  // namespace crossroads::vehicle
