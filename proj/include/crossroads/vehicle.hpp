#pragma once

#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossroads/geometry.hpp"

namespace crossroads::vehicle {

using geometry::FootprintConfig;
using geometry::Pose2D;

enum class Intention { left = 0, straight = 1, right = 2 };
enum class Phase { waiting, controlled, safe, virtual_pad };

const char* to_string(Intention i);
const char* to_string(Phase p);

struct IllegalIntention : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InfeasibleRadius : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct OutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Four-road layout. Road r in 1..4 heads at (r-1)*90 degrees toward the
// center; inbound lane k (1 = leftmost, nearest the road axis) is offset
// (k - 1/2) * lane_width to the right of the heading.
struct IntersectionGeometry {
  int n_roads = 4;
  int n_lanes = 1;
  double ccz_radius = 50.0;
  double ca_half_size = 10.0;
  double lane_width = 10.0;
  double r_left = 15.0;
  double r_right = 15.0;

  bool valid() const {
    return n_roads == 4 && n_lanes >= 1 && ca_half_size < ccz_radius &&
           n_lanes * lane_width <= ca_half_size + 1e-9 && lane_width > 0 &&
           r_left > 0 && r_right > 0;
  }
  double road_heading(int road) const { return (road - 1) * M_PI / 2.0; }
  double lane_offset(int lane) const { return (lane - 0.5) * lane_width; }
};

bool intention_legal(int lane, int n_lanes, Intention intent);
std::vector<Intention> legal_intentions(int lane, int n_lanes);

struct PathSegment {
  Pose2D start;       // pose at the beginning of the segment
  double length = 0;  // arc length
  double curvature = 0;  // 0 for straights, +1/R left, -1/R right
};

// Piecewise line & circle curve, tangent-continuous, parameterized by arc
// length. Conflict-area crossing bounds (based on the occupied rectangle)
// are filled in by attach_ca_window once the footprint is known.
struct ReferencePath {
  int road = 1;
  int lane = 1;
  Intention intention = Intention::straight;
  std::vector<PathSegment> segments;
  double total_length = 0;

  // Arc lengths where the occupied rectangle first touches / last leaves the
  // conflict area. NaN until attach_ca_window runs.
  double ca_entry_s = std::numeric_limits<double>::quiet_NaN();
  double ca_exit_s = std::numeric_limits<double>::quiet_NaN();
};

ReferencePath build_path(const IntersectionGeometry& geom, int road, int lane,
                         Intention intent, double min_turn_radius = 0.0);

// Pose on the path at arc length s plus the steering angle delta =
// atan(l_w * curvature) that holds the vehicle on the path.
std::pair<Pose2D, double> path_pose(const ReferencePath& path, double s,
                                    double l_w);

void attach_ca_window(ReferencePath& path, const IntersectionGeometry& geom,
                      const FootprintConfig& fp);

struct VehicleRecord {
  int road = 1;
  int lane = 1;
  int slot_index = 1;
  double s = 0;
  double v = 0;
  Phase phase = Phase::controlled;
  std::shared_ptr<const ReferencePath> path;

  bool is_virtual() const { return phase == Phase::virtual_pad; }
  bool exited() const { return path && s >= path->total_length - 1e-12; }
  Pose2D pose(double l_w) const { return path_pose(*path, s, l_w).first; }
};

// Forward-Euler update along the path; v clipped to [0, v_max], s clamped to
// the path end.
VehicleRecord step_vehicle(const VehicleRecord& veh, double a, double dt,
                           double v_max);

// All legal paths of one intersection, shared between scenes. Also owns the
// pairwise path-conflict table used by the collision-set baseline.
class PathTable {
 public:
  PathTable(const IntersectionGeometry& geom, const FootprintConfig& fp,
            double delta_max);

  const IntersectionGeometry& geometry() const { return geom_; }
  const FootprintConfig& footprint() const { return fp_; }
  std::shared_ptr<const ReferencePath> get(int road, int lane,
                                           Intention intent) const;
  // True when two paths can produce overlapping occupied regions anywhere.
  bool conflicting(const ReferencePath& a, const ReferencePath& b) const;

 private:
  int index_of(int road, int lane, Intention intent) const;

  IntersectionGeometry geom_;
  FootprintConfig fp_;
  std::vector<std::shared_ptr<const ReferencePath>> paths_;
  mutable std::vector<signed char> conflict_;  // -1 unknown, 0 no, 1 yes
};

}  // namespace crossroads::vehicle
