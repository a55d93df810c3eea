#include "crossroads/vehicle.hpp"

#include <cmath>
#include <random>

#include "crossroads/config.hpp"
#include "doctest.h"

using namespace crossroads;
using namespace crossroads::vehicle;

namespace {

IntersectionGeometry single_lane_geom() {
  config::RunConfig cfg;
  return cfg.intersection();
}

IntersectionGeometry multi_lane_geom() {
  config::RunConfig cfg;
  cfg.n_lanes = 3;
  cfg.ccz_radius = 100;
  cfg.ca_size = 48;
  cfg.r_left = 40;
  cfg.r_right = 20;
  cfg.net_arch = {64, 400, 300, 12};
  return cfg.intersection();
}

}  // namespace

TEST_CASE("straight path spans the control zone") {
  const auto geom = single_lane_geom();
  const auto path = build_path(geom, 1, 1, Intention::straight);
  CHECK(path.segments.size() == 1);
  CHECK(path.total_length == doctest::Approx(100.0).epsilon(0.01));
  const auto [start, d0] = path_pose(path, 0.0, 2.7);
  CHECK(std::hypot(start.x, start.y) == doctest::Approx(geom.ccz_radius));
  CHECK(d0 == 0.0);
  const auto [end, d1] = path_pose(path, path.total_length, 2.7);
  CHECK(std::hypot(end.x, end.y) == doctest::Approx(geom.ccz_radius));
  CHECK(end.psi == doctest::Approx(start.psi));
}

TEST_CASE("left turn is straight + quarter arc + straight") {
  const auto geom = single_lane_geom();
  const auto path = build_path(geom, 1, 1, Intention::left);
  REQUIRE(path.segments.size() == 3);
  CHECK(path.segments[0].curvature == 0.0);
  CHECK(path.segments[1].curvature == doctest::Approx(1.0 / 15.0));
  CHECK(path.segments[1].length == doctest::Approx(15.0 * M_PI / 2));
  CHECK(path.segments[2].curvature == 0.0);
  // Exits heading +90 degrees from entry.
  const auto exit_pose = path_pose(path, path.total_length, 2.7).first;
  CHECK(exit_pose.psi == doctest::Approx(M_PI / 2));
}

TEST_CASE("right turn sweeps clockwise") {
  const auto geom = single_lane_geom();
  const auto path = build_path(geom, 1, 1, Intention::right);
  REQUIRE(path.segments.size() == 3);
  CHECK(path.segments[1].curvature == doctest::Approx(-1.0 / 15.0));
  const auto exit_pose = path_pose(path, path.total_length, 2.7).first;
  CHECK(exit_pose.psi == doctest::Approx(-M_PI / 2));
}

TEST_CASE("middle lane may only go straight") {
  const auto geom = multi_lane_geom();
  CHECK_THROWS_AS(build_path(geom, 1, 2, Intention::left), IllegalIntention);
  CHECK_THROWS_AS(build_path(geom, 1, 2, Intention::right), IllegalIntention);
  CHECK_NOTHROW(build_path(geom, 1, 2, Intention::straight));
  // Leftmost cannot turn right, rightmost cannot turn left.
  CHECK_THROWS_AS(build_path(geom, 1, 1, Intention::right), IllegalIntention);
  CHECK_THROWS_AS(build_path(geom, 1, 3, Intention::left), IllegalIntention);
}

TEST_CASE("infeasible radius is rejected") {
  auto geom = single_lane_geom();
  geom.r_left = 1.0;
  const double min_radius = 2.7 / std::tan(0.78);
  CHECK_THROWS_AS(build_path(geom, 1, 1, Intention::left, min_radius),
                  InfeasibleRadius);
}

TEST_CASE("path_pose on straights and arcs") {
  const auto geom = single_lane_geom();
  const auto straight = build_path(geom, 1, 1, Intention::straight);
  const auto p0 = path_pose(straight, 0.0, 2.7).first;
  const auto p10 = path_pose(straight, 10.0, 2.7).first;
  CHECK(p10.x == doctest::Approx(p0.x + 10.0));
  CHECK(p10.y == doctest::Approx(p0.y));

  const auto left = build_path(geom, 1, 1, Intention::left);
  const double arc_start = left.segments[0].length;
  const double quarter = left.segments[1].length;
  const auto mid = path_pose(left, arc_start + quarter / 2, 2.7);
  CHECK(mid.first.psi == doctest::Approx(M_PI / 4));
  CHECK(mid.second == doctest::Approx(std::atan(2.7 / 15.0)));
  const auto end_arc = path_pose(left, arc_start + quarter, 2.7);
  CHECK(end_arc.first.psi == doctest::Approx(M_PI / 2));

  CHECK_THROWS_AS(path_pose(straight, -1.0, 2.7), OutOfRange);
  CHECK_THROWS_AS(path_pose(straight, straight.total_length + 1.0, 2.7),
                  OutOfRange);
}

TEST_CASE("steering stays inside the limit on every built path") {
  config::RunConfig cfg;
  const auto geom = cfg.intersection();
  for (int road = 1; road <= 4; ++road) {
    for (Intention intent :
         {Intention::left, Intention::straight, Intention::right}) {
      const auto path = build_path(geom, road, 1, intent);
      for (double s = 0; s <= path.total_length; s += 0.5) {
        CHECK(std::abs(path_pose(path, s, cfg.l_w).second) <= cfg.delta_max);
      }
    }
  }
}

TEST_CASE("step_vehicle clips velocity and clamps arc length") {
  config::RunConfig cfg;
  PathTable table(cfg.intersection(), cfg.footprint(), cfg.delta_max);
  VehicleRecord veh;
  veh.path = table.get(1, 1, Intention::straight);
  veh.s = 10;
  veh.v = 5;

  const auto coast = step_vehicle(veh, 0.0, 0.1, cfg.v_max);
  CHECK(coast.s == doctest::Approx(10.5));
  CHECK(coast.v == doctest::Approx(5.0));

  veh.v = 15.0;
  const auto capped = step_vehicle(veh, 5.0, 0.1, cfg.v_max);
  CHECK(capped.v == doctest::Approx(15.0));

  veh.v = 0.2;
  const auto floored = step_vehicle(veh, -5.0, 0.1, cfg.v_max);
  CHECK(floored.v == doctest::Approx(0.0));

  veh.s = veh.path->total_length - 0.1;
  veh.v = 15.0;
  const auto clamped = step_vehicle(veh, 0.0, 0.1, cfg.v_max);
  CHECK(clamped.s == doctest::Approx(veh.path->total_length));
}

TEST_CASE("velocity bounds and monotone arc length under random control") {
  config::RunConfig cfg;
  PathTable table(cfg.intersection(), cfg.footprint(), cfg.delta_max);
  VehicleRecord veh;
  veh.path = table.get(2, 1, Intention::left);
  veh.v = 3.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> act(-cfg.a_max, cfg.a_max);
  double prev_s = veh.s;
  for (int i = 0; i < 2000; ++i) {
    veh = step_vehicle(veh, act(rng), cfg.dt, cfg.v_max);
    CHECK(veh.v >= 0.0);
    CHECK(veh.v <= cfg.v_max);
    CHECK(veh.s >= prev_s);
    prev_s = veh.s;
  }
}

TEST_CASE("kinematic integration with derived steering tracks the path") {
  // Integrate the bicycle model with the steering angle reported by
  // path_pose; forward Euler at dt = 0.01 s and crawl speed keeps the
  // integration error under a centimeter over the full path.
  config::RunConfig cfg;
  const auto geom = cfg.intersection();
  for (Intention intent : {Intention::straight, Intention::left}) {
    const auto path = build_path(geom, 1, 1, intent);
    const double dt = 0.01, v = 0.5;
    auto state = path_pose(path, 0.0, cfg.l_w).first;
    double s = 0.0;
    while (s + v * dt <= path.total_length) {
      const double delta = path_pose(path, s, cfg.l_w).second;
      state.x += v * std::cos(state.psi) * dt;
      state.y += v * std::sin(state.psi) * dt;
      state.psi += v * std::tan(delta) / cfg.l_w * dt;
      s += v * dt;
    }
    const auto ref = path_pose(path, s, cfg.l_w).first;
    CHECK(std::hypot(state.x - ref.x, state.y - ref.y) < 0.01);
  }
}

TEST_CASE("conflict-area window is attached and ordered") {
  config::RunConfig cfg;
  PathTable table(cfg.intersection(), cfg.footprint(), cfg.delta_max);
  const auto straight = table.get(1, 1, Intention::straight);
  CHECK(straight->ca_entry_s < straight->ca_exit_s);
  CHECK(straight->ca_entry_s > 0);
  CHECK(straight->ca_exit_s < straight->total_length);
  // The rectangle is inflated, so the window opens before the reference
  // point reaches the square.
  const auto pose = path_pose(*straight, straight->ca_entry_s, cfg.l_w).first;
  CHECK(std::max(std::abs(pose.x), std::abs(pose.y)) >
        cfg.ca_size / 2.0);
}

TEST_CASE("path conflicts: opposing straights clear, crossing lefts conflict") {
  config::RunConfig cfg;
  PathTable table(cfg.intersection(), cfg.footprint(), cfg.delta_max);
  const auto east = table.get(1, 1, Intention::straight);
  const auto west = table.get(3, 1, Intention::straight);
  CHECK_FALSE(table.conflicting(*east, *west));

  const auto left_e = table.get(1, 1, Intention::left);
  const auto left_w = table.get(3, 1, Intention::left);
  CHECK(table.conflicting(*left_e, *left_w));
  CHECK(table.conflicting(*east, *left_w));

  // Same path trivially conflicts with itself.
  CHECK(table.conflicting(*east, *east));
}
