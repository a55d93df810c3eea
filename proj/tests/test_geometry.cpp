#include "crossroads/geometry.hpp"

#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace crossroads::geometry;

namespace {

FootprintConfig table_footprint() { return {4.0, 2.0, 4.0, 2.0, 2.7}; }

ConvexQuad unit_square_at(double cx, double cy, double angle = 0.0) {
  ConvexQuad q;
  const Vec2 u = Vec2{1, 0}.rotated(angle);
  const Vec2 v = Vec2{0, 1}.rotated(angle);
  const Vec2 c{cx, cy};
  q.corners[0] = c - u * 0.5 - v * 0.5;
  q.corners[1] = c + u * 0.5 - v * 0.5;
  q.corners[2] = c + u * 0.5 + v * 0.5;
  q.corners[3] = c - u * 0.5 + v * 0.5;
  return q;
}

}  // namespace

TEST_CASE("occupied region is the safety rectangle around the shifted center") {
  const auto quad = occupied_region({0, 0, 0}, table_footprint());
  CHECK(quad.is_ccw());
  CHECK(quad.area() == doctest::Approx(8.0 * 4.0));
  const Vec2 c = quad.centroid();
  CHECK(c.x == doctest::Approx(1.35).epsilon(1e-12));
  CHECK(c.y == doctest::Approx(0.0).epsilon(1e-12));
  // Axis-aligned 8 x 4 extents.
  CHECK(quad.corners[0].x == doctest::Approx(1.35 - 4.0));
  CHECK(quad.corners[2].x == doctest::Approx(1.35 + 4.0));
  CHECK(quad.corners[0].y == doctest::Approx(-2.0));
  CHECK(quad.corners[2].y == doctest::Approx(2.0));
}

TEST_CASE("zero wheelbase centers the region on the reference point") {
  auto fp = table_footprint();
  fp.l_w = 1e-300;  // limit case of the center offset
  const auto quad = occupied_region({0, 0, 0}, fp);
  CHECK(quad.centroid().x == doctest::Approx(0.0));
  CHECK(quad.centroid().y == doctest::Approx(0.0));
}

TEST_CASE("heading rotates the region") {
  const auto quad = occupied_region({0, 0, M_PI / 2}, table_footprint());
  const Vec2 c = quad.centroid();
  CHECK(c.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.y == doctest::Approx(1.35).epsilon(1e-12));
  // Long axis now vertical.
  double min_y = 1e9, max_y = -1e9;
  for (const auto& p : quad.corners) {
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  CHECK(max_y - min_y == doctest::Approx(8.0));
}

TEST_CASE("corner average equals the analytic center") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-40, 40), ang(-M_PI, M_PI);
  const auto fp = table_footprint();
  for (int i = 0; i < 200; ++i) {
    const Pose2D pose{pos(rng), pos(rng), ang(rng)};
    const auto quad = occupied_region(pose, fp);
    const Vec2 c = quad.centroid();
    CHECK(std::abs(c.x - (pose.x + fp.l_w * std::cos(pose.psi) / 2)) < 1e-9);
    CHECK(std::abs(c.y - (pose.y + fp.l_w * std::sin(pose.psi) / 2)) < 1e-9);
  }
}

TEST_CASE("rotating by psi then -psi restores the corners") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  const auto fp = table_footprint();
  const auto base = occupied_region({0, 0, 0}, fp);
  for (int i = 0; i < 100; ++i) {
    const double psi = ang(rng);
    const auto rotated = occupied_region({0, 0, psi}, fp);
    for (int c = 0; c < 4; ++c) {
      const Vec2 back = rotated.corners[c].rotated(-psi);
      CHECK(std::abs(back.x - base.corners[c].x) < 1e-9);
      CHECK(std::abs(back.y - base.corners[c].y) < 1e-9);
    }
  }
}

TEST_CASE("sat_disjoint basics") {
  CHECK(sat_disjoint(unit_square_at(0, 0), unit_square_at(3, 0)));
  CHECK_FALSE(sat_disjoint(unit_square_at(0, 0), unit_square_at(0, 0)));
  // Touching edges count as contact.
  CHECK_FALSE(sat_disjoint(unit_square_at(0, 0), unit_square_at(1.0, 0)));
  CHECK(sat_disjoint(unit_square_at(0, 0), unit_square_at(1.0 + 1e-9, 0)));
}

TEST_CASE("rotated square against sampling oracle") {
  const auto a = unit_square_at(0, 0);
  const auto b = unit_square_at(1.2, 0, M_PI / 4);
  CHECK(sat_disjoint(a, b) == !oracles::sampling_overlap(a, b));
}

TEST_CASE("sat_disjoint is symmetric") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    const auto a = oracles::random_rect(rng);
    const auto b = oracles::random_rect(rng);
    CHECK(sat_disjoint(a, b) == sat_disjoint(b, a));
  }
}

TEST_CASE("sat_disjoint agrees with the sampling oracle away from touching") {
  std::mt19937_64 rng(14);
  int kept = 0;
  while (kept < 300) {
    const auto a = oracles::random_rect(rng, 1.8);
    const auto b = oracles::random_rect(rng, 1.8);
    if (std::abs(signed_clearance(a, b)) <= 0.01) continue;
    ++kept;
    CHECK(sat_disjoint(a, b) == !oracles::sampling_overlap(a, b));
  }
}

TEST_CASE("detect_collision finds the first overlapping pair") {
  const auto fp = table_footprint();
  CHECK_FALSE(detect_collision({}, fp).has_value());
  const std::vector<Pose2D> one{{0, 0, 0}};
  CHECK_FALSE(detect_collision(one, fp).has_value());

  const std::vector<Pose2D> spread{{0, 0, 0}, {30, 0, 0}, {60, 0, 0}};
  CHECK_FALSE(detect_collision(spread, fp).has_value());

  const std::vector<Pose2D> overlapping{{0, 0, 0}, {40, 0, 0}, {42, 0, 0}};
  const auto hit = detect_collision(overlapping, fp);
  REQUIRE(hit.has_value());
  CHECK(hit->first == 1);
  CHECK(hit->second == 2);
}
