#include "crossroads/env.hpp"

#include <cmath>
#include <map>
#include <memory>

#include "doctest.h"

using namespace crossroads;
using namespace crossroads::env;
using vehicle::Intention;
using vehicle::Phase;

namespace {

config::RunConfig single_lane() { return {}; }

config::RunConfig multi_lane() {
  config::RunConfig cfg;
  cfg.n_lanes = 3;
  cfg.ccz_radius = 100;
  cfg.ca_size = 48;
  cfg.r_left = 40;
  cfg.r_right = 20;
  cfg.net_arch = {64, 400, 300, 12};
  cfg.batch_size = 256;
  return cfg;
}

const vehicle::PathTable& table_for(const config::RunConfig& cfg) {
  static std::map<int, std::unique_ptr<vehicle::PathTable>> cache;
  auto& slot = cache[cfg.n_lanes];
  if (!slot) {
    slot = std::make_unique<vehicle::PathTable>(cfg.intersection(),
                                                cfg.footprint(), cfg.delta_max);
  }
  return *slot;
}

}  // namespace

TEST_CASE("priority normalization") {
  CHECK(normalize_priorities({2, 1, 1, 0}) ==
        std::vector<double>{0.5, 0.25, 0.25, 0.0});
  CHECK(normalize_priorities({0, 0, 0, 0}) ==
        std::vector<double>{0, 0, 0, 0});
  CHECK(normalize_priorities({1, 1, 1, 1}) ==
        std::vector<double>{0.25, 0.25, 0.25, 0.25});
}

TEST_CASE("joint intention encoding, single lane") {
  // One lane, one slot: plain one-hot over {left, straight, right}.
  auto one = encode_intentions({{Intention::left}}, 1, 1);
  CHECK(one == std::vector<double>{1, 0, 0});
  CHECK(encode_intentions({{Intention::straight}}, 1, 1) ==
        std::vector<double>{0, 1, 0});

  // Two slots, both left: first index of the 9-way code.
  auto two = encode_intentions({{Intention::left, Intention::left}}, 1, 2);
  REQUIRE(two.size() == 9);
  CHECK(two[0] == 1.0);
  // Slot 1 is the most significant digit.
  auto mixed =
      encode_intentions({{Intention::straight, Intention::left}}, 1, 2);
  CHECK(mixed[3] == 1.0);
}

TEST_CASE("joint intention encoding, three lanes") {
  // Legal combos are 2 x 1 x 2 = 4; all-straight is (S,S,S) -> index 2 in
  // lexicographic order with left < straight < right.
  auto all_straight = encode_intentions(
      {{Intention::straight}, {Intention::straight}, {Intention::straight}}, 3,
      1);
  REQUIRE(all_straight.size() == 4);
  CHECK(all_straight[2] == 1.0);
  auto lefty = encode_intentions(
      {{Intention::left}, {Intention::straight}, {Intention::straight}}, 3, 1);
  CHECK(lefty[0] == 1.0);
  CHECK_THROWS_AS(
      encode_intentions(
          {{Intention::straight}, {Intention::left}, {Intention::straight}}, 3,
          1),
      vehicle::IllegalIntention);
}

TEST_CASE("observation length matches the network input dims") {
  auto cfg = single_lane();
  CHECK(cfg.obs_dim() == 28);
  std::mt19937_64 rng(1);
  Scene scene = reset_scene(rng, cfg, table_for(cfg));
  CHECK(observe(scene, cfg).size() == 28);

  auto multi = multi_lane();
  CHECK(multi.obs_dim() == 64);
  std::mt19937_64 rng2(1);
  Scene scene2 = reset_scene(rng2, multi, table_for(multi));
  CHECK(observe(scene2, multi).size() == 64);
}

TEST_CASE("virtual padding sits at the control-zone edge") {
  auto cfg = single_lane();
  std::mt19937_64 rng(2);
  Scene scene =
      reset_scene_partial(rng, cfg, table_for(cfg), {1, 0, 0, 0});
  CHECK(scene.n_real() == 1);
  const auto& pad = scene.vehicles[vehicle_flat(cfg, 2, 1, 1)];
  CHECK(pad.is_virtual());
  CHECK(pad.s == 0.0);
  CHECK(pad.v == cfg.v_low);
  const auto pose = pad.pose(cfg.l_w);
  CHECK(std::hypot(pose.x, pose.y) == doctest::Approx(cfg.ccz_radius));
}

TEST_CASE("normalization scales positions and velocities only") {
  auto cfg = single_lane();
  std::mt19937_64 rng(3);
  Scene scene = reset_scene(rng, cfg, table_for(cfg));
  const Observation raw = observe(scene, cfg);
  const Observation norm = normalize_observation(raw, cfg);
  // Intention block unchanged.
  for (int i = 0; i < 3; ++i) CHECK(norm[i] == raw[i]);
  // Vehicle entries scaled.
  const int base = cfg.joint_intent_dim();  // road 1 block
  CHECK(norm[base + 1] == doctest::Approx(raw[base + 1] / cfg.ccz_radius));
  CHECK(norm[base + 3] == doctest::Approx(raw[base + 3] / cfg.v_max));
}

TEST_CASE("single coasting vehicle earns its velocity as reward") {
  auto cfg = single_lane();
  std::mt19937_64 rng(4);
  Scene scene =
      reset_scene_partial(rng, cfg, table_for(cfg), {1, 0, 0, 0});
  auto& veh = scene.vehicles[vehicle_flat(cfg, 1, 1, 1)];
  veh.s = 20.0;
  veh.v = 5.0;
  ActionVector act = ActionVector::Zero(cfg.act_dim());
  const auto reward = step_scene(scene, act, cfg);
  CHECK(reward.r_v == doctest::Approx(5.0));
  CHECK(reward.r_c == 0.0);
  CHECK(reward.r_s == 0.0);
  CHECK(reward.r_sa == 0.0);
  CHECK(reward.total() == doctest::Approx(5.0));
}

TEST_CASE("collision ends the episode with the penalty") {
  auto cfg = single_lane();
  std::mt19937_64 rng(5);
  Scene scene =
      reset_scene_partial(rng, cfg, table_for(cfg), {1, 1, 0, 0});
  // Two crossing straight-through vehicles forced onto the same spot.
  auto& a = scene.vehicles[vehicle_flat(cfg, 1, 1, 1)];
  auto& b = scene.vehicles[vehicle_flat(cfg, 2, 1, 1)];
  a.path = table_for(cfg).get(1, 1, Intention::straight);
  b.path = table_for(cfg).get(2, 1, Intention::straight);
  a.s = a.path->total_length / 2 + 5.0;
  b.s = b.path->total_length / 2 - 5.0;
  ActionVector act = ActionVector::Zero(cfg.act_dim());
  const auto reward = step_scene(scene, act, cfg);
  CHECK(reward.r_c == doctest::Approx(-1000.0));
  CHECK(scene.done);
  CHECK(scene.reason == DoneReason::collision);
  CHECK(scene.collision_pair.first >= 0);
  CHECK_THROWS_AS(step_scene(scene, act, cfg), std::logic_error);
}

TEST_CASE("completion pays the priority-weighted terminal reward") {
  auto cfg = single_lane();
  std::mt19937_64 rng(6);
  Scene scene =
      reset_scene_partial(rng, cfg, table_for(cfg), {1, 0, 0, 0});
  auto& veh = scene.vehicles[vehicle_flat(cfg, 1, 1, 1)];
  scene.queue = {5, 0, 0, 0};  // p = 1 for the vehicle's lane
  scene.lane_done_time[0] = 10.0;
  veh.phase = Phase::safe;
  veh.s = veh.path->total_length - 0.2;
  veh.v = 5.0;
  ActionVector act = ActionVector::Zero(cfg.act_dim());
  const auto reward = step_scene(scene, act, cfg);
  CHECK(reward.r_s == doctest::Approx(1000.0));
  CHECK(reward.r_sa == doctest::Approx(1000.0));  // 10000 * (1 / 10)
  CHECK(scene.done);
  CHECK(scene.reason == DoneReason::complete);
}

TEST_CASE("reset is deterministic and spacing-safe") {
  auto cfg = single_lane();
  std::mt19937_64 a(42), b(42);
  const Scene sa = reset_scene(a, cfg, table_for(cfg));
  const Scene sb = reset_scene(b, cfg, table_for(cfg));
  REQUIRE(sa.vehicles.size() == sb.vehicles.size());
  CHECK(sa.n_real() == 4);
  for (std::size_t i = 0; i < sa.vehicles.size(); ++i) {
    CHECK(sa.vehicles[i].s == sb.vehicles[i].s);
    CHECK(sa.vehicles[i].v == sb.vehicles[i].v);
    CHECK(sa.vehicles[i].path->intention == sb.vehicles[i].path->intention);
  }
  CHECK(sa.queue == sb.queue);

  // Same-lane spacing with N = 2.
  auto cfg2 = cfg;
  cfg2.batch_n = 2;
  cfg2.net_arch = {4 * 9 + 4 * (1 + 6), 256, 256, 8};
  std::mt19937_64 rng(7);
  const double min_gap = cfg2.footprint().region_length();
  for (int trial = 0; trial < 50; ++trial) {
    const Scene scene = reset_scene(rng, cfg2, table_for(cfg2));
    for (int road = 1; road <= 4; ++road) {
      const auto& first = scene.vehicles[vehicle_flat(cfg2, road, 1, 1)];
      const auto& second = scene.vehicles[vehicle_flat(cfg2, road, 1, 2)];
      CHECK(first.s - second.s >= min_gap);
      CHECK(first.s < first.path->ca_entry_s);
    }
  }
}

TEST_CASE("zero action on non-conflicting paths completes without collision") {
  auto cfg = single_lane();
  std::mt19937_64 rng(8);
  Scene scene = reset_scene(rng, cfg, table_for(cfg));
  // All right turns never meet.
  for (int road = 1; road <= 4; ++road) {
    auto& veh = scene.vehicles[vehicle_flat(cfg, road, 1, 1)];
    veh.path = table_for(cfg).get(road, 1, Intention::right);
    veh.v = cfg.v_low;
  }
  ActionVector act = ActionVector::Zero(cfg.act_dim());
  RewardBreakdown last;
  double episode_return = 0;
  while (!scene.done) {
    last = step_scene(scene, act, cfg);
    episode_return += last.total();
  }
  CHECK(scene.reason == DoneReason::complete);
  // With gamma = 1 the return covers at least the per-vehicle exit bonuses.
  CHECK(episode_return >= 1000.0 * 4);
}

TEST_CASE("reward components always sum to the total") {
  auto cfg = single_lane();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-cfg.a_max, cfg.a_max);
  for (int trial = 0; trial < 5; ++trial) {
    Scene scene = reset_scene(rng, cfg, table_for(cfg));
    while (!scene.done) {
      ActionVector act(cfg.act_dim());
      for (int i = 0; i < act.size(); ++i) act[i] = u(rng);
      const auto r = step_scene(scene, act, cfg);
      CHECK(r.total() ==
            doctest::Approx(r.r_sa + r.r_v + r.r_c + r.r_s).epsilon(1e-12));
    }
  }
}

TEST_CASE("stalled scenes time out") {
  auto cfg = single_lane();
  cfg.timeout_slots = 50;
  std::mt19937_64 rng(10);
  Scene scene = reset_scene(rng, cfg, table_for(cfg));
  ActionVector act = ActionVector::Constant(cfg.act_dim(), -cfg.a_max);
  while (!scene.done) step_scene(scene, act, cfg);
  CHECK(scene.reason == DoneReason::timeout);
  CHECK(scene.t_slot == 50);
}
