#include "crossroads/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crossroads::env {

using geometry::Pose2D;

int Scene::n_real() const {
  int n = 0;
  for (const auto& v : vehicles) n += v.is_virtual() ? 0 : 1;
  return n;
}

int lane_flat(const RunConfig& cfg, int road, int lane) {
  return (road - 1) * cfg.n_lanes + (lane - 1);
}

int vehicle_flat(const RunConfig& cfg, int road, int lane, int slot) {
  return lane_flat(cfg, road, lane) * cfg.batch_n + (slot - 1);
}

std::vector<double> normalize_priorities(const std::vector<int>& queue) {
  long total = 0;
  for (int q : queue) {
    if (q < 0) throw std::invalid_argument("negative queue count");
    total += q;
  }
  std::vector<double> p(queue.size(), 0.0);
  if (total == 0) return p;
  for (std::size_t i = 0; i < queue.size(); ++i) {
    p[i] = static_cast<double>(queue[i]) / static_cast<double>(total);
  }
  return p;
}

std::vector<double> encode_intentions(
    const std::vector<std::vector<Intention>>& intentions, int n_lanes,
    int batch_n) {
  if (static_cast<int>(intentions.size()) != n_lanes) {
    throw std::invalid_argument("expected one intention row per lane");
  }
  int alphabet = 1;
  for (int k = 1; k <= n_lanes; ++k) {
    alphabet *= static_cast<int>(vehicle::legal_intentions(k, n_lanes).size());
  }

  long index = 0;
  for (int n = 0; n < batch_n; ++n) {
    int combo = 0;
    for (int k = 1; k <= n_lanes; ++k) {
      const auto legal = vehicle::legal_intentions(k, n_lanes);
      const Intention intent = intentions[k - 1].at(n);
      const auto it = std::find(legal.begin(), legal.end(), intent);
      if (it == legal.end()) {
        throw vehicle::IllegalIntention(std::string("lane ") +
                                        std::to_string(k) + " cannot go " +
                                        vehicle::to_string(intent));
      }
      combo = combo * static_cast<int>(legal.size()) +
              static_cast<int>(it - legal.begin());
    }
    index = index * alphabet + combo;
  }

  long size = 1;
  for (int n = 0; n < batch_n; ++n) size *= alphabet;
  std::vector<double> one_hot(size, 0.0);
  one_hot[index] = 1.0;
  return one_hot;
}

Observation observe(const Scene& scene, const RunConfig& cfg) {
  const std::vector<double> priorities = normalize_priorities(scene.queue);
  Observation obs(cfg.obs_dim());
  int at = 0;
  for (int road = 1; road <= cfg.n_roads; ++road) {
    std::vector<std::vector<Intention>> intents(cfg.n_lanes);
    for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
      for (int slot = 1; slot <= cfg.batch_n; ++slot) {
        const auto& veh = scene.vehicles[vehicle_flat(cfg, road, lane, slot)];
        intents[lane - 1].push_back(veh.path->intention);
      }
    }
    for (double d : encode_intentions(intents, cfg.n_lanes, cfg.batch_n)) {
      obs[at++] = d;
    }
    for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
      obs[at++] = priorities[lane_flat(cfg, road, lane)];
      for (int slot = 1; slot <= cfg.batch_n; ++slot) {
        const auto& veh = scene.vehicles[vehicle_flat(cfg, road, lane, slot)];
        const Pose2D pose = veh.pose(cfg.l_w);
        obs[at++] = pose.x;
        obs[at++] = pose.y;
        obs[at++] = veh.v;
      }
    }
  }
  return obs;
}

Observation normalize_observation(Observation obs, const RunConfig& cfg) {
  int at = 0;
  for (int road = 1; road <= cfg.n_roads; ++road) {
    at += cfg.joint_intent_dim();
    for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
      ++at;  // priority already in [0, 1]
      for (int slot = 1; slot <= cfg.batch_n; ++slot) {
        obs[at] /= cfg.ccz_radius;
        obs[at + 1] /= cfg.ccz_radius;
        obs[at + 2] /= cfg.v_max;
        at += 3;
      }
    }
  }
  return obs;
}

RewardBreakdown step_scene(Scene& scene, const ActionVector& action,
                           const RunConfig& cfg, StepInfo* info) {
  if (scene.done) throw std::logic_error("step_scene called on a done scene");
  if (action.size() != cfg.act_dim()) {
    throw std::invalid_argument("action dimension mismatch");
  }

  RewardBreakdown reward;
  ActionVector executed = ActionVector::Zero(action.size());
  std::vector<char> was_exited(scene.vehicles.size());
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    was_exited[i] = scene.vehicles[i].exited();
  }

  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    VehicleRecord& veh = scene.vehicles[i];
    if (veh.is_virtual() || was_exited[i]) continue;
    double a;
    if (veh.phase == Phase::safe) {
      a = std::min(cfg.a_max, (cfg.v_max - veh.v) / cfg.dt);
    } else {
      a = std::clamp(action[static_cast<int>(i)], -cfg.a_max, cfg.a_max);
    }
    executed[static_cast<int>(i)] = a;
    veh = vehicle::step_vehicle(veh, a, cfg.dt, cfg.v_max);
    if (veh.phase == Phase::controlled && veh.s >= veh.path->ca_exit_s) {
      veh.phase = Phase::safe;
    }
  }

  // Lane coordination times: set once, when the last real vehicle of the
  // lane has passed the conflict area.
  const double now = (scene.t_slot + 1) * cfg.dt;
  for (int road = 1; road <= cfg.n_roads; ++road) {
    for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
      const int lf = lane_flat(cfg, road, lane);
      if (!std::isnan(scene.lane_done_time[lf])) continue;
      bool any_real = false, all_safe = true;
      for (int slot = 1; slot <= cfg.batch_n; ++slot) {
        const auto& veh = scene.vehicles[vehicle_flat(cfg, road, lane, slot)];
        if (veh.is_virtual()) continue;
        any_real = true;
        if (veh.phase != Phase::safe) all_safe = false;
      }
      if (any_real && all_safe) scene.lane_done_time[lf] = now;
    }
  }

  int n_exited = 0;
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    const VehicleRecord& veh = scene.vehicles[i];
    if (veh.is_virtual()) continue;
    if (!was_exited[i] && veh.exited()) ++n_exited;
    if (!veh.exited()) reward.r_v += veh.v;
  }
  reward.r_s = 1000.0 * n_exited;

  // Collision check over every active pair (virtual and exited vehicles
  // excluded).
  std::vector<Pose2D> poses;
  std::vector<int> pose_owner;
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    const VehicleRecord& veh = scene.vehicles[i];
    if (veh.is_virtual() || veh.exited()) continue;
    poses.push_back(veh.pose(cfg.l_w));
    pose_owner.push_back(static_cast<int>(i));
  }
  const auto hit = geometry::detect_collision(poses, cfg.footprint());

  DoneReason reason = DoneReason::none;
  if (hit) {
    reward.r_c = -1000.0;
    reason = DoneReason::collision;
    scene.collision_pair = {pose_owner[hit->first], pose_owner[hit->second]};
  } else {
    bool all_exited = true;
    for (const auto& veh : scene.vehicles) {
      if (!veh.is_virtual() && !veh.exited()) all_exited = false;
    }
    if (all_exited && scene.n_real() > 0) {
      const auto p = normalize_priorities(scene.queue);
      double sum = 0.0;
      for (std::size_t lf = 0; lf < scene.lane_done_time.size(); ++lf) {
        if (!std::isnan(scene.lane_done_time[lf])) {
          sum += p[lf] / scene.lane_done_time[lf];
        }
      }
      reward.r_sa = 10000.0 * sum;
      reason = DoneReason::complete;
    } else if (scene.t_slot + 1 >= cfg.timeout_slots) {
      reason = DoneReason::timeout;
    }
  }

  scene.t_slot += 1;
  scene.done = reason != DoneReason::none;
  scene.reason = reason;
  if (info) {
    info->n_exited = n_exited;
    info->reason = reason;
    info->collision_pair = scene.collision_pair;
    info->executed = std::move(executed);
  }
  return reward;
}

namespace {

// Draw descending arc lengths inside [lo, hi] with pairwise gaps of at least
// min_gap; falls back to an evenly spaced stack if rejection fails.
std::vector<double> draw_spaced(std::mt19937_64& rng, int n, double lo,
                                double hi, double min_gap) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (int attempt = 0; attempt < 500; ++attempt) {
    std::vector<double> s(n);
    for (double& x : s) x = u(rng);
    std::sort(s.rbegin(), s.rend());
    bool ok = true;
    for (int i = 0; i + 1 < n; ++i) {
      if (s[i] - s[i + 1] < min_gap) ok = false;
    }
    if (ok) return s;
  }
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) s[i] = std::max(lo, hi - i * (min_gap + 0.5));
  return s;
}

}  // namespace

Scene reset_scene_partial(std::mt19937_64& rng, const RunConfig& cfg,
                          const PathTable& table,
                          const std::vector<int>& real_per_lane) {
  Scene scene;
  scene.vehicles.resize(cfg.n_roads * cfg.n_lanes * cfg.batch_n);
  scene.queue.resize(cfg.n_roads * cfg.n_lanes);
  scene.lane_done_time.assign(cfg.n_roads * cfg.n_lanes,
                              std::numeric_limits<double>::quiet_NaN());

  const double min_gap =
      cfg.footprint().region_length() + cfg.spacing_margin;
  std::uniform_real_distribution<double> vel(cfg.spawn_v_min, cfg.spawn_v_max);
  std::uniform_int_distribution<int> queue_draw(0, cfg.queue_init_max);

  for (int road = 1; road <= cfg.n_roads; ++road) {
    for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
      const int lf = lane_flat(cfg, road, lane);
      scene.queue[lf] = queue_draw(rng);
      const int n_real = std::clamp(real_per_lane[lf], 0, cfg.batch_n);

      const auto legal = vehicle::legal_intentions(lane, cfg.n_lanes);
      std::uniform_int_distribution<int> pick(0,
                                              static_cast<int>(legal.size()) - 1);
      std::vector<std::shared_ptr<const vehicle::ReferencePath>> paths(n_real);
      double hi = std::numeric_limits<double>::infinity();
      for (int slot = 0; slot < n_real; ++slot) {
        paths[slot] = table.get(road, lane, legal[pick(rng)]);
        hi = std::min(hi, paths[slot]->ca_entry_s - cfg.spawn_gap_min);
      }
      if (n_real > 0) {
        const double lo = std::max(0.0, hi - cfg.spawn_band);
        const auto arc = draw_spaced(rng, n_real, lo, hi, min_gap);
        for (int slot = 0; slot < n_real; ++slot) {
          VehicleRecord veh;
          veh.road = road;
          veh.lane = lane;
          veh.slot_index = slot + 1;
          veh.s = arc[slot];
          veh.v = vel(rng);
          veh.phase = Phase::controlled;
          veh.path = paths[slot];
          scene.vehicles[vehicle_flat(cfg, road, lane, slot + 1)] = veh;
        }
      }
      for (int slot = n_real; slot < cfg.batch_n; ++slot) {
        VehicleRecord veh;
        veh.road = road;
        veh.lane = lane;
        veh.slot_index = slot + 1;
        veh.s = 0.0;
        veh.v = cfg.v_low;
        veh.phase = Phase::virtual_pad;
        veh.path = table.get(road, lane, Intention::straight);
        scene.vehicles[vehicle_flat(cfg, road, lane, slot + 1)] = veh;
      }
    }
  }
  return scene;
}

Scene reset_scene(std::mt19937_64& rng, const RunConfig& cfg,
                  const PathTable& table) {
  return reset_scene_partial(
      rng, cfg, table,
      std::vector<int>(cfg.n_roads * cfg.n_lanes, cfg.batch_n));
}

}  // namespace crossroads::env
