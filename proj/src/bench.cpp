#include "crossroads/bench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <unordered_map>

#include "crossroads/driving.hpp"

namespace crossroads::driving {

Pose2D pose_any(const vehicle::ReferencePath& path, double s, double l_w) {
  if (s < 0.0) {
    const auto& seg = path.segments.front();
    const double c = std::cos(seg.start.psi), sn = std::sin(seg.start.psi);
    return {seg.start.x + s * c, seg.start.y + s * sn, seg.start.psi};
  }
  if (s > path.total_length) s = path.total_length;
  return vehicle::path_pose(path, s, l_w).first;
}

double gate_accel_limit(double s, double v, double line, const RunConfig& cfg) {
  const double s_next = s + v * cfg.dt;
  const double room = line - s_next;
  if (room <= 0.0) return cfg.a_max;  // already committed past the line
  const double v_allow = std::sqrt(2.0 * cfg.a_max * room);
  return (v_allow - v) / cfg.dt;
}

double follow_accel_limit(double s, double v, double lead_s, double lead_v,
                          const RunConfig& cfg) {
  const double required =
      cfg.footprint().region_length() + cfg.spacing_margin;
  const double gap = lead_s - (s + v * cfg.dt) - required;
  const double allow_sq = lead_v * lead_v + 2.0 * cfg.a_max * gap;
  const double v_allow = allow_sq > 0.0 ? std::sqrt(allow_sq) : 0.0;
  return (v_allow - v) / cfg.dt;
}

double drive_accel(double s, double v, double v_target, const RunConfig& cfg,
                   const double* gate_line, const double* lead_s,
                   const double* lead_v) {
  double a = (v_target - v) / cfg.dt;
  if (gate_line) a = std::min(a, gate_accel_limit(s, v, *gate_line, cfg));
  if (lead_s) a = std::min(a, follow_accel_limit(s, v, *lead_s, *lead_v, cfg));
  return std::clamp(a, -cfg.a_max, cfg.a_max);
}

}  // namespace crossroads::driving

namespace crossroads::bench {

using geometry::Pose2D;
using vehicle::Intention;
using vehicle::ReferencePath;

namespace {

// Time for a max-accelerate-then-cruise profile to cover distance d from
// speed v0.
double free_run_time(double d, double v0, const RunConfig& cfg) {
  if (d <= 0.0) return 0.0;
  const double t_acc = (cfg.v_max - v0) / cfg.a_max;
  const double d_acc = (cfg.v_max * cfg.v_max - v0 * v0) / (2.0 * cfg.a_max);
  if (d <= d_acc) {
    return (-v0 + std::sqrt(v0 * v0 + 2.0 * cfg.a_max * d)) / cfg.a_max;
  }
  return t_acc + (d - d_acc) / cfg.v_max;
}

double speed_after_free_run(double d, double v0, const RunConfig& cfg) {
  return std::min(cfg.v_max, std::sqrt(v0 * v0 + 2.0 * cfg.a_max * d));
}

// Brake to v_b, optionally hold, then full throttle. Realized as a phase
// clock so slot execution stays robust to quantization.
struct PhaseProfile {
  double brake_until = 0;
  double hold_until = 0;

  double desired_accel(double t, double v, const RunConfig& cfg) const {
    if (t < brake_until) return -cfg.a_max;
    if (t < hold_until) return 0.0;
    return std::min(cfg.a_max, (cfg.v_max - v) / cfg.dt);
  }
};

// Arrival time at distance d when braking to v_b first; -1 when the brake
// leg overshoots the distance.
double arrival_with_brake(double d, double v0, double v_b,
                          const RunConfig& cfg) {
  const double t1 = (v0 - v_b) / cfg.a_max;
  const double d1 = (v0 * v0 - v_b * v_b) / (2.0 * cfg.a_max);
  if (d1 > d) return -1.0;
  return t1 + free_run_time(d - d1, v_b, cfg);
}

// Profile that reaches distance d no earlier than t_target while arriving as
// fast as possible.
PhaseProfile delayed_profile(double d, double v0, double t_target,
                             const RunConfig& cfg) {
  PhaseProfile p;
  if (free_run_time(d, v0, cfg) >= t_target) return p;

  double v_lo = 0.0;
  if (arrival_with_brake(d, v0, 0.0, cfg) < 0.0) {
    // Cannot stop within d; brake as hard as distance allows.
    v_lo = std::sqrt(std::max(0.0, v0 * v0 - 2.0 * cfg.a_max * d));
    p.brake_until = (v0 - v_lo) / cfg.a_max;
    p.hold_until = p.brake_until;
    return p;
  }
  const double slowest = arrival_with_brake(d, v0, 0.0, cfg);
  if (slowest < t_target) {
    // Full stop plus a hold.
    p.brake_until = v0 / cfg.a_max;
    p.hold_until = p.brake_until + (t_target - slowest);
    return p;
  }
  double lo = v_lo, hi = v0;  // arrival time decreases as v_b grows
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (arrival_with_brake(d, v0, mid, cfg) >= t_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  p.brake_until = (v0 - lo) / cfg.a_max;
  p.hold_until = p.brake_until;
  return p;
}

struct Scheduled {
  int input_index = 0;
  const ReferencePath* path = nullptr;
  double s0 = 0, v0 = 0;
  PhaseProfile profile;
  double planned_exit = 0;
  std::vector<int> earlier_conflicts;  // indices into the schedule order
  bool entered = false, exited_ca = false;
  double t_enter = -1, t_exit = -1;
};

}  // namespace

CsPlan cs_schedule(const std::vector<VehicleRecord>& vehicles,
                   const RunConfig& cfg, const PathTable& table) {
  CsPlan plan;
  plan.states.resize(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    plan.states[i].push_back({vehicles[i].s, vehicles[i].v, 0.0});
  }

  std::vector<int> order;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (!vehicles[i].is_virtual()) order.push_back(static_cast<int>(i));
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double da = vehicles[a].path->ca_entry_s - vehicles[a].s;
    const double db = vehicles[b].path->ca_entry_s - vehicles[b].s;
    if (da != db) return da < db;
    if (vehicles[a].road != vehicles[b].road) {
      return vehicles[a].road < vehicles[b].road;
    }
    if (vehicles[a].lane != vehicles[b].lane) {
      return vehicles[a].lane < vehicles[b].lane;
    }
    return vehicles[a].slot_index < vehicles[b].slot_index;
  });
  if (order.empty()) return plan;

  // FIFO planning pass: entry no earlier than every conflicting
  // predecessor's planned conflict-area exit.
  std::vector<Scheduled> sched(order.size());
  const double pad = 1.5 * cfg.dt;
  for (std::size_t k = 0; k < order.size(); ++k) {
    Scheduled& sc = sched[k];
    sc.input_index = order[k];
    const VehicleRecord& veh = vehicles[order[k]];
    sc.path = veh.path.get();
    sc.s0 = veh.s;
    sc.v0 = veh.v;
    double t_allow = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (table.conflicting(*sched[j].path, *sc.path)) {
        sc.earlier_conflicts.push_back(static_cast<int>(j));
        t_allow = std::max(t_allow, sched[j].planned_exit + pad);
      }
    }
    const double d_entry = sc.path->ca_entry_s - sc.s0;
    sc.profile = delayed_profile(d_entry, sc.v0, t_allow, cfg);
    const double t_entry =
        std::max(t_allow, arrival_with_brake(
                              d_entry, sc.v0,
                              std::max(0.0, sc.v0 - cfg.a_max * sc.profile.brake_until),
                              cfg) +
                              (sc.profile.hold_until - sc.profile.brake_until));
    const double v_entry = speed_after_free_run(
        d_entry, std::max(0.0, sc.v0 - cfg.a_max * sc.profile.brake_until), cfg);
    sc.planned_exit =
        t_entry + free_run_time(sc.path->ca_exit_s - sc.path->ca_entry_s,
                                v_entry, cfg);
  }

  // Joint execution with reactive safety overrides: the conflict-area gate
  // waits for actual exits and same-lane followers keep a stoppable gap.
  std::vector<double> s(order.size()), v(order.size());
  std::vector<int> lane_ahead(order.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) {
    s[k] = sched[k].s0;
    v[k] = sched[k].v0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < order.size(); ++j) {
      if (j == k) continue;
      const VehicleRecord& a = vehicles[sched[k].input_index];
      const VehicleRecord& b = vehicles[sched[j].input_index];
      if (a.road == b.road && a.lane == b.lane && sched[j].s0 > sched[k].s0 &&
          sched[j].s0 < best) {
        best = sched[j].s0;
        lane_ahead[k] = static_cast<int>(j);
      }
    }
  }

  const long max_slots =
      static_cast<long>(200.0 * order.size() / cfg.dt) + 20000;
  long slot = 0;
  bool all_out = false;
  while (!all_out && slot < max_slots) {
    const double t = slot * cfg.dt;
    std::vector<double> s_prev = s, v_prev = v;
    all_out = true;
    for (std::size_t k = 0; k < order.size(); ++k) {
      Scheduled& sc = sched[k];
      if (s[k] >= sc.path->total_length - 1e-9) continue;
      all_out = false;

      double a = sc.profile.desired_accel(t, v[k], cfg);
      bool gate_open = true;
      for (int j : sc.earlier_conflicts) {
        if (!sched[j].exited_ca) gate_open = false;
      }
      if (!gate_open && !sc.entered) {
        a = std::min(a, driving::gate_accel_limit(
                            s[k], v[k], sc.path->ca_entry_s - cfg.stop_margin,
                            cfg));
      }
      if (lane_ahead[k] >= 0) {
        const int j = lane_ahead[k];
        if (s_prev[j] < sched[j].path->total_length - 1e-9) {
          a = std::min(a, driving::follow_accel_limit(s[k], v[k], s_prev[j],
                                                      v_prev[j], cfg));
        }
      }
      a = std::clamp(a, -cfg.a_max, cfg.a_max);

      s[k] = std::min(s[k] + v[k] * cfg.dt, sc.path->total_length);
      v[k] = std::clamp(v[k] + a * cfg.dt, 0.0, cfg.v_max);
      plan.states[sc.input_index].back().a = a;
      plan.states[sc.input_index].push_back({s[k], v[k], 0.0});

      const double now = (slot + 1) * cfg.dt;
      if (!sc.entered && s[k] >= sc.path->ca_entry_s) {
        sc.entered = true;
        sc.t_enter = now;
      }
      if (sc.entered && !sc.exited_ca && s[k] >= sc.path->ca_exit_s) {
        sc.exited_ca = true;
        sc.t_exit = now;
        plan.t_batch = std::max(plan.t_batch, now);
      }
      if (s[k] >= sc.path->total_length - 1e-9) {
        plan.total_passing = std::max(plan.total_passing, now);
      }
    }
    ++slot;
  }

  for (const Scheduled& sc : sched) {
    if (sc.entered) {
      plan.intervals.push_back({sc.input_index, sc.t_enter, sc.t_exit});
    }
  }
  return plan;
}

namespace {

struct DpResult {
  double exit_time = 0;
  std::vector<SlotState> table;
};

struct DpState {
  double s, v;
  long parent = -1;
  int action = 0;
};

// Minimum control-zone exit time over piecewise-constant accelerations per
// 0.5 s macro slot, avoiding the committed trajectories. Layered BFS with
// first-wins state merging on a fine (s, v) grid.
std::optional<DpResult> dp_min_time(
    const VehicleRecord& veh, const std::vector<std::vector<SlotState>>& fixed,
    const std::vector<const ReferencePath*>& fixed_paths, const RunConfig& cfg,
    const PathTable& table) {
  constexpr int kSub = 5;
  const double macro = kSub * cfg.dt;
  const int max_layers = static_cast<int>(60.0 / macro);
  const ReferencePath& path = *veh.path;
  const auto fp = cfg.footprint();

  // Pose cache for the committed vehicles per fine slot.
  std::vector<std::vector<Pose2D>> fixed_poses(fixed.size());
  std::vector<std::vector<char>> fixed_active(fixed.size());
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    fixed_poses[i].reserve(fixed[i].size());
    for (const SlotState& st : fixed[i]) {
      fixed_poses[i].push_back(
          driving::pose_any(*fixed_paths[i], st.s, cfg.l_w));
      fixed_active[i].push_back(st.s < fixed_paths[i]->total_length - 1e-9);
    }
  }

  auto key_of = [](double s, double v) {
    return (static_cast<long>(std::llround(s * 32.0)) << 20) ^
           static_cast<long>(std::llround(v * 32.0));
  };

  std::vector<std::vector<DpState>> layers(1);
  std::vector<std::unordered_map<long, long>> seen(1);
  layers[0].push_back({veh.s, veh.v, -1, 0});
  seen[0][key_of(veh.s, veh.v)] = 0;

  const double actions[3] = {cfg.a_max, 0.0, -cfg.a_max};
  double best_exit = -1.0;
  long best_parent = -1;
  int best_action = 0;
  int best_layer = -1;

  for (int layer = 0; layer < max_layers && best_exit < 0; ++layer) {
    if (layers[layer].empty()) break;
    layers.emplace_back();
    seen.emplace_back();
    for (long idx = 0; idx < static_cast<long>(layers[layer].size()); ++idx) {
      const DpState cur = layers[layer][idx];
      for (int ai = 0; ai < 3; ++ai) {
        double s = cur.s, v = cur.v;
        bool collided = false;
        double exit_at = -1.0;
        for (int j = 0; j < kSub && !collided; ++j) {
          s = std::min(s + v * cfg.dt, path.total_length);
          v = std::clamp(v + actions[ai] * cfg.dt, 0.0, cfg.v_max);
          const long fine = static_cast<long>(layer) * kSub + j + 1;
          if (s >= path.total_length - 1e-9 && exit_at < 0) {
            exit_at = fine * cfg.dt;
            break;
          }
          const Pose2D pose = driving::pose_any(path, s, cfg.l_w);
          const auto quad = geometry::occupied_region(pose, fp);
          for (std::size_t f = 0; f < fixed.size() && !collided; ++f) {
            if (fine >= static_cast<long>(fixed[f].size())) continue;
            if (!fixed_active[f][fine]) continue;
            const Pose2D& other = fixed_poses[f][fine];
            if (std::hypot(other.x - pose.x, other.y - pose.y) >
                fp.region_length() + 2.0) {
              continue;
            }
            if (!geometry::sat_disjoint(
                    quad, geometry::occupied_region(other, fp))) {
              collided = true;
            }
          }
        }
        if (collided) continue;
        if (exit_at >= 0) {
          if (best_exit < 0 || exit_at < best_exit) {
            best_exit = exit_at;
            best_parent = idx;
            best_action = ai;
            best_layer = layer;
          }
          continue;
        }
        const long key = key_of(s, v);
        auto& layer_seen = seen[layer + 1];
        if (layer_seen.find(key) == layer_seen.end()) {
          layer_seen[key] = static_cast<long>(layers[layer + 1].size());
          layers[layer + 1].push_back({s, v, idx, ai});
        }
      }
    }
  }
  if (best_exit < 0) return std::nullopt;

  // Reconstruct the macro action sequence, then integrate the fine table.
  std::vector<int> macro_actions;
  macro_actions.push_back(best_action);
  long at = best_parent;
  for (int layer = best_layer; layer > 0; --layer) {
    const DpState& st = layers[layer][at];
    macro_actions.push_back(st.action);
    at = st.parent;
  }
  std::reverse(macro_actions.begin(), macro_actions.end());

  DpResult out;
  out.exit_time = best_exit;
  double s = veh.s, v = veh.v;
  out.table.push_back({s, v, 0.0});
  for (int action : macro_actions) {
    for (int j = 0; j < kSub; ++j) {
      const double a = actions[action];
      out.table.back().a = a;
      s = std::min(s + v * cfg.dt, path.total_length);
      v = std::clamp(v + a * cfg.dt, 0.0, cfg.v_max);
      out.table.push_back({s, v, 0.0});
      if (s >= path.total_length - 1e-9) return out;
    }
  }
  return out;
}

}  // namespace

double brute_force_optimum(const std::vector<VehicleRecord>& vehicles,
                           const RunConfig& cfg, const PathTable& table) {
  std::vector<int> real;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (!vehicles[i].is_virtual()) real.push_back(static_cast<int>(i));
  }
  if (real.size() > 3) {
    throw TooManyVehicles("oracle accepts at most 3 real vehicles, got " +
                          std::to_string(real.size()));
  }
  if (real.empty()) return 0.0;

  double best = cs_schedule(vehicles, cfg, table).total_passing;

  std::vector<int> order = real;
  std::sort(order.begin(), order.end());
  do {
    std::vector<std::vector<SlotState>> committed;
    std::vector<const ReferencePath*> committed_paths;
    double latest = 0.0;
    bool feasible = true;
    for (int vi : order) {
      const auto res =
          dp_min_time(vehicles[vi], committed, committed_paths, cfg, table);
      if (!res) {
        feasible = false;
        break;
      }
      latest = std::max(latest, res->exit_time);
      if (latest >= best) {
        feasible = false;  // already dominated
        break;
      }
      committed.push_back(res->table);
      committed_paths.push_back(vehicles[vi].path.get());
    }
    if (feasible) best = std::min(best, latest);
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

namespace {

std::vector<VehicleRecord> stacked_queue(const RunConfig& cfg,
                                         const PathTable& table,
                                         int queued_per_lane,
                                         std::optional<Intention> intent,
                                         unsigned long seed) {
  std::mt19937_64 rng(seed);
  const double gap =
      cfg.footprint().region_length() + cfg.spacing_margin + 0.25;
  std::vector<VehicleRecord> out;
  for (int road = 1; road <= cfg.n_roads; ++road) {
    for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
      const auto legal = vehicle::legal_intentions(lane, cfg.n_lanes);
      std::uniform_int_distribution<int> pick(0,
                                              static_cast<int>(legal.size()) - 1);
      for (int i = 0; i < queued_per_lane; ++i) {
        VehicleRecord veh;
        veh.road = road;
        veh.lane = lane;
        veh.slot_index = i + 1;
        Intention want = intent.value_or(legal[pick(rng)]);
        if (!vehicle::intention_legal(lane, cfg.n_lanes, want)) {
          want = Intention::straight;
        }
        veh.path = table.get(road, lane, want);
        veh.s = veh.path->ca_entry_s - cfg.stop_margin - i * gap;
        veh.v = 0.0;
        veh.phase = vehicle::Phase::controlled;
        out.push_back(std::move(veh));
      }
    }
  }
  return out;
}

}  // namespace

TrafficMetrics cs_throughput(const RunConfig& cfg, const PathTable& table,
                             int queued_per_lane,
                             std::optional<Intention> intent) {
  const auto vehicles = stacked_queue(cfg, table, queued_per_lane, intent, 7);
  const CsPlan plan = cs_schedule(vehicles, cfg, table);
  TrafficMetrics m;
  m.vehicles_arrived = static_cast<long>(vehicles.size());
  m.vehicles_served = static_cast<long>(plan.intervals.size());
  m.total_passing_time = plan.total_passing;
  m.sim_seconds = plan.total_passing;
  if (plan.t_batch > 0) {
    m.throughput = static_cast<double>(m.vehicles_served) / plan.t_batch;
  }
  double travel = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& states = plan.states[i];
    if (!states.empty() &&
        states.back().s >= vehicles[i].path->total_length - 1e-9) {
      travel += (static_cast<double>(states.size()) - 1) * cfg.dt;
      ++n;
    }
  }
  if (n > 0) m.avg_travel_time = travel / n;
  return m;
}

SignalPlan SignalPlan::per_approach(double green_s, double clear_s) {
  SignalPlan plan;
  for (int road = 1; road <= 4; ++road) plan.phases.push_back({{road}, green_s});
  plan.clear_s = clear_s;
  return plan;
}

SignalPlan SignalPlan::all_red(double hold_s) {
  SignalPlan plan;
  plan.phases.push_back({{}, hold_s});
  plan.clear_s = 0.0;
  return plan;
}

TrafficMetrics fixed_time_signal(const RunConfig& cfg, const SignalPlan& plan,
                                 double duration_s, unsigned long seed,
                                 const PathTable& table) {
  if (plan.phases.empty()) throw config::ConfigError("signal plan is empty");
  double cycle = 0.0;
  for (const auto& ph : plan.phases) cycle += ph.green_s + plan.clear_s;
  auto road_green = [&](int road, double t) {
    double at = std::fmod(t, cycle);
    for (const auto& ph : plan.phases) {
      if (at < ph.green_s) {
        return std::find(ph.roads.begin(), ph.roads.end(), road) !=
               ph.roads.end();
      }
      at -= ph.green_s + plan.clear_s;
      if (at < 0.0) return false;  // clearance
    }
    return false;
  };

  struct Car {
    VehicleRecord rec;
    double arrival_t = 0;
    bool spawned = false;
  };
  const int lanes = cfg.n_roads * cfg.n_lanes;
  std::vector<std::vector<Car>> in_lane(lanes);   // sorted by descending s
  std::vector<std::deque<Car>> external(lanes);
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> poisson(cfg.arrival_rate * cfg.dt);

  TrafficMetrics m;
  const long slots = static_cast<long>(duration_s / cfg.dt);
  const double min_headway =
      cfg.footprint().region_length() + cfg.spacing_margin;
  double travel_sum = 0.0;

  for (long slot = 0; slot < slots; ++slot) {
    const double t = slot * cfg.dt;
    for (int road = 1; road <= cfg.n_roads; ++road) {
      for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
        const int lf = (road - 1) * cfg.n_lanes + (lane - 1);
        const int n_arrivals = poisson(rng);
        const auto legal = vehicle::legal_intentions(lane, cfg.n_lanes);
        std::uniform_int_distribution<int> pick(
            0, static_cast<int>(legal.size()) - 1);
        for (int i = 0; i < n_arrivals; ++i) {
          Car car;
          car.rec.road = road;
          car.rec.lane = lane;
          car.rec.path = table.get(road, lane, legal[pick(rng)]);
          car.rec.s = 0.0;
          car.rec.v = cfg.v_low;
          car.rec.phase = vehicle::Phase::waiting;
          car.arrival_t = t;
          external[lf].push_back(std::move(car));
          ++m.vehicles_arrived;
        }
        // Spawn when the lane tail has cleared the entrance.
        while (!external[lf].empty()) {
          const bool clear =
              in_lane[lf].empty() ||
              in_lane[lf].back().rec.s >= min_headway + 0.5;
          if (!clear) break;
          in_lane[lf].push_back(external[lf].front());
          external[lf].pop_front();
          in_lane[lf].back().spawned = true;
        }

        auto& cars = in_lane[lf];
        std::vector<double> prev_s(cars.size()), prev_v(cars.size());
        for (std::size_t i = 0; i < cars.size(); ++i) {
          prev_s[i] = cars[i].rec.s;
          prev_v[i] = cars[i].rec.v;
        }
        for (std::size_t i = 0; i < cars.size(); ++i) {
          Car& car = cars[i];
          const double gate =
              car.rec.path->ca_entry_s - cfg.stop_margin;
          const bool green = road_green(road, t);
          const bool past_line = car.rec.s >= gate;
          const double v_target =
              past_line || green ? cfg.v_max : cfg.v_low;
          const double* gate_ptr = (!past_line && !green) ? &gate : nullptr;
          const double* lead_s = i > 0 ? &prev_s[i - 1] : nullptr;
          const double* lead_v = i > 0 ? &prev_v[i - 1] : nullptr;
          const double a = driving::drive_accel(car.rec.s, car.rec.v, v_target,
                                                cfg, gate_ptr, lead_s, lead_v);
          car.rec = vehicle::step_vehicle(car.rec, a, cfg.dt, cfg.v_max);
        }
        for (std::size_t i = cars.size(); i-- > 0;) {
          if (cars[i].rec.exited()) {
            travel_sum += (t + cfg.dt) - cars[i].arrival_t;
            ++m.vehicles_served;
            cars.erase(cars.begin() + i);
          }
        }
      }
    }
    // Queue proxy: vehicles still short of the stop line plus externals.
    std::vector<int> backlog(lanes, 0);
    for (int lf = 0; lf < lanes; ++lf) {
      backlog[lf] = static_cast<int>(external[lf].size());
      for (const Car& car : in_lane[lf]) {
        if (car.rec.s < car.rec.path->ca_entry_s - cfg.stop_margin) {
          ++backlog[lf];
        }
      }
    }
    m.lyapunov_trace.push_back(
        coordinator::lyapunov(backlog, cfg.n_roads, cfg.n_lanes));
  }

  m.sim_seconds = duration_s;
  if (m.vehicles_served > 0) {
    m.avg_travel_time = travel_sum / m.vehicles_served;
    m.throughput = m.vehicles_served / duration_s;
  }
  return m;
}

}  // namespace crossroads::bench
