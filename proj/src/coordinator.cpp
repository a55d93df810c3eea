#include "crossroads/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <random>
#include <unordered_map>

#include "crossroads/bench.hpp"
#include "crossroads/driving.hpp"
#include "crossroads/env.hpp"
#include "crossroads/smoother.hpp"

namespace crossroads::coordinator {

using geometry::Pose2D;
using vehicle::Phase;
using vehicle::ReferencePath;

void queue_step(std::vector<int>& queue, const std::vector<int>& arrivals,
                const std::vector<int>& services) {
  if (arrivals.size() != queue.size() || services.size() != queue.size()) {
    throw std::invalid_argument("queue/arrival/service size mismatch");
  }
  for (std::size_t i = 0; i < queue.size(); ++i) {
    if (arrivals[i] < 0 || services[i] < 0) {
      throw std::invalid_argument("negative arrival or service count");
    }
    queue[i] = std::max(queue[i] + arrivals[i] - services[i], 0);
  }
}

double lyapunov(const std::vector<int>& queue, int n_roads, int n_lanes) {
  double sum = 0.0;
  for (int q : queue) {
    if (q < 0) throw std::invalid_argument("negative queue count");
    sum += static_cast<double>(q) * q;
  }
  return sum / (static_cast<double>(n_roads) * n_lanes);
}

FormedBatch form_batch(const std::vector<std::vector<int>>& waiting_by_lane,
                       const std::vector<VehicleRecord>& records,
                       const std::vector<int>& ids, const RunConfig& cfg,
                       const PathTable& table) {
  FormedBatch out;
  out.batch.resize(cfg.n_roads * cfg.n_lanes * cfg.batch_n);
  out.batch_ids.assign(out.batch.size(), -1);
  for (int road = 1; road <= cfg.n_roads; ++road) {
    for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
      const int lf = env::lane_flat(cfg, road, lane);
      const auto& waiting = waiting_by_lane[lf];
      const int take = std::min<int>(cfg.batch_n, waiting.size());
      for (int slot = 0; slot < cfg.batch_n; ++slot) {
        const int flat = env::vehicle_flat(cfg, road, lane, slot + 1);
        if (slot < take) {
          VehicleRecord rec = records[waiting[slot]];
          rec.slot_index = slot + 1;
          rec.phase = Phase::controlled;
          out.batch[flat] = rec;
          out.batch_ids[flat] = ids[waiting[slot]];
          ++out.n_real;
        } else {
          VehicleRecord pad;
          pad.road = road;
          pad.lane = lane;
          pad.slot_index = slot + 1;
          pad.s = 0.0;
          pad.v = cfg.v_low;
          pad.phase = Phase::virtual_pad;
          pad.path = table.get(road, lane, vehicle::Intention::straight);
          out.batch[flat] = pad;
        }
      }
    }
  }
  return out;
}

namespace {

// First slot at which a planned trajectory hits a leftover vehicle, together
// with the planned-vehicle index; -1 when clean.
int verify_against_leftovers(
    const std::vector<std::vector<SlotState>>& states,
    const std::vector<std::shared_ptr<const ReferencePath>>& paths,
    const std::vector<int>& ids, const PlanRequest& req, const RunConfig& cfg) {
  if (req.leftover_states.empty()) return -1;
  const auto fp = cfg.footprint();
  std::size_t horizon = 0;
  for (const auto& t : states) horizon = std::max(horizon, t.size());
  for (std::size_t k = 0; k < horizon; ++k) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (ids[i] < 0 || states[i].empty()) continue;
      const SlotState& st = states[i][std::min(k, states[i].size() - 1)];
      if (st.s >= paths[i]->total_length - 1e-9) continue;
      const Pose2D pose = driving::pose_any(*paths[i], st.s, cfg.l_w);
      const auto quad = geometry::occupied_region(pose, fp);
      for (std::size_t j = 0; j < req.leftover_states.size(); ++j) {
        const auto& lt = req.leftover_states[j];
        if (lt.empty()) continue;
        const SlotState& ls = lt[std::min(k, lt.size() - 1)];
        if (ls.s >= req.leftover_paths[j]->total_length - 1e-9) continue;
        const Pose2D lp = driving::pose_any(*req.leftover_paths[j], ls.s, cfg.l_w);
        if (std::hypot(lp.x - pose.x, lp.y - pose.y) >
            fp.region_length() + fp.region_width()) {
          continue;
        }
        if (!geometry::sat_disjoint(quad,
                                    geometry::occupied_region(lp, fp))) {
          return static_cast<int>(i);
        }
      }
    }
  }
  return -1;
}

std::vector<std::shared_ptr<const ReferencePath>> batch_paths(
    const PlanRequest& req) {
  std::vector<std::shared_ptr<const ReferencePath>> paths;
  paths.reserve(req.batch.size());
  for (const auto& veh : req.batch) paths.push_back(veh.path);
  return paths;
}

std::optional<BatchPlan> finish_plan(
    std::vector<std::vector<SlotState>> states, const PlanRequest& req,
    const RunConfig& cfg, bool fallback) {
  BatchPlan plan;
  plan.vehicle_ids = req.batch_ids;
  plan.states = std::move(states);
  plan.paths = batch_paths(req);
  plan.from_fallback = fallback;
  return plan;
}

std::optional<BatchPlan> cs_plan_for(const PlanRequest& req,
                                     const RunConfig& cfg,
                                     const PathTable& table, bool fallback) {
  bench::CsPlan cs = bench::cs_schedule(req.batch, cfg, table);
  const auto paths = batch_paths(req);
  if (verify_against_leftovers(cs.states, paths, req.batch_ids, req, cfg) >= 0) {
    return std::nullopt;  // wait for the leftovers to clear
  }
  return finish_plan(std::move(cs.states), req, cfg, fallback);
}

}  // namespace

Td3Planner::Td3Planner(td3::Td3Agent agent, bool smooth)
    : agent_(std::move(agent)), smooth_(smooth) {}

std::optional<BatchPlan> Td3Planner::plan(const PlanRequest& req,
                                          const RunConfig& cfg,
                                          const PathTable& table) {
  env::Scene scene;
  scene.vehicles = req.batch;
  scene.queue = req.queue_snapshot;
  scene.lane_done_time.assign(cfg.n_roads * cfg.n_lanes,
                              std::numeric_limits<double>::quiet_NaN());
  td3::Rollout roll = td3::rollout_policy(agent_, std::move(scene), cfg);
  rollout_ms_.push_back(roll.elapsed_ms);

  if (roll.reason != env::DoneReason::complete) {
    ++fallbacks_;
    return cs_plan_for(req, cfg, table, true);
  }

  auto states = std::move(roll.states);
  const auto paths = batch_paths(req);
  std::vector<char> was_smoothed(states.size(), 0);
  std::vector<std::vector<SlotState>> raw;
  if (smooth_) {
    raw = states;
    const auto report = smoother::smooth_batch(states, paths, cfg);
    was_smoothed = report.vehicle_smoothed;
  }

  int bad = verify_against_leftovers(states, paths, req.batch_ids, req, cfg);
  while (bad >= 0 && was_smoothed[bad]) {
    states[bad] = raw[bad];
    was_smoothed[bad] = 0;
    bad = verify_against_leftovers(states, paths, req.batch_ids, req, cfg);
  }
  if (bad >= 0) {
    ++fallbacks_;
    return cs_plan_for(req, cfg, table, true);
  }
  return finish_plan(std::move(states), req, cfg, false);
}

std::optional<BatchPlan> CsPlanner::plan(const PlanRequest& req,
                                         const RunConfig& cfg,
                                         const PathTable& table) {
  return cs_plan_for(req, cfg, table, false);
}

void write_event_header(std::ostream& out) {
  out << "t,event,road,lane,vehicle_id,x,y,v,a,phase\n";
}
void write_queue_header(std::ostream& out) {
  out << "t,road,lane,arrivals,services,count\n";
}

namespace {

struct WorldCar {
  int id = -1;
  double arrival_t = 0;
  VehicleRecord rec;
  int plan_start_slot = -1;
  std::vector<SlotState> plan;
  double last_a = 0;
  bool counted_ca_exit = false;
};

struct World {
  const RunConfig& cfg;
  const PathTable& table;
  EventSink sink;
  std::vector<WorldCar> cars;
  std::vector<std::vector<int>> lane_cars;  // in-zone ids, nearest-first
  std::vector<std::deque<int>> external;    // waiting outside, FIFO
  std::vector<int> current_batch;
  TrafficMetrics metrics;
  double last_ca_exit = 0;
  long slot = 0;

  explicit World(const RunConfig& c, const PathTable& t, EventSink s)
      : cfg(c), table(t), sink(s) {
    lane_cars.resize(cfg.n_roads * cfg.n_lanes);
    external.resize(cfg.n_roads * cfg.n_lanes);
  }

  double now() const { return slot * cfg.dt; }

  void log_event(const char* event, const WorldCar& car) {
    if (!sink.events) return;
    const Pose2D p = driving::pose_any(*car.rec.path, car.rec.s, cfg.l_w);
    (*sink.events) << now() << "," << event << "," << car.rec.road << ","
                   << car.rec.lane << "," << car.id << "," << p.x << "," << p.y
                   << "," << car.rec.v << "," << car.last_a << ","
                   << vehicle::to_string(car.rec.phase) << "\n";
  }

  int add_car(int road, int lane, vehicle::Intention intent, double arrival_t) {
    WorldCar car;
    car.id = static_cast<int>(cars.size());
    car.arrival_t = arrival_t;
    car.rec.road = road;
    car.rec.lane = lane;
    car.rec.s = 0.0;
    car.rec.v = cfg.v_low;
    car.rec.phase = Phase::waiting;
    car.rec.path = table.get(road, lane, intent);
    cars.push_back(std::move(car));
    ++metrics.vehicles_arrived;
    log_event("arrival", cars.back());
    return cars.back().id;
  }

  int waiting_total(int lf) const {
    int n = static_cast<int>(external[lf].size());
    for (int id : lane_cars[lf]) {
      if (cars[id].rec.phase == Phase::waiting) ++n;
    }
    return n;
  }

  void spawn_ready(int lf) {
    const double headway =
        cfg.footprint().region_length() + cfg.spacing_margin + 0.5;
    while (!external[lf].empty()) {
      bool clear = true;
      if (!lane_cars[lf].empty()) {
        const WorldCar& tail = cars[lane_cars[lf].back()];
        clear = tail.rec.s >= headway;
      }
      if (!clear) break;
      const int id = external[lf].front();
      external[lf].pop_front();
      lane_cars[lf].push_back(id);
      log_event("spawn", cars[id]);
    }
  }

  bool gate_open() const {
    for (int id : current_batch) {
      const WorldCar& car = cars[id];
      if (car.rec.s < car.rec.path->ca_exit_s - 1e-9) return false;
    }
    return true;
  }

  void step_vehicles() {
    for (int lf = 0; lf < static_cast<int>(lane_cars.size()); ++lf) {
      const auto ids = lane_cars[lf];
      std::vector<double> prev_s(ids.size()), prev_v(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        prev_s[i] = cars[ids[i]].rec.s;
        prev_v[i] = cars[ids[i]].rec.v;
      }
      for (std::size_t i = 0; i < ids.size(); ++i) {
        WorldCar& car = cars[ids[i]];
        if (car.rec.exited()) continue;
        if (car.rec.phase == Phase::waiting) {
          const double gate =
              car.rec.path->ca_entry_s - cfg.stop_margin;
          const double* lead_s = i > 0 ? &prev_s[i - 1] : nullptr;
          const double* lead_v = i > 0 ? &prev_v[i - 1] : nullptr;
          const double a = driving::drive_accel(car.rec.s, car.rec.v,
                                                cfg.v_low, cfg, &gate, lead_s,
                                                lead_v);
          car.rec = vehicle::step_vehicle(car.rec, a, cfg.dt, cfg.v_max);
          car.last_a = a;
        } else {
          const long k = slot - car.plan_start_slot + 1;
          if (k >= 0 && k < static_cast<long>(car.plan.size())) {
            car.last_a = car.plan[k - 1 >= 0 ? k - 1 : 0].a;
            car.rec.s = car.plan[k].s;
            car.rec.v = car.plan[k].v;
          } else {
            // Plan exhausted; leave at the safe-vehicle cruise rule.
            const double a = std::min(cfg.a_max, (cfg.v_max - car.rec.v) / cfg.dt);
            car.rec = vehicle::step_vehicle(car.rec, a, cfg.dt, cfg.v_max);
            car.last_a = a;
          }
          if (car.rec.phase == Phase::controlled &&
              car.rec.s >= car.rec.path->ca_exit_s) {
            car.rec.phase = Phase::safe;
            log_event("safe", car);
          }
          if (!car.counted_ca_exit && car.rec.s >= car.rec.path->ca_exit_s) {
            car.counted_ca_exit = true;
            last_ca_exit = now() + cfg.dt;
            ++metrics.vehicles_served;
          }
        }
      }
    }
  }

  double travel_sum = 0;
  long exited_count = 0;

  void collect_exits() {
    for (auto& ids : lane_cars) {
      for (std::size_t i = ids.size(); i-- > 0;) {
        WorldCar& car = cars[ids[i]];
        if (car.rec.exited()) {
          travel_sum += (now() + cfg.dt) - car.arrival_t;
          ++exited_count;
          log_event("exit", car);
          ids.erase(ids.begin() + i);
        }
      }
    }
  }

  void check_exec_collision() {
    std::vector<Pose2D> poses;
    std::vector<int> owner;
    for (const auto& ids : lane_cars) {
      for (int id : ids) {
        const WorldCar& car = cars[id];
        if (car.rec.exited()) continue;
        poses.push_back(driving::pose_any(*car.rec.path, car.rec.s, cfg.l_w));
        owner.push_back(id);
      }
    }
    if (const auto hit = geometry::detect_collision(poses, cfg.footprint())) {
      ++metrics.exec_collisions;
      log_event("exec_collision", cars[owner[hit->first]]);
    }
  }
};

}  // namespace

TrafficMetrics run_dynamic(Planner& planner, const RunConfig& cfg,
                           const DynamicOptions& opt, unsigned long seed,
                           const PathTable& table, EventSink sink) {
  World world(cfg, table, sink);
  std::mt19937_64 rng(seed);
  const double rate = opt.arrival_rate >= 0 ? opt.arrival_rate : cfg.arrival_rate;
  std::poisson_distribution<int> poisson(rate * cfg.dt);
  const int lanes = cfg.n_roads * cfg.n_lanes;
  std::vector<int> ledger(lanes, 0);

  // Pre-queued saturated start: heads stopped at the line, overflow outside.
  if (opt.initial_queue_per_lane > 0) {
    const double gap =
        cfg.footprint().region_length() + cfg.spacing_margin + 0.25;
    for (int road = 1; road <= cfg.n_roads; ++road) {
      for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
        const int lf = env::lane_flat(cfg, road, lane);
        const auto legal = vehicle::legal_intentions(lane, cfg.n_lanes);
        std::uniform_int_distribution<int> pick(
            0, static_cast<int>(legal.size()) - 1);
        for (int i = 0; i < opt.initial_queue_per_lane; ++i) {
          vehicle::Intention want =
              opt.fixed_intention.value_or(legal[pick(rng)]);
          if (!vehicle::intention_legal(lane, cfg.n_lanes, want)) {
            want = vehicle::Intention::straight;
          }
          const int id = world.add_car(road, lane, want, 0.0);
          WorldCar& car = world.cars[id];
          const double s =
              car.rec.path->ca_entry_s - cfg.stop_margin - i * gap;
          if (s >= 0.0) {
            car.rec.s = s;
            car.rec.v = 0.0;
            world.lane_cars[lf].push_back(id);
          } else {
            world.external[lf].push_back(id);
          }
          ledger[lf] += 1;
        }
      }
    }
  }

  const long total_slots =
      opt.max_slots > 0 ? opt.max_slots
                        : static_cast<long>(opt.duration_s / cfg.dt);

  for (world.slot = 0; world.slot < total_slots; ++world.slot) {
    std::vector<int> arrivals(lanes, 0), services(lanes, 0);

    if (rate > 0.0) {
      for (int road = 1; road <= cfg.n_roads; ++road) {
        for (int lane = 1; lane <= cfg.n_lanes; ++lane) {
          const int lf = env::lane_flat(cfg, road, lane);
          const int n = poisson(rng);
          const auto legal = vehicle::legal_intentions(lane, cfg.n_lanes);
          std::uniform_int_distribution<int> pick(
              0, static_cast<int>(legal.size()) - 1);
          for (int i = 0; i < n; ++i) {
            vehicle::Intention want =
                opt.fixed_intention.value_or(legal[pick(rng)]);
            if (!vehicle::intention_legal(lane, cfg.n_lanes, want)) {
              want = vehicle::Intention::straight;
            }
            const int id = world.add_car(road, lane, want, world.now());
            world.external[lf].push_back(id);
            arrivals[lf] += 1;
          }
        }
      }
    }
    for (int lf = 0; lf < lanes; ++lf) world.spawn_ready(lf);

    // Batch formation once the previous batch has cleared the conflict area.
    if (world.gate_open()) {
      std::vector<std::vector<int>> waiting(lanes);
      bool any = false;
      for (int lf = 0; lf < lanes; ++lf) {
        for (int id : world.lane_cars[lf]) {
          if (world.cars[id].rec.phase == Phase::waiting) {
            waiting[lf].push_back(id);
            any = true;
          }
        }
      }
      if (any) {
        std::vector<VehicleRecord> records(world.cars.size());
        std::vector<int> ids(world.cars.size());
        for (const auto& car : world.cars) {
          records[car.id] = car.rec;
          ids[car.id] = car.id;
        }
        FormedBatch formed = form_batch(waiting, records, ids, cfg, table);

        PlanRequest req;
        req.batch = formed.batch;
        req.batch_ids = formed.batch_ids;
        req.queue_snapshot.assign(lanes, 0);
        for (int lf = 0; lf < lanes; ++lf) {
          int promoted = 0;
          for (int id : formed.batch_ids) {
            if (id >= 0 && env::lane_flat(cfg, world.cars[id].rec.road,
                                          world.cars[id].rec.lane) == lf) {
              ++promoted;
            }
          }
          req.queue_snapshot[lf] = world.waiting_total(lf) - promoted;
        }
        for (const auto& car : world.cars) {
          if (car.rec.phase == Phase::safe && !car.rec.exited()) {
            req.leftover_paths.push_back(car.rec.path);
            std::vector<SlotState> rest;
            const long k0 = world.slot - car.plan_start_slot;
            if (k0 >= 0 && k0 < static_cast<long>(car.plan.size())) {
              rest.assign(car.plan.begin() + k0, car.plan.end());
            } else {
              rest.push_back({car.rec.s, car.rec.v, 0.0});
            }
            req.leftover_states.push_back(std::move(rest));
          }
        }

        if (auto plan = planner.plan(req, cfg, table)) {
          if (plan->from_fallback) ++world.metrics.policy_collisions;
          world.current_batch.clear();
          for (std::size_t i = 0; i < plan->vehicle_ids.size(); ++i) {
            const int id = plan->vehicle_ids[i];
            if (id < 0) continue;
            WorldCar& car = world.cars[id];
            car.rec.phase = Phase::controlled;
            car.plan = plan->states[i];
            car.plan_start_slot = static_cast<int>(world.slot);
            world.current_batch.push_back(id);
            services[env::lane_flat(cfg, car.rec.road, car.rec.lane)] += 1;
            world.log_event(plan->from_fallback ? "policy_collision" : "promote",
                            car);
          }
        }
      }
    }

    world.step_vehicles();
    world.collect_exits();
    world.check_exec_collision();

    queue_step(ledger, arrivals, services);
    if (sink.queues) {
      for (int lf = 0; lf < lanes; ++lf) {
        if (arrivals[lf] != 0 || services[lf] != 0) {
          (*sink.queues) << world.now() << "," << lf / cfg.n_lanes + 1 << ","
                         << lf % cfg.n_lanes + 1 << "," << arrivals[lf] << ","
                         << services[lf] << "," << ledger[lf] << "\n";
        }
      }
    }
    world.metrics.lyapunov_trace.push_back(
        lyapunov(ledger, cfg.n_roads, cfg.n_lanes));

    if (opt.stop_when_served &&
        world.metrics.vehicles_served >= world.metrics.vehicles_arrived &&
        world.metrics.vehicles_arrived > 0) {
      bool done = true;
      for (const auto& ids : world.lane_cars) {
        if (!ids.empty()) done = false;
      }
      for (const auto& ext : world.external) {
        if (!ext.empty()) done = false;
      }
      if (done) {
        ++world.slot;
        break;
      }
    }
  }

  TrafficMetrics m = std::move(world.metrics);
  m.sim_seconds = world.slot * cfg.dt;
  m.avg_travel_time =
      world.exited_count > 0 ? world.travel_sum / world.exited_count : 0.0;
  m.total_passing_time = world.last_ca_exit;
  if (m.vehicles_served > 0 && world.last_ca_exit > 0) {
    m.throughput = opt.stop_when_served || rate <= 0.0
                       ? m.vehicles_served / world.last_ca_exit
                       : m.vehicles_served / m.sim_seconds;
  }
  return m;
}

TrafficMetrics measure_throughput(Planner& planner, const RunConfig& cfg,
                                  int queued_per_lane, unsigned long seed,
                                  const PathTable& table,
                                  std::optional<Intention> intent) {
  DynamicOptions opt;
  opt.arrival_rate = 0.0;
  opt.initial_queue_per_lane = queued_per_lane;
  opt.fixed_intention = intent;
  opt.stop_when_served = true;
  opt.max_slots = static_cast<long>(60.0 * queued_per_lane / cfg.dt) + 36000;
  return run_dynamic(planner, cfg, opt, seed, table);
}

}  // namespace crossroads::coordinator
