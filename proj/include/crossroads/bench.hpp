#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "crossroads/coordinator.hpp"
#include "crossroads/env.hpp"

namespace crossroads::bench {

using config::RunConfig;
using coordinator::TrafficMetrics;
using td3::SlotState;
using vehicle::PathTable;
using vehicle::VehicleRecord;

struct TooManyVehicles : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct OccupancyInterval {
  int vehicle = 0;  // index into the scheduled vehicle list
  double t_enter = 0;
  double t_exit = 0;
};

struct CsPlan {
  std::vector<std::vector<SlotState>> states;  // per vehicle, slot 0 = start
  std::vector<OccupancyInterval> intervals;    // real vehicles only
  double t_batch = 0;         // last conflict-area exit, seconds
  double total_passing = 0;   // last control-zone exit, seconds
};

// Collision-set schedule: vehicles ordered by distance to the conflict area
// (ties by road, lane, slot); each gets a time-optimal accelerate-and-cruise
// profile, delayed so that path-conflicting vehicles hold the conflict area
// one at a time, with a hold at the boundary when necessary.
CsPlan cs_schedule(const std::vector<VehicleRecord>& vehicles,
                   const RunConfig& cfg, const PathTable& table);

// Best total passing time found by exhaustive search over passing orders and
// piecewise-constant accelerations {-a_max, 0, a_max} per 0.5 s macro slot
// (the collision-set schedule is included as a candidate). At most three real
// vehicles.
double brute_force_optimum(const std::vector<VehicleRecord>& vehicles,
                           const RunConfig& cfg, const PathTable& table);

// Saturated-queue throughput of the collision-set strategy: the whole queue
// is scheduled in one shot (no batching), including vehicles still outside
// the control zone.
TrafficMetrics cs_throughput(const RunConfig& cfg, const PathTable& table,
                             int queued_per_lane,
                             std::optional<vehicle::Intention> intent =
                                 vehicle::Intention::left);

// Cyclic fixed-time signal plan; each phase holds a set of roads at green,
// followed by an all-red clearance.
struct SignalPhase {
  std::vector<int> roads;
  double green_s = 10.0;
};
struct SignalPlan {
  std::vector<SignalPhase> phases;
  double clear_s = 2.0;

  static SignalPlan per_approach(double green_s = 10.0, double clear_s = 2.0);
  static SignalPlan all_red(double hold_s = 10.0);
};

// Signal-gated baseline with the same kinematics, arrivals and car-following
// rules; reports average travel time from arrival to control-zone exit.
TrafficMetrics fixed_time_signal(const RunConfig& cfg, const SignalPlan& plan,
                                 double duration_s, unsigned long seed,
                                 const PathTable& table);

}  // namespace crossroads::bench
