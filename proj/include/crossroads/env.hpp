#pragma once

#include <Eigen/Core>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "crossroads/config.hpp"
#include "crossroads/vehicle.hpp"

namespace crossroads::env {

using config::RunConfig;
using vehicle::Intention;
using vehicle::PathTable;
using vehicle::Phase;
using vehicle::VehicleRecord;

using Observation = Eigen::VectorXd;
using ActionVector = Eigen::VectorXd;

struct RewardBreakdown {
  double r_sa = 0, r_v = 0, r_c = 0, r_s = 0;
  double total() const { return r_sa + r_v + r_c + r_s; }
};

enum class DoneReason { none, collision, complete, timeout };

// One batch-coordination episode. Vehicles are stored road-major, then lane,
// then slot (slot 1 = closest to the conflict area).
struct Scene {
  std::vector<VehicleRecord> vehicles;
  std::vector<int> queue;             // I per lane, road-major
  std::vector<double> lane_done_time;  // T_{r,k}, NaN until the lane clears the CA
  int t_slot = 0;
  bool done = false;
  DoneReason reason = DoneReason::none;
  std::pair<int, int> collision_pair{-1, -1};

  int n_real() const;
};

struct StepInfo {
  int n_exited = 0;
  DoneReason reason = DoneReason::none;
  std::pair<int, int> collision_pair{-1, -1};
  ActionVector executed;  // accelerations actually applied
};

int lane_flat(const RunConfig& cfg, int road, int lane);
int vehicle_flat(const RunConfig& cfg, int road, int lane, int slot);

// Eq.-style priority weights: I / sum(I), or all zeros when the queues are
// empty.
std::vector<double> normalize_priorities(const std::vector<int>& queue);

// One-hot joint-intention code for one road. intentions[k][n] covers lane
// k+1, slot n+1; slot 1 is the most significant digit.
std::vector<double> encode_intentions(
    const std::vector<std::vector<Intention>>& intentions, int n_lanes,
    int batch_n);

Observation observe(const Scene& scene, const RunConfig& cfg);
// Positions scaled by 1/ccz_radius and velocities by 1/v_max; intention and
// priority entries pass through.
Observation normalize_observation(Observation obs, const RunConfig& cfg);

RewardBreakdown step_scene(Scene& scene, const ActionVector& action,
                           const RunConfig& cfg, StepInfo* info = nullptr);

Scene reset_scene(std::mt19937_64& rng, const RunConfig& cfg,
                  const PathTable& table);
// Same draw but with a per-lane cap on real vehicles; short lanes are padded
// with virtual vehicles at the control-zone edge.
Scene reset_scene_partial(std::mt19937_64& rng, const RunConfig& cfg,
                          const PathTable& table,
                          const std::vector<int>& real_per_lane);

}  // namespace crossroads::env
