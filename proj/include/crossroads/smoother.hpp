#pragma once

#include <array>
#include <memory>
#include <stdexcept>
#include <vector>

#include "crossroads/config.hpp"
#include "crossroads/td3.hpp"
#include "crossroads/vehicle.hpp"

namespace crossroads::smoother {

using config::RunConfig;
using td3::SlotState;

struct DegenerateHorizon : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct BoundaryState {
  double s = 0;
  double v = 0;
  double a = 0;
};

// s(t) = w0 + w1 t + ... + w5 t^5 over t in [0, T].
struct QuinticCoefficients {
  std::array<double, 6> w{};
  double horizon = 0;
};

QuinticCoefficients fit_quintic(const BoundaryState& start,
                                const BoundaryState& end, double horizon);

// (s, v, a) at time t.
BoundaryState eval_quintic(const QuinticCoefficients& coeffs, double t);

struct SmoothReport {
  int smoothed = 0;
  int reverted = 0;
  std::vector<char> vehicle_smoothed;  // per vehicle, 1 if the quintic held
};

// Replaces each trajectory's pre-conflict-area segment with a quintic matched
// to the raw states at both ends, then re-verifies velocity/acceleration
// bounds and pairwise collisions per slot; any violating vehicle reverts to
// its raw profile. Trajectories are slot tables aligned at a common t0.
SmoothReport smooth_batch(
    std::vector<std::vector<SlotState>>& trajectories,
    const std::vector<std::shared_ptr<const vehicle::ReferencePath>>& paths,
    const RunConfig& cfg);

// Largest |jerk| before the conflict-area entry slot (finite differences of
// the acceleration column).
double max_pre_ca_jerk(const std::vector<SlotState>& traj,
                       const vehicle::ReferencePath& path, double dt);

}  // namespace crossroads::smoother
