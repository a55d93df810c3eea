#include "crossroads/smoother.hpp"

#include <algorithm>
#include <cmath>

namespace crossroads::smoother {

using geometry::Pose2D;

namespace {

// Solve the 6x6 boundary system in normalized time tau = t / T (fixed,
// well-conditioned matrix), then rescale: w_i = w~_i / T^i.
std::array<double, 6> solve_normalized(const std::array<double, 6>& rhs) {
  double m[6][7] = {
      {1, 0, 0, 0, 0, 0, rhs[0]},
      {0, 1, 0, 0, 0, 0, rhs[1]},
      {0, 0, 2, 0, 0, 0, rhs[2]},
      {1, 1, 1, 1, 1, 1, rhs[3]},
      {0, 1, 2, 3, 4, 5, rhs[4]},
      {0, 0, 2, 6, 12, 20, rhs[5]},
  };
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 6; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 6; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    std::swap(m[col], m[pivot]);
    for (int r = col + 1; r < 6; ++r) {
      const double f = m[r][col] / m[col][col];
      if (f == 0.0) continue;
      for (int c = col; c < 7; ++c) m[r][c] -= f * m[col][c];
    }
  }
  std::array<double, 6> out{};
  for (int r = 5; r >= 0; --r) {
    double acc = m[r][6];
    for (int c = r + 1; c < 6; ++c) acc -= m[r][c] * out[c];
    out[r] = acc / m[r][r];
  }
  return out;
}

}  // namespace

QuinticCoefficients fit_quintic(const BoundaryState& start,
                                const BoundaryState& end, double horizon) {
  if (!(horizon > 1e-9)) {
    throw DegenerateHorizon("quintic horizon must exceed 1e-9 s");
  }
  const double T = horizon;
  const std::array<double, 6> rhs = {start.s,     T * start.v, T * T * start.a,
                                     end.s,       T * end.v,   T * T * end.a};
  const std::array<double, 6> scaled = solve_normalized(rhs);
  QuinticCoefficients coeffs;
  coeffs.horizon = T;
  double pow_t = 1.0;
  for (int i = 0; i < 6; ++i) {
    coeffs.w[i] = scaled[i] / pow_t;
    pow_t *= T;
  }
  return coeffs;
}

BoundaryState eval_quintic(const QuinticCoefficients& coeffs, double t) {
  const auto& w = coeffs.w;
  BoundaryState out;
  out.s = ((((w[5] * t + w[4]) * t + w[3]) * t + w[2]) * t + w[1]) * t + w[0];
  out.v = (((5 * w[5] * t + 4 * w[4]) * t + 3 * w[3]) * t + 2 * w[2]) * t + w[1];
  out.a = ((20 * w[5] * t + 12 * w[4]) * t + 6 * w[3]) * t + 2 * w[2];
  return out;
}

namespace {

int ca_entry_slot(const std::vector<SlotState>& traj,
                  const vehicle::ReferencePath& path) {
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (traj[k].s >= path.ca_entry_s) return static_cast<int>(k);
  }
  return -1;
}

bool constraints_ok(const std::vector<SlotState>& traj, const RunConfig& cfg,
                    double total_length) {
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const SlotState& st = traj[k];
    if (st.v < -1e-9 || st.v > cfg.v_max + 1e-9) return false;
    if (st.a < -cfg.a_max - 1e-9 || st.a > cfg.a_max + 1e-9) return false;
    if (st.s < -1e-9 || st.s > total_length + 1e-9) return false;
    if (k > 0 && st.s < traj[k - 1].s - 1e-9) return false;
  }
  return true;
}

}  // namespace

SmoothReport smooth_batch(
    std::vector<std::vector<SlotState>>& trajectories,
    const std::vector<std::shared_ptr<const vehicle::ReferencePath>>& paths,
    const RunConfig& cfg) {
  const std::size_t n = trajectories.size();
  SmoothReport report;
  report.vehicle_smoothed.assign(n, 0);
  const std::vector<std::vector<SlotState>> raw = trajectories;

  for (std::size_t i = 0; i < n; ++i) {
    if (!paths[i] || trajectories[i].size() < 3) continue;
    const int entry = ca_entry_slot(trajectories[i], *paths[i]);
    if (entry < 2) continue;  // nothing to smooth before the conflict area

    const double T = entry * cfg.dt;
    const SlotState& s0 = raw[i][0];
    const SlotState& s1 = raw[i][entry];
    QuinticCoefficients coeffs;
    try {
      coeffs = fit_quintic({s0.s, s0.v, s0.a}, {s1.s, s1.v, s1.a}, T);
    } catch (const DegenerateHorizon&) {
      continue;
    }
    for (int k = 0; k <= entry; ++k) {
      const BoundaryState st = eval_quintic(coeffs, k * cfg.dt);
      trajectories[i][k] = {st.s, st.v, st.a};
    }
    if (!constraints_ok(trajectories[i], cfg, paths[i]->total_length)) {
      trajectories[i] = raw[i];
    } else {
      report.vehicle_smoothed[i] = 1;
    }
  }

  // Collision re-verification; smoothed vehicles revert one at a time until
  // the batch is clean. All-raw is collision-free by precondition.
  const auto fp = cfg.footprint();
  std::size_t horizon = 0;
  for (const auto& t : trajectories) horizon = std::max(horizon, t.size());
  bool clean = false;
  while (!clean) {
    clean = true;
    for (std::size_t k = 0; k < horizon && clean; ++k) {
      std::vector<Pose2D> poses;
      std::vector<std::size_t> owner;
      for (std::size_t i = 0; i < n; ++i) {
        if (!paths[i] || trajectories[i].empty()) continue;
        const SlotState& st =
            trajectories[i][std::min(k, trajectories[i].size() - 1)];
        if (st.s >= paths[i]->total_length - 1e-9) continue;
        poses.push_back(vehicle::path_pose(*paths[i], st.s, cfg.l_w).first);
        owner.push_back(i);
      }
      if (const auto hit = geometry::detect_collision(poses, fp)) {
        std::size_t revert = owner[hit->second];
        if (!report.vehicle_smoothed[revert]) revert = owner[hit->first];
        if (!report.vehicle_smoothed[revert]) {
          // Raw-vs-raw contact; nothing smoothing can undo here.
          break;
        }
        trajectories[revert] = raw[revert];
        report.vehicle_smoothed[revert] = 0;
        report.reverted += 1;
        clean = false;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    report.smoothed += report.vehicle_smoothed[i];
  }
  return report;
}

double max_pre_ca_jerk(const std::vector<SlotState>& traj,
                       const vehicle::ReferencePath& path, double dt) {
  double worst = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    if (traj[k].s >= path.ca_entry_s) break;
    worst = std::max(worst, std::abs(traj[k].a - traj[k - 1].a) / dt);
  }
  return worst;
}

}  // namespace crossroads::smoother
