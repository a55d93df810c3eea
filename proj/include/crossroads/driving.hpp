#pragma once

#include "crossroads/config.hpp"
#include "crossroads/vehicle.hpp"

namespace crossroads::driving {

using config::RunConfig;
using geometry::Pose2D;

// path_pose with linear extrapolation beyond both ends, for vehicles queued
// upstream of the control zone.
Pose2D pose_any(const vehicle::ReferencePath& path, double s, double l_w);

// Largest acceleration that keeps the vehicle able to stop before the given
// line under full braking (s advances by old-v * dt, so the bound acts on
// next-slot velocity).
double gate_accel_limit(double s, double v, double line, const RunConfig& cfg);

// Largest acceleration that keeps a same-lane follower able to stop behind
// its (also braking) predecessor with the required center gap.
double follow_accel_limit(double s, double v, double lead_s, double lead_v,
                          const RunConfig& cfg);

// Track a target speed subject to the optional gate line and predecessor.
double drive_accel(double s, double v, double v_target, const RunConfig& cfg,
                   const double* gate_line, const double* lead_s,
                   const double* lead_v);

}  // namespace crossroads::driving
