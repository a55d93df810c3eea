#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossroads/vehicle.hpp"

namespace crossroads::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key = value run configuration. Defaults reproduce the single-lane
// simulation column; the shipped files cover the other columns.
struct RunConfig {
  // Intersection
  int n_roads = 4;
  int n_lanes = 1;
  double ccz_radius = 50.0;
  double ca_size = 20.0;
  double r_left = 15.0;
  double r_right = 15.0;
  double lane_width = 0.0;  // 0 -> derived as ca_size / (2 * n_lanes)

  // Vehicle
  double l_car = 4.0;
  double w_car = 2.0;
  double d_lon = 4.0;
  double d_lat = 2.0;
  double l_w = 2.7;
  double v_max = 15.0;
  double a_max = 5.0;
  double delta_max = 0.78;
  double v_low = 5.0;
  double dt = 0.1;

  // Batching / episode
  int batch_n = 1;
  int timeout_slots = 600;
  int queue_init_max = 10;
  double spawn_gap_min = 2.0;   // band edge closest to the conflict area, m
  double spawn_band = 32.0;     // band depth upstream of that edge, m
  double spawn_v_min = 0.0;
  double spawn_v_max = 5.0;
  double spacing_margin = 0.5;  // extra gap on top of the occupied length
  double stop_margin = 0.5;     // waiting stop offset behind the CA line

  // Networks / training
  std::vector<int> net_arch = {28, 256, 256, 4};
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  double tau = 5e-3;
  double sigma = 0.1;         // exploration noise, fraction of a_max
  double policy_noise = 0.2;  // target smoothing noise, fraction of a_max
  double clip_c = 0.5;        // smoothing clip, fraction of a_max
  double gamma = 0.99;
  int batch_size = 128;
  int episodes = 2000;
  int t_start = 25000;
  int t_delay = 2;
  int n_workers = 6;
  long replay_capacity = 1000000;
  unsigned long seed = 1;
  int checkpoint_every = 200;

  // Dynamic coordination
  double arrival_rate = 0.2;  // vehicles per second per lane

  vehicle::IntersectionGeometry intersection() const;
  vehicle::FootprintConfig footprint() const;
  double effective_lane_width() const;
  int obs_dim() const;
  int act_dim() const;
  int intention_alphabet() const { return n_lanes == 1 ? 3 : 4; }
  int joint_intent_dim() const;  // D_r

  // Throws ConfigError naming the offending key.
  void validate() const;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

// Worker-count cap from the CROSSROADS_THREADS environment variable
// (0 = no cap configured).
int thread_cap();

}  // namespace crossroads::config
