#pragma once

#include <functional>
#include <iosfwd>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "crossroads/checkpoint.hpp"
#include "crossroads/env.hpp"
#include "crossroads/neural.hpp"

namespace crossroads::td3 {

using config::RunConfig;
using env::ActionVector;
using env::Observation;
using env::Scene;

struct Experience {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0;
  Eigen::VectorXd s2;
  double d = 0;
};

struct Batch {
  Eigen::MatrixXd s;   // obs_dim x n
  Eigen::MatrixXd a;   // act_dim x n
  Eigen::VectorXd r;
  Eigen::MatrixXd s2;
  Eigen::VectorXd d;
  int size() const { return static_cast<int>(r.size()); }
};

// Uniform-replay ring buffer. Appends are atomic and samples observe a
// consistent prefix; minibatches are drawn without replacement.
class ReplayStore {
 public:
  explicit ReplayStore(long capacity);
  void append(Experience e);
  long size() const;
  Batch sample(int n, std::mt19937_64& rng) const;

 private:
  mutable std::mutex mu_;
  long capacity_;
  long cursor_ = 0;
  std::vector<Experience> items_;
};

// Noise scales are in raw action units (m/s^2). Table-style fractions of
// a_max are converted when the agent is built from a config.
struct Td3Hyper {
  double gamma = 0.99;
  double tau = 5e-3;
  double sigma = 0.5;
  double policy_noise = 1.0;
  double noise_clip = 2.5;
  double a_max = 5.0;
  int batch_size = 128;
  int t_start = 25000;
  int t_delay = 2;
};

struct Td3Agent {
  neural::Mlp actor, critic1, critic2;
  neural::Mlp target_actor, target_critic1, target_critic2;
  neural::AdamState opt_actor, opt_critic1, opt_critic2;
  Td3Hyper hp;
  long critic_update_count = 0;
  long actor_update_count = 0;

  static Td3Agent make(const RunConfig& cfg, std::mt19937_64& rng);
};

ActionVector select_action(const Td3Agent& agent, const Observation& obs,
                           double sigma, std::mt19937_64& rng);

// Clipped double-Q targets: y = r + gamma (1-d) min_i Q'_i(s', a~) with
// a~ = clip(pi'(s') + clip(N(0, sigma~), -c, c), -a_max, a_max).
Eigen::VectorXd td_target(const Td3Agent& agent, const Batch& batch,
                          std::mt19937_64& rng);

// One Adam step on each critic against shared targets; returns the mean of
// the two MSE losses.
double critic_update(Td3Agent& agent, const Batch& batch,
                     const Eigen::VectorXd& targets);

// One ascent step on mean Q1(s, pi(s)); returns the objective value.
double actor_update(Td3Agent& agent, const Batch& batch);

void update_targets(Td3Agent& agent);

checkpoint::Checkpoint to_checkpoint(const Td3Agent& agent,
                                     const RunConfig& cfg);
Td3Agent from_checkpoint(const checkpoint::Checkpoint& ckpt,
                         const RunConfig& cfg);
void save_agent(const Td3Agent& agent, const RunConfig& cfg,
                const std::string& path);
Td3Agent load_agent(const std::string& path, const RunConfig& cfg);

// Deterministic policy rollout of one scene to completion. Per-vehicle slot
// tables include the state before the first step.
struct SlotState {
  double s = 0, v = 0, a = 0;
};
struct Rollout {
  std::vector<std::vector<SlotState>> states;  // [vehicle][slot]
  int slots = 0;
  env::DoneReason reason = env::DoneReason::none;
  double elapsed_ms = 0;
  double total_reward = 0;
};
Rollout rollout_policy(const Td3Agent& agent, Scene scene,
                       const RunConfig& cfg);

// Wall-clock of one full predictive rollout, for the latency report.
std::pair<ActionVector, double> act_batch_latency(const Td3Agent& agent,
                                                  const Scene& scene,
                                                  const RunConfig& cfg);

struct EpisodeLog {
  int episode = 0;
  long steps = 0;
  double ret = 0;
  int collisions = 0;
  std::string action_source;  // random / mixed / policy
};

struct TrainResult {
  std::string final_checkpoint;
  std::string best_checkpoint;
  double best_eval_rate = 0;  // collision-free fraction at the best eval
  std::vector<EpisodeLog> log;
  long total_steps = 0;
};

// Algorithm-style training loop: W rollout workers feed one replay store, a
// single learner applies one critic update per global environment step after
// t_start, with delayed actor/target updates. n_workers == 1 runs fully
// sequential and is bitwise reproducible for a fixed seed.
TrainResult train(const RunConfig& cfg, unsigned long seed,
                  const std::string& out_prefix,
                  const vehicle::PathTable& table,
                  std::ostream* progress = nullptr);

// Collision-free completion rate of the deterministic policy over n random
// scenes.
double evaluate_collision_free(const Td3Agent& agent, const RunConfig& cfg,
                               const vehicle::PathTable& table,
                               unsigned long eval_seed, int n_scenes);

}  // namespace crossroads::td3
