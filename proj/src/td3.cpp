#include "crossroads/td3.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace crossroads::td3 {

using neural::AdamState;
using neural::ForwardCache;
using neural::Gradients;
using neural::Head;
using neural::Mlp;

ReplayStore::ReplayStore(long capacity) : capacity_(capacity) {
  items_.reserve(std::min<long>(capacity, 1 << 16));
}

void ReplayStore::append(Experience e) {
  std::lock_guard<std::mutex> lock(mu_);
  if (static_cast<long>(items_.size()) < capacity_) {
    items_.push_back(std::move(e));
  } else {
    items_[cursor_] = std::move(e);
    cursor_ = (cursor_ + 1) % capacity_;
  }
}

long ReplayStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<long>(items_.size());
}

Batch ReplayStore::sample(int n, std::mt19937_64& rng) const {
  std::lock_guard<std::mutex> lock(mu_);
  const long filled = static_cast<long>(items_.size());
  if (filled < n) throw std::logic_error("replay store smaller than batch");

  std::unordered_set<long> picked;
  picked.reserve(n);
  std::uniform_int_distribution<long> u(0, filled - 1);
  while (static_cast<int>(picked.size()) < n) picked.insert(u(rng));

  const int obs_dim = static_cast<int>(items_.front().s.size());
  const int act_dim = static_cast<int>(items_.front().a.size());
  Batch batch;
  batch.s.resize(obs_dim, n);
  batch.a.resize(act_dim, n);
  batch.r.resize(n);
  batch.s2.resize(obs_dim, n);
  batch.d.resize(n);
  int col = 0;
  for (long idx : picked) {
    const Experience& e = items_[idx];
    batch.s.col(col) = e.s;
    batch.a.col(col) = e.a;
    batch.r[col] = e.r;
    batch.s2.col(col) = e.s2;
    batch.d[col] = e.d;
    ++col;
  }
  return batch;
}

Td3Agent Td3Agent::make(const RunConfig& cfg, std::mt19937_64& rng) {
  Td3Agent agent;
  agent.hp.gamma = cfg.gamma;
  agent.hp.tau = cfg.tau;
  agent.hp.a_max = cfg.a_max;
  agent.hp.sigma = cfg.sigma * cfg.a_max;
  agent.hp.policy_noise = cfg.policy_noise * cfg.a_max;
  agent.hp.noise_clip = cfg.clip_c * cfg.a_max;
  agent.hp.batch_size = cfg.batch_size;
  agent.hp.t_start = cfg.t_start;
  agent.hp.t_delay = cfg.t_delay;

  std::vector<int> critic_arch = cfg.net_arch;
  critic_arch.front() = cfg.obs_dim() + cfg.act_dim();
  critic_arch.back() = 1;

  agent.actor = Mlp(cfg.net_arch, Head::tanh_scaled, cfg.a_max);
  agent.critic1 = Mlp(critic_arch, Head::linear);
  agent.critic2 = Mlp(critic_arch, Head::linear);
  agent.actor.init(rng, 0.1);
  agent.critic1.init(rng);
  agent.critic2.init(rng);
  agent.target_actor = agent.actor;
  agent.target_critic1 = agent.critic1;
  agent.target_critic2 = agent.critic2;
  agent.opt_actor = AdamState::like(agent.actor, cfg.lr_actor);
  agent.opt_critic1 = AdamState::like(agent.critic1, cfg.lr_critic);
  agent.opt_critic2 = AdamState::like(agent.critic2, cfg.lr_critic);
  return agent;
}

namespace {

ActionVector select_from_actor(const Mlp& actor, double a_max,
                               const Observation& obs, double sigma,
                               std::mt19937_64& rng) {
  ActionVector act = actor.forward_one(obs);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < act.size(); ++i) act[i] += noise(rng);
  }
  return act.cwiseMax(-a_max).cwiseMin(a_max);
}

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& s,
                             const Eigen::MatrixXd& a) {
  Eigen::MatrixXd x(s.rows() + a.rows(), s.cols());
  x.topRows(s.rows()) = s;
  x.bottomRows(a.rows()) = a;
  return x;
}

}  // namespace

ActionVector select_action(const Td3Agent& agent, const Observation& obs,
                           double sigma, std::mt19937_64& rng) {
  return select_from_actor(agent.actor, agent.hp.a_max, obs, sigma, rng);
}

Eigen::VectorXd td_target(const Td3Agent& agent, const Batch& batch,
                          std::mt19937_64& rng) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  Eigen::MatrixXd next_a = agent.target_actor.forward(batch.s2);
  if (agent.hp.policy_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, agent.hp.policy_noise);
    for (Eigen::Index j = 0; j < next_a.cols(); ++j) {
      for (Eigen::Index i = 0; i < next_a.rows(); ++i) {
        next_a(i, j) += std::clamp(noise(rng), -agent.hp.noise_clip,
                                   agent.hp.noise_clip);
      }
    }
  }
  next_a = next_a.cwiseMax(-agent.hp.a_max).cwiseMin(agent.hp.a_max);

  const Eigen::MatrixXd x = critic_input(batch.s2, next_a);
  const Eigen::VectorXd q1 = agent.target_critic1.forward(x).row(0);
  const Eigen::VectorXd q2 = agent.target_critic2.forward(x).row(0);
  return batch.r.array() +
         agent.hp.gamma * (1.0 - batch.d.array()) * q1.cwiseMin(q2).array();
}

double critic_update(Td3Agent& agent, const Batch& batch,
                     const Eigen::VectorXd& targets) {
  const int n = batch.size();
  const Eigen::MatrixXd x = critic_input(batch.s, batch.a);
  double loss_sum = 0.0;

  auto update_one = [&](Mlp& critic, AdamState& opt) {
    ForwardCache cache;
    const Eigen::VectorXd q = critic.forward(x, &cache).row(0);
    const Eigen::VectorXd residual = q - targets;
    loss_sum += residual.squaredNorm() / n;
    Eigen::MatrixXd grad_out(1, n);
    grad_out.row(0) = (2.0 / n) * residual;
    const Gradients grads = critic.backward(cache, grad_out);
    neural::adam_step(critic, grads, opt);
  };
  update_one(agent.critic1, agent.opt_critic1);
  update_one(agent.critic2, agent.opt_critic2);
  agent.critic_update_count += 1;
  return loss_sum / 2.0;
}

double actor_update(Td3Agent& agent, const Batch& batch) {
  const int n = batch.size();
  ForwardCache actor_cache;
  const Eigen::MatrixXd actions = agent.actor.forward(batch.s, &actor_cache);

  ForwardCache critic_cache;
  const Eigen::MatrixXd x = critic_input(batch.s, actions);
  const Eigen::VectorXd q = agent.critic1.forward(x, &critic_cache).row(0);
  const double objective = q.mean();

  Eigen::MatrixXd dq(1, n);
  dq.setConstant(1.0 / n);
  Eigen::MatrixXd dx;
  agent.critic1.backward(critic_cache, dq, &dx);
  const Eigen::MatrixXd da = dx.bottomRows(actions.rows());

  Gradients grads = agent.actor.backward(actor_cache, da);
  for (auto& gw : grads.w) gw = -gw;  // ascend
  for (auto& gb : grads.b) gb = -gb;
  neural::adam_step(agent.actor, grads, agent.opt_actor);
  agent.actor_update_count += 1;
  return objective;
}

void update_targets(Td3Agent& agent) {
  neural::soft_update(agent.actor, agent.target_actor, agent.hp.tau);
  neural::soft_update(agent.critic1, agent.target_critic1, agent.hp.tau);
  neural::soft_update(agent.critic2, agent.target_critic2, agent.hp.tau);
}

namespace {

void append_net(checkpoint::Checkpoint& ckpt, const std::string& prefix,
                const Mlp& net) {
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    checkpoint::NamedTensor wt;
    wt.name = prefix + ".w" + std::to_string(l);
    wt.dims = {net.w[l].rows(), net.w[l].cols()};
    wt.data.resize(net.w[l].size());
    for (Eigen::Index i = 0; i < net.w[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < net.w[l].cols(); ++j) {
        wt.data[i * net.w[l].cols() + j] = net.w[l](i, j);
      }
    }
    ckpt.tensors.push_back(std::move(wt));

    checkpoint::NamedTensor bt;
    bt.name = prefix + ".b" + std::to_string(l);
    bt.dims = {net.b[l].size()};
    bt.data.assign(net.b[l].data(), net.b[l].data() + net.b[l].size());
    ckpt.tensors.push_back(std::move(bt));
  }
}

void read_net(const checkpoint::Checkpoint& ckpt, const std::string& prefix,
              Mlp& net) {
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    const auto& wt = ckpt.tensor(prefix + ".w" + std::to_string(l));
    if (wt.dims.size() != 2 || wt.dims[0] != net.w[l].rows() ||
        wt.dims[1] != net.w[l].cols()) {
      throw std::runtime_error("checkpoint tensor " + wt.name +
                               " does not match the configured architecture");
    }
    for (Eigen::Index i = 0; i < net.w[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < net.w[l].cols(); ++j) {
        net.w[l](i, j) = wt.data[i * net.w[l].cols() + j];
      }
    }
    const auto& bt = ckpt.tensor(prefix + ".b" + std::to_string(l));
    if (bt.dims.size() != 1 || bt.dims[0] != net.b[l].size()) {
      throw std::runtime_error("checkpoint tensor " + bt.name +
                               " does not match the configured architecture");
    }
    for (Eigen::Index i = 0; i < net.b[l].size(); ++i) net.b[l](i) = bt.data[i];
  }
}

}  // namespace

checkpoint::Checkpoint to_checkpoint(const Td3Agent& agent,
                                     const RunConfig& cfg) {
  checkpoint::Checkpoint ckpt;
  ckpt.header.emplace_back("obs_dim", std::to_string(cfg.obs_dim()));
  ckpt.header.emplace_back("act_dim", std::to_string(cfg.act_dim()));
  std::istringstream cfg_lines(config::serialize_config(cfg));
  std::string line;
  while (std::getline(cfg_lines, line)) {
    const auto eq = line.find(" = ");
    ckpt.header.emplace_back("cfg." + line.substr(0, eq), line.substr(eq + 3));
  }
  append_net(ckpt, "actor", agent.actor);
  append_net(ckpt, "critic1", agent.critic1);
  append_net(ckpt, "critic2", agent.critic2);
  append_net(ckpt, "target_actor", agent.target_actor);
  append_net(ckpt, "target_critic1", agent.target_critic1);
  append_net(ckpt, "target_critic2", agent.target_critic2);
  return ckpt;
}

Td3Agent from_checkpoint(const checkpoint::Checkpoint& ckpt,
                         const RunConfig& cfg) {
  std::mt19937_64 dummy(0);
  Td3Agent agent = Td3Agent::make(cfg, dummy);
  read_net(ckpt, "actor", agent.actor);
  read_net(ckpt, "critic1", agent.critic1);
  read_net(ckpt, "critic2", agent.critic2);
  read_net(ckpt, "target_actor", agent.target_actor);
  read_net(ckpt, "target_critic1", agent.target_critic1);
  read_net(ckpt, "target_critic2", agent.target_critic2);
  return agent;
}

void save_agent(const Td3Agent& agent, const RunConfig& cfg,
                const std::string& path) {
  checkpoint::save_checkpoint(path, to_checkpoint(agent, cfg));
}

Td3Agent load_agent(const std::string& path, const RunConfig& cfg) {
  return from_checkpoint(checkpoint::load_checkpoint(path), cfg);
}

Rollout rollout_policy(const Td3Agent& agent, Scene scene,
                       const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Rollout out;
  out.states.resize(scene.vehicles.size());
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    out.states[i].push_back({scene.vehicles[i].s, scene.vehicles[i].v, 0.0});
  }

  while (!scene.done) {
    const Observation obs =
        env::normalize_observation(env::observe(scene, cfg), cfg);
    ActionVector act = agent.actor.forward_one(obs);
    act = act.cwiseMax(-agent.hp.a_max).cwiseMin(agent.hp.a_max);
    env::StepInfo info;
    out.total_reward += env::step_scene(scene, act, cfg, &info).total();
    for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
      out.states[i].back().a = info.executed[static_cast<int>(i)];
      out.states[i].push_back({scene.vehicles[i].s, scene.vehicles[i].v, 0.0});
    }
    out.slots += 1;
    out.reason = scene.reason;
  }
  out.elapsed_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return out;
}

std::pair<ActionVector, double> act_batch_latency(const Td3Agent& agent,
                                                  const Scene& scene,
                                                  const RunConfig& cfg) {
  const Observation obs =
      env::normalize_observation(env::observe(scene, cfg), cfg);
  ActionVector first = agent.actor.forward_one(obs);
  first = first.cwiseMax(-agent.hp.a_max).cwiseMin(agent.hp.a_max);
  const Rollout roll = rollout_policy(agent, scene, cfg);
  return {first, roll.elapsed_ms};
}

double evaluate_collision_free(const Td3Agent& agent, const RunConfig& cfg,
                               const vehicle::PathTable& table,
                               unsigned long eval_seed, int n_scenes) {
  std::mt19937_64 rng(eval_seed);
  int ok = 0;
  for (int i = 0; i < n_scenes; ++i) {
    Scene scene = env::reset_scene(rng, cfg, table);
    const Rollout roll = rollout_policy(agent, std::move(scene), cfg);
    if (roll.reason == env::DoneReason::complete) ++ok;
  }
  return static_cast<double>(ok) / n_scenes;
}

namespace {

struct EpisodeStats {
  double ret = 0;
  long steps = 0;
  long random_steps = 0;
  bool collided = false;
};

const char* source_label(const EpisodeStats& ep) {
  if (ep.random_steps == ep.steps) return "random";
  if (ep.random_steps > 0) return "mixed";
  return "policy";
}

class TrainLogger {
 public:
  TrainLogger(const std::string& out_prefix, TrainResult& result)
      : result_(result), csv_(out_prefix + "_train_log.csv") {
    csv_ << "episode,steps,return,collisions,epsilon_source\n";
  }

  void log(int episode, const EpisodeStats& ep) {
    std::lock_guard<std::mutex> lock(mu_);
    EpisodeLog row{episode, ep.steps, ep.ret, ep.collided ? 1 : 0,
                   source_label(ep)};
    csv_ << row.episode << "," << row.steps << "," << row.ret << ","
         << row.collisions << "," << row.action_source << "\n";
    csv_.flush();
    result_.log.push_back(std::move(row));
  }

 private:
  std::mutex mu_;
  TrainResult& result_;
  std::ofstream csv_;
};

}  // namespace

TrainResult train(const RunConfig& cfg, unsigned long seed,
                  const std::string& out_prefix,
                  const vehicle::PathTable& table, std::ostream* progress) {
  int workers = cfg.n_workers;
  if (const int cap = config::thread_cap(); cap > 0) {
    workers = std::min(workers, cap);
  }

  std::mt19937_64 init_rng(seed);
  Td3Agent agent = Td3Agent::make(cfg, init_rng);
  ReplayStore replay(cfg.replay_capacity);
  TrainResult result;
  TrainLogger logger(out_prefix, result);
  std::mt19937_64 learn_rng(seed * 7919 + 101);

  const std::string best_path = out_prefix + "_best.ckpt";
  const std::string final_path = out_prefix + "_final.ckpt";
  const unsigned long eval_seed = seed ^ 0xE7A1CAFEUL;
  double best_rate = -1.0;

  auto maybe_eval = [&](int episodes_done) {
    if (episodes_done % cfg.checkpoint_every != 0 &&
        episodes_done != cfg.episodes) {
      return;
    }
    const double rate = evaluate_collision_free(agent, cfg, table, eval_seed, 50);
    if (rate > best_rate) {
      best_rate = rate;
      save_agent(agent, cfg, best_path);
    }
    save_agent(agent, cfg, out_prefix + "_last.ckpt");
    if (progress) {
      (*progress) << "episode " << episodes_done << " eval collision-free "
                  << rate << " best " << best_rate << std::endl;
    }
  };

  auto learner_step = [&]() {
    const Batch batch = replay.sample(cfg.batch_size, learn_rng);
    const Eigen::VectorXd y = td_target(agent, batch, learn_rng);
    critic_update(agent, batch, y);
    if (agent.critic_update_count % cfg.t_delay == 0) {
      actor_update(agent, batch);
      update_targets(agent);
    }
  };

  if (workers <= 1) {
    std::mt19937_64 env_rng(seed * 7919 + 1);
    std::mt19937_64 noise_rng(seed * 7919 + 2);
    long total_steps = 0;
    for (int episode = 1; episode <= cfg.episodes; ++episode) {
      Scene scene = env::reset_scene(env_rng, cfg, table);
      Observation obs =
          env::normalize_observation(env::observe(scene, cfg), cfg);
      EpisodeStats ep;
      while (!scene.done) {
        ActionVector act(cfg.act_dim());
        if (total_steps < cfg.t_start) {
          std::uniform_real_distribution<double> u(-cfg.a_max, cfg.a_max);
          for (Eigen::Index i = 0; i < act.size(); ++i) act[i] = u(noise_rng);
          ep.random_steps += 1;
        } else {
          act = select_action(agent, obs, agent.hp.sigma, noise_rng);
        }
        env::StepInfo info;
        const double r = env::step_scene(scene, act, cfg, &info).total();
        Observation obs2 =
            env::normalize_observation(env::observe(scene, cfg), cfg);
        const double d_store = info.reason == env::DoneReason::collision ||
                                       info.reason == env::DoneReason::complete
                                   ? 1.0
                                   : 0.0;
        replay.append({obs, info.executed, r, obs2, d_store});
        obs = std::move(obs2);
        ep.ret += r;
        ep.steps += 1;
        total_steps += 1;
        if (info.reason == env::DoneReason::collision) ep.collided = true;
        if (total_steps > cfg.t_start &&
            replay.size() >= cfg.batch_size) {
          learner_step();
        }
      }
      logger.log(episode, ep);
      maybe_eval(episode);
    }
    result.total_steps = total_steps;
  } else {
    std::atomic<long> steps_total{0};
    std::atomic<int> episodes_started{0};
    std::atomic<int> episodes_done{0};
    std::atomic<bool> workers_finished{false};
    long updates_done = 0;
    const long lag_max = 4 * cfg.batch_size;

    std::mutex snap_mu;
    auto snapshot = std::make_shared<const Mlp>(agent.actor);
    auto get_actor = [&]() {
      std::lock_guard<std::mutex> lock(snap_mu);
      return snapshot;
    };
    auto publish_actor = [&]() {
      auto copy = std::make_shared<const Mlp>(agent.actor);
      std::lock_guard<std::mutex> lock(snap_mu);
      snapshot = std::move(copy);
    };

    std::mutex pace_mu;
    std::condition_variable pace_cv;   // learner -> workers
    std::condition_variable learn_cv;  // workers -> learner

    auto worker_fn = [&](int wid) {
      std::mt19937_64 env_rng(seed * 7919 + 1000 + wid * 2);
      std::mt19937_64 noise_rng(seed * 7919 + 1001 + wid * 2);
      while (true) {
        const int episode = episodes_started.fetch_add(1) + 1;
        if (episode > cfg.episodes) break;
        Scene scene = env::reset_scene(env_rng, cfg, table);
        Observation obs =
            env::normalize_observation(env::observe(scene, cfg), cfg);
        EpisodeStats ep;
        while (!scene.done) {
          {
            std::unique_lock<std::mutex> lock(pace_mu);
            pace_cv.wait(lock, [&] {
              const long steps = steps_total.load();
              return steps < cfg.t_start ||
                     steps - cfg.t_start - updates_done < lag_max;
            });
          }
          ActionVector act(cfg.act_dim());
          if (steps_total.load() < cfg.t_start) {
            std::uniform_real_distribution<double> u(-cfg.a_max, cfg.a_max);
            for (Eigen::Index i = 0; i < act.size(); ++i) {
              act[i] = u(noise_rng);
            }
            ep.random_steps += 1;
          } else {
            act = select_from_actor(*get_actor(), agent.hp.a_max, obs,
                                    agent.hp.sigma, noise_rng);
          }
          env::StepInfo info;
          const double r = env::step_scene(scene, act, cfg, &info).total();
          Observation obs2 =
              env::normalize_observation(env::observe(scene, cfg), cfg);
          const double d_store =
              info.reason == env::DoneReason::collision ||
                      info.reason == env::DoneReason::complete
                  ? 1.0
                  : 0.0;
          replay.append({std::move(obs), info.executed, r, obs2, d_store});
          obs = std::move(obs2);
          ep.ret += r;
          ep.steps += 1;
          steps_total.fetch_add(1);
          learn_cv.notify_one();
          if (info.reason == env::DoneReason::collision) ep.collided = true;
        }
        logger.log(episode, ep);
        episodes_done.fetch_add(1);
      }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn, w);

    std::thread closer([&] {
      for (auto& t : pool) t.join();
      workers_finished.store(true);
      learn_cv.notify_all();
    });

    int next_eval_milestone = cfg.checkpoint_every;
    while (true) {
      {
        std::unique_lock<std::mutex> lock(pace_mu);
        learn_cv.wait(lock, [&] {
          const long pending = steps_total.load() - cfg.t_start - updates_done;
          return workers_finished.load() ||
                 (pending > 0 && replay.size() >= cfg.batch_size);
        });
      }
      const long pending = steps_total.load() - cfg.t_start - updates_done;
      if (pending > 0 && replay.size() >= cfg.batch_size) {
        learner_step();
        ++updates_done;
        if (agent.critic_update_count % cfg.t_delay == 0) publish_actor();
        pace_cv.notify_all();
      } else if (workers_finished.load()) {
        break;
      }
      if (episodes_done.load() >= next_eval_milestone) {
        maybe_eval(next_eval_milestone);
        next_eval_milestone += cfg.checkpoint_every;
      }
    }
    closer.join();
    result.total_steps = steps_total.load();
  }

  maybe_eval(cfg.episodes);
  save_agent(agent, cfg, final_path);
  std::sort(result.log.begin(), result.log.end(),
            [](const EpisodeLog& a, const EpisodeLog& b) {
              return a.episode < b.episode;
            });
  result.final_checkpoint = final_path;
  result.best_checkpoint = best_rate >= 0 ? best_path : final_path;
  result.best_eval_rate = std::max(best_rate, 0.0);
  return result;
}

}  // namespace crossroads::td3
