#include "crossroads/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace crossroads::config {

double RunConfig::effective_lane_width() const {
  if (lane_width > 0.0) return lane_width;
  return ca_size / (2.0 * n_lanes);
}

vehicle::IntersectionGeometry RunConfig::intersection() const {
  vehicle::IntersectionGeometry g;
  g.n_roads = n_roads;
  g.n_lanes = n_lanes;
  g.ccz_radius = ccz_radius;
  g.ca_half_size = ca_size / 2.0;
  g.lane_width = effective_lane_width();
  g.r_left = r_left;
  g.r_right = r_right;
  return g;
}

vehicle::FootprintConfig RunConfig::footprint() const {
  return {l_car, w_car, d_lon, d_lat, l_w};
}

int RunConfig::joint_intent_dim() const {
  int d = 1;
  for (int n = 0; n < batch_n; ++n) d *= intention_alphabet();
  return d;
}

int RunConfig::obs_dim() const {
  return n_roads * joint_intent_dim() +
         n_roads * n_lanes * (1 + 3 * batch_n);
}

int RunConfig::act_dim() const { return n_roads * n_lanes * batch_n; }

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) throw ConfigError("config key '" + key + "': " + why);
  };
  require(n_roads == 4, "n_roads", "only 4-road intersections are supported");
  require(n_lanes >= 1 && n_lanes <= 8, "n_lanes", "must be in 1..8");
  require(ccz_radius > 0, "ccz_radius", "must be positive");
  require(ca_size > 0 && ca_size < 2 * ccz_radius, "ca_size",
          "must be positive and fit inside the control zone");
  require(r_left > 0, "r_left", "must be positive");
  require(r_right > 0, "r_right", "must be positive");
  require(effective_lane_width() > 0, "lane_width", "must be positive");
  require(n_lanes * effective_lane_width() <= ca_size / 2.0 + 1e-9,
          "lane_width", "lanes must fit within half the conflict area");
  require(l_car > 0, "l_car", "must be positive");
  require(w_car > 0, "w_car", "must be positive");
  require(d_lon > 0, "d_lon", "must be positive");
  require(d_lat > 0, "d_lat", "must be positive");
  require(l_w > 0 && l_w < l_car, "l_w", "must be positive and below l_car");
  require(v_max > 0, "v_max", "must be positive");
  require(a_max > 0, "a_max", "must be positive");
  require(delta_max > 0 && delta_max < M_PI / 2, "delta_max",
          "must be in (0, pi/2)");
  require(v_low > 0 && v_low <= v_max, "v_low", "must be in (0, v_max]");
  require(dt > 0, "dt", "must be positive");
  require(batch_n >= 1, "batch_n", "must be at least 1");
  require(timeout_slots > 0, "timeout_slots", "must be positive");
  require(queue_init_max >= 0, "queue_init_max", "must be nonnegative");
  require(spawn_gap_min >= 0, "spawn_gap_min", "must be nonnegative");
  require(spawn_band > 0, "spawn_band", "must be positive");
  require(spawn_v_min >= 0 && spawn_v_min <= spawn_v_max &&
              spawn_v_max <= v_max,
          "spawn_v_min", "need 0 <= spawn_v_min <= spawn_v_max <= v_max");
  require(net_arch.size() >= 2, "net_arch", "need at least input and output");
  require(net_arch.front() == obs_dim(), "net_arch",
          "input dim " + std::to_string(net_arch.front()) +
              " != observation dim " + std::to_string(obs_dim()));
  require(net_arch.back() == act_dim(), "net_arch",
          "output dim " + std::to_string(net_arch.back()) +
              " != action dim " + std::to_string(act_dim()));
  require(lr_actor > 0, "lr_actor", "must be positive");
  require(lr_critic > 0, "lr_critic", "must be positive");
  require(tau > 0 && tau <= 1, "tau", "must be in (0, 1]");
  require(sigma >= 0, "sigma", "must be nonnegative");
  require(policy_noise >= 0, "policy_noise", "must be nonnegative");
  require(clip_c >= 0, "clip_c", "must be nonnegative");
  require(gamma >= 0 && gamma < 1, "gamma", "must be in [0, 1)");
  require(batch_size > 0, "batch_size", "must be positive");
  require(episodes > 0, "episodes", "must be positive");
  require(t_start >= 0, "t_start", "must be nonnegative");
  require(t_delay >= 1, "t_delay", "must be at least 1");
  require(n_workers >= 1, "n_workers", "must be at least 1");
  require(replay_capacity > batch_size, "replay_capacity",
          "must exceed batch_size");
  require(checkpoint_every > 0, "checkpoint_every", "must be positive");
  require(arrival_rate >= 0, "arrival_rate", "must be nonnegative");
  if (!intersection().valid()) {
    throw ConfigError("config key 'ca_size': intersection geometry invalid");
  }
}

namespace {

std::string arch_to_string(const std::vector<int>& arch) {
  std::ostringstream os;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (i) os << ",";
    os << arch[i];
  }
  return os.str();
}

std::vector<int> parse_arch(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    auto add_int = [&v](const std::string& key, int RunConfig::*m) {
      v.push_back({key,
                   [m](const RunConfig& c) { return std::to_string(c.*m); },
                   [m, key](RunConfig& c, const std::string& s) {
                     try {
                       c.*m = std::stoi(s);
                     } catch (...) {
                       throw ConfigError("config key '" + key +
                                         "': not an integer: " + s);
                     }
                   }});
    };
    auto add_long = [&v](const std::string& key, long RunConfig::*m) {
      v.push_back({key,
                   [m](const RunConfig& c) { return std::to_string(c.*m); },
                   [m, key](RunConfig& c, const std::string& s) {
                     try {
                       c.*m = std::stol(s);
                     } catch (...) {
                       throw ConfigError("config key '" + key +
                                         "': not an integer: " + s);
                     }
                   }});
    };
    auto add_double = [&v](const std::string& key, double RunConfig::*m) {
      v.push_back({key,
                   [m](const RunConfig& c) { return format_double(c.*m); },
                   [m, key](RunConfig& c, const std::string& s) {
                     try {
                       c.*m = std::stod(s);
                     } catch (...) {
                       throw ConfigError("config key '" + key +
                                         "': not a number: " + s);
                     }
                   }});
    };
    add_int("n_roads", &RunConfig::n_roads);
    add_int("n_lanes", &RunConfig::n_lanes);
    add_double("ccz_radius", &RunConfig::ccz_radius);
    add_double("ca_size", &RunConfig::ca_size);
    add_double("r_left", &RunConfig::r_left);
    add_double("r_right", &RunConfig::r_right);
    add_double("lane_width", &RunConfig::lane_width);
    add_double("l_car", &RunConfig::l_car);
    add_double("w_car", &RunConfig::w_car);
    add_double("d_lon", &RunConfig::d_lon);
    add_double("d_lat", &RunConfig::d_lat);
    add_double("l_w", &RunConfig::l_w);
    add_double("v_max", &RunConfig::v_max);
    add_double("a_max", &RunConfig::a_max);
    add_double("delta_max", &RunConfig::delta_max);
    add_double("v_low", &RunConfig::v_low);
    add_double("dt", &RunConfig::dt);
    add_int("batch_n", &RunConfig::batch_n);
    add_int("timeout_slots", &RunConfig::timeout_slots);
    add_int("queue_init_max", &RunConfig::queue_init_max);
    add_double("spawn_gap_min", &RunConfig::spawn_gap_min);
    add_double("spawn_band", &RunConfig::spawn_band);
    add_double("spawn_v_min", &RunConfig::spawn_v_min);
    add_double("spawn_v_max", &RunConfig::spawn_v_max);
    add_double("spacing_margin", &RunConfig::spacing_margin);
    add_double("stop_margin", &RunConfig::stop_margin);
    v.push_back({"net_arch",
                 [](const RunConfig& c) { return arch_to_string(c.net_arch); },
                 [](RunConfig& c, const std::string& s) {
                   try {
                     c.net_arch = parse_arch(s);
                   } catch (...) {
                     throw ConfigError(
                         "config key 'net_arch': not a dim list: " + s);
                   }
                 }});
    add_double("lr_actor", &RunConfig::lr_actor);
    add_double("lr_critic", &RunConfig::lr_critic);
    add_double("tau", &RunConfig::tau);
    add_double("sigma", &RunConfig::sigma);
    add_double("policy_noise", &RunConfig::policy_noise);
    add_double("clip_c", &RunConfig::clip_c);
    add_double("gamma", &RunConfig::gamma);
    add_int("batch_size", &RunConfig::batch_size);
    add_int("episodes", &RunConfig::episodes);
    add_int("t_start", &RunConfig::t_start);
    add_int("t_delay", &RunConfig::t_delay);
    add_int("n_workers", &RunConfig::n_workers);
    add_long("replay_capacity", &RunConfig::replay_capacity);
    v.push_back({"seed",
                 [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& s) {
                   try {
                     c.seed = std::stoul(s);
                   } catch (...) {
                     throw ConfigError("config key 'seed': not an integer: " +
                                       s);
                   }
                 }});
    add_int("checkpoint_every", &RunConfig::checkpoint_every);
    add_double("arrival_rate", &RunConfig::arrival_rate);
    return v;
  }();
  return f;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value, got: " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool known = false;
    for (const Field& f : fields()) {
      if (f.key == key) {
        f.set(cfg, value);
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("config key '" + key + "': unknown key");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const Field& f : fields()) {
    os << f.key << " = " << f.get(cfg) << "\n";
  }
  return os.str();
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << serialize_config(cfg);
}

int thread_cap() {
  const char* env = std::getenv("CROSSROADS_THREADS");
  if (!env) return 0;
  const int n = std::atoi(env);
  return n > 0 ? n : 0;
}

}  // namespace crossroads::config
