#pragma once

#include "errt/mission.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace errt {

/// Everything a run needs: world source, seed and mission settings.
struct AppConfig {
  std::uint64_t seed = 1;
  std::string world_file;  // empty: generate world_kind from the seed
  WorldKind world_kind = WorldKind::Rooms;
  WorldGenParams world;
  std::optional<double> s_map;  // unset: 2 * S_r
  bool baseline = false;
  MissionConfig mission;

  AppConfig() {
    mission.l_local = 40.0;
    mission.sampler.n_traj = 60;
    mission.sensor.range = 10.0;
    mission.tree.n_max = 2000;
    mission.gain.d_info = 6.0;
    mission.gain.k_d = 0.3;
    mission.gain.k_i = 0.4;
    mission.gain.k_u = 0.1;
    mission.r_robot = 0.3;
  }

  /// Mission settings with derived values filled in.
  MissionConfig resolved_mission() const {
    MissionConfig m = mission;
    m.sensor.map_range = s_map ? *s_map : 2.0 * m.sensor.range;
    m.beams.vertical_fov = m.sensor.vertical_fov;
    return m;
  }

  WorldGenParams world_params() const {
    WorldGenParams p = world;
    p.r_robot = mission.r_robot;
    return p;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline double config_double(const std::string& key, std::string_view v) {
  double d = 0.0;
  if (!parse_double(v, d) || !std::isfinite(d)) throw ConfigError(key, "expected a number, got '" + std::string(v) + "'");
  return d;
}

inline long long config_int(const std::string& key, std::string_view v) {
  long long i = 0;
  if (!parse_int(v, i)) throw ConfigError(key, "expected an integer, got '" + std::string(v) + "'");
  return i;
}

inline bool config_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + std::string(v) + "'");
}

template <std::size_t N>
std::array<double, N> config_list(const std::string& key, std::string_view v) {
  std::array<double, N> out{};
  std::size_t i = 0;
  while (true) {
    const auto comma = v.find(',');
    if (i >= N) throw ConfigError(key, "expected " + std::to_string(N) + " comma-separated numbers");
    out[i++] = config_double(key, trim(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (i != N) throw ConfigError(key, "expected " + std::to_string(N) + " comma-separated numbers");
  return out;
}

template <std::size_t N>
std::string list_string(const std::array<double, N>& a) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + format_double(a[i]);
  return s;
}

struct ConfigKey {
  std::string name;
  std::function<std::string(const AppConfig&)> get;
  std::function<void(AppConfig&, const std::string&)> set;
};

template <typename Ref>
ConfigKey double_key(std::string name, Ref ref) {
  return {name, [ref](const AppConfig& c) { return format_double(ref(const_cast<AppConfig&>(c))); },
          [ref, name](AppConfig& c, const std::string& v) { ref(c) = config_double(name, v); }};
}

template <typename Ref>
ConfigKey int_key(std::string name, Ref ref) {
  return {name, [ref](const AppConfig& c) { return std::to_string(ref(const_cast<AppConfig&>(c))); },
          [ref, name](AppConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(ref(c))>;
            const long long i = config_int(name, v);
            if (i < static_cast<long long>(std::numeric_limits<T>::min()) ||
                i > static_cast<long long>(std::numeric_limits<T>::max()))
              throw ConfigError(name, "out of range");
            ref(c) = static_cast<T>(i);
          }};
}

template <typename Ref>
ConfigKey bool_key(std::string name, Ref ref) {
  return {name, [ref](const AppConfig& c) { return std::string(ref(const_cast<AppConfig&>(c)) ? "true" : "false"); },
          [ref, name](AppConfig& c, const std::string& v) { ref(c) = config_bool(name, v); }};
}

template <std::size_t N, typename Ref>
ConfigKey list_key(std::string name, Ref ref) {
  return {name, [ref](const AppConfig& c) { return list_string<N>(ref(const_cast<AppConfig&>(c))); },
          [ref, name](AppConfig& c, const std::string& v) { ref(c) = config_list<N>(name, v); }};
}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back({"seed", [](const AppConfig& c) { return std::to_string(c.seed); },
                 [](AppConfig& c, const std::string& v) {
                   std::uint64_t s = 0;
                   const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
                   if (ec != std::errc() || end != v.data() + v.size() || v.empty())
                     throw ConfigError("seed", "expected a non-negative integer, got '" + v + "'");
                   c.seed = s;
                 }});
    k.push_back({"world_file", [](const AppConfig& c) { return c.world_file; },
                 [](AppConfig& c, const std::string& v) { c.world_file = v; }});
    k.push_back({"world_kind", [](const AppConfig& c) { return to_string(c.world_kind); },
                 [](AppConfig& c, const std::string& v) { c.world_kind = parse_world_kind(v); }});
    k.push_back({"world_size",
                 [](const AppConfig& c) { return list_string<3>({c.world.size.x(), c.world.size.y(), c.world.size.z()}); },
                 [](AppConfig& c, const std::string& v) {
                   const auto a = config_list<3>("world_size", v);
                   c.world.size = Vec3(a[0], a[1], a[2]);
                 }});
    k.push_back(double_key("world_res", [](AppConfig& c) -> double& { return c.world.res; }));
    k.push_back({"start",
                 [](const AppConfig& c) {
                   if (!c.mission.start) return std::string("auto");
                   const Vec3& s = *c.mission.start;
                   return list_string<3>({s.x(), s.y(), s.z()});
                 },
                 [](AppConfig& c, const std::string& v) {
                   if (v == "auto") {
                     c.mission.start.reset();
                     return;
                   }
                   const auto a = config_list<3>("start", v);
                   c.mission.start = Vec3(a[0], a[1], a[2]);
                 }});
    k.push_back(bool_key("baseline", [](AppConfig& c) -> bool& { return c.baseline; }));
    k.push_back(double_key("r_robot", [](AppConfig& c) -> double& { return c.mission.r_robot; }));
    k.push_back(double_key("L_local", [](AppConfig& c) -> double& { return c.mission.l_local; }));
    k.push_back(double_key("time_budget_s", [](AppConfig& c) -> double& { return c.mission.time_budget_s; }));
    k.push_back(double_key("replan_fraction", [](AppConfig& c) -> double& { return c.mission.replan_fraction; }));
    k.push_back({"plan_time_model", [](const AppConfig& c) { return to_string(c.mission.plan_time); },
                 [](AppConfig& c, const std::string& v) { c.mission.plan_time = parse_plan_time_model(v); }});
    k.push_back(double_key("scan_every", [](AppConfig& c) -> double& { return c.mission.scan_every; }));
    k.push_back(int_key("settle_stages", [](AppConfig& c) -> int& { return c.mission.settle_stages; }));
    k.push_back(int_key("slow_retries", [](AppConfig& c) -> int& { return c.mission.slow_retries; }));
    k.push_back(int_key("threads", [](AppConfig& c) -> unsigned& { return c.mission.threads; }));
    k.push_back(double_key("S_r", [](AppConfig& c) -> double& { return c.mission.sensor.range; }));
    k.push_back({"S_theta_deg", [](const AppConfig& c) { return format_double(rad2deg(c.mission.sensor.vertical_fov)); },
                 [](AppConfig& c, const std::string& v) {
                   c.mission.sensor.vertical_fov = deg2rad(config_double("S_theta_deg", v));
                 }});
    k.push_back({"S_map",
                 [](const AppConfig& c) { return format_double(c.s_map ? *c.s_map : 2.0 * c.mission.sensor.range); },
                 [](AppConfig& c, const std::string& v) { c.s_map = config_double("S_map", v); }});
    k.push_back(int_key("lidar_beams", [](AppConfig& c) -> int& { return c.mission.beams.n_elev; }));
    k.push_back(int_key("lidar_azimuth", [](AppConfig& c) -> int& { return c.mission.beams.n_azim; }));
    k.push_back(int_key("n_traj", [](AppConfig& c) -> int& { return c.mission.sampler.n_traj; }));
    k.push_back(double_key("d_gc", [](AppConfig& c) -> double& { return c.mission.sampler.d_gc; }));
    k.push_back(double_key("d_goal_min", [](AppConfig& c) -> double& { return c.mission.sampler.d_goal_min; }));
    k.push_back(int_key("nu_min", [](AppConfig& c) -> int& { return c.mission.sampler.nu_min; }));
    k.push_back(int_key("max_attempts", [](AppConfig& c) -> int& { return c.mission.sampler.max_attempts; }));
    k.push_back(int_key("N_max", [](AppConfig& c) -> int& { return c.mission.tree.n_max; }));
    k.push_back(double_key("d_extend", [](AppConfig& c) -> double& { return c.mission.tree.d_extend; }));
    k.push_back(double_key("step", [](AppConfig& c) -> double& { return c.mission.tree.step; }));
    k.push_back(double_key("improve_budget_s", [](AppConfig& c) -> double& { return c.mission.tree.improve_budget_s; }));
    k.push_back(int_key("check_depth", [](AppConfig& c) -> int& { return c.mission.tree.check_depth; }));
    k.push_back(int_key("stall_limit", [](AppConfig& c) -> int& { return c.mission.tree.stall_limit; }));
    k.push_back(int_key("horizon", [](AppConfig& c) -> int& { return c.mission.nmpc.horizon; }));
    k.push_back(double_key("dt", [](AppConfig& c) -> double& { return c.mission.nmpc.dt; }));
    k.push_back(int_key("nmpc_max_iters", [](AppConfig& c) -> int& { return c.mission.nmpc.max_iters; }));
    k.push_back(double_key("nmpc_tol", [](AppConfig& c) -> double& { return c.mission.nmpc.tolerance; }));
    k.push_back(list_key<8>("Q_x", [](AppConfig& c) -> std::array<double, 8>& { return c.mission.nmpc.q_state; }));
    k.push_back(list_key<3>("Q_u", [](AppConfig& c) -> std::array<double, 3>& { return c.mission.nmpc.q_input; }));
    k.push_back(list_key<3>("Q_du", [](AppConfig& c) -> std::array<double, 3>& { return c.mission.nmpc.q_rate; }));
    k.push_back(double_key("uT_min", [](AppConfig& c) -> double& { return c.mission.nmpc.u_min.thrust; }));
    k.push_back(double_key("uT_max", [](AppConfig& c) -> double& { return c.mission.nmpc.u_max.thrust; }));
    k.push_back({"angle_max", [](const AppConfig& c) { return format_double(c.mission.nmpc.u_max.phi_ref); },
                 [](AppConfig& c, const std::string& v) {
                   const double a = config_double("angle_max", v);
                   if (!(a > 0.0)) throw ConfigError("angle_max", "must be positive");
                   c.mission.nmpc.u_min.phi_ref = c.mission.nmpc.u_min.theta_ref = -a;
                   c.mission.nmpc.u_max.phi_ref = c.mission.nmpc.u_max.theta_ref = a;
                 }});
    k.push_back(double_key("g", [](AppConfig& c) -> double& { return c.mission.nmpc.model.g; }));
    k.push_back(double_key("tau_phi", [](AppConfig& c) -> double& { return c.mission.nmpc.model.tau_phi; }));
    k.push_back(double_key("tau_theta", [](AppConfig& c) -> double& { return c.mission.nmpc.model.tau_theta; }));
    k.push_back(double_key("K_phi", [](AppConfig& c) -> double& { return c.mission.nmpc.model.k_phi; }));
    k.push_back(double_key("K_theta", [](AppConfig& c) -> double& { return c.mission.nmpc.model.k_theta; }));
    k.push_back(double_key("A_x", [](AppConfig& c) -> double& { return c.mission.nmpc.model.damping.x(); }));
    k.push_back(double_key("A_y", [](AppConfig& c) -> double& { return c.mission.nmpc.model.damping.y(); }));
    k.push_back(double_key("A_z", [](AppConfig& c) -> double& { return c.mission.nmpc.model.damping.z(); }));
    k.push_back(double_key("d_info", [](AppConfig& c) -> double& { return c.mission.gain.d_info; }));
    k.push_back({"gain_mode", [](const AppConfig& c) { return to_string(c.mission.gain.mode); },
                 [](AppConfig& c, const std::string& v) { c.mission.gain.mode = parse_gain_mode(v); }});
    k.push_back(int_key("gain_depth", [](AppConfig& c) -> int& { return c.mission.gain.gain_depth; }));
    k.push_back(double_key("K_d", [](AppConfig& c) -> double& { return c.mission.gain.k_d; }));
    k.push_back(double_key("K_i", [](AppConfig& c) -> double& { return c.mission.gain.k_i; }));
    k.push_back(double_key("K_u", [](AppConfig& c) -> double& { return c.mission.gain.k_u; }));
    return k;
  }();
  return keys;
}

}  // namespace detail

inline void set_config_value(AppConfig& c, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys()) {
    if (k.name == key) {
      k.set(c, value);
      return;
    }
  }
  throw ConfigError(key, "unknown configuration key");
}

inline std::string get_config_value(const AppConfig& c, const std::string& key) {
  for (const auto& k : detail::config_keys())
    if (k.name == key) return k.get(c);
  throw ConfigError(key, "unknown configuration key");
}

inline bool is_config_key(const std::string& key) {
  for (const auto& k : detail::config_keys())
    if (k.name == key) return true;
  return false;
}

/// Applies `key = value` lines; `#` starts a comment.
inline void apply_config(AppConfig& c, std::istream& is) {
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", n);
    set_config_value(c, detail::trim(std::string_view(t).substr(0, eq)), detail::trim(std::string_view(t).substr(eq + 1)));
  }
}

/// Applies a `key=value` override.
inline void apply_override(AppConfig& c, std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos) throw ConfigError(std::string(kv), "override must look like key=value");
  set_config_value(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
}

inline AppConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  AppConfig c;
  apply_config(c, in);
  return c;
}

inline void print_config(const AppConfig& c, std::ostream& os) {
  for (const auto& k : detail::config_keys()) os << k.name << " = " << k.get(c) << '\n';
}

inline std::string print_config(const AppConfig& c) {
  std::ostringstream os;
  print_config(c, os);
  return os.str();
}

}  // namespace errt
