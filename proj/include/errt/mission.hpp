#pragma once

#include "errt/gain_eval.hpp"
#include "errt/goal_sampler.hpp"
#include "errt/nmpc.hpp"
#include "errt/tree_planner.hpp"
#include "errt/world.hpp"

#include <functional>
#include <ostream>

namespace errt {

enum class PlanTimeKind { Measured, Fixed, PerTrajectory, Zero };

/// Charged planning time: wall clock, a constant, a constant per requested
/// trajectory (n_traj), or nothing.
struct PlanTimeModel {
  PlanTimeKind kind = PlanTimeKind::Fixed;
  double seconds = 1.0;

  double charge(double measured_s, int n_traj) const {
    switch (kind) {
      case PlanTimeKind::Measured: return measured_s;
      case PlanTimeKind::Fixed: return seconds;
      case PlanTimeKind::PerTrajectory: return seconds * n_traj;
      case PlanTimeKind::Zero: return 0.0;
    }
    return 0.0;
  }
};

inline std::string to_string(const PlanTimeModel& m) {
  switch (m.kind) {
    case PlanTimeKind::Measured: return "measured";
    case PlanTimeKind::Fixed: return "fixed:" + format_double(m.seconds);
    case PlanTimeKind::PerTrajectory: return "per_traj:" + format_double(m.seconds);
    case PlanTimeKind::Zero: return "zero";
  }
  return "";
}

inline PlanTimeModel parse_plan_time_model(std::string_view s) {
  if (s == "measured") return {PlanTimeKind::Measured, 0.0};
  if (s == "zero") return {PlanTimeKind::Zero, 0.0};
  const auto colon = s.find(':');
  if (colon != std::string_view::npos) {
    const auto head = s.substr(0, colon);
    double v = 0.0;
    if (parse_double(s.substr(colon + 1), v) && v >= 0.0) {
      if (head == "fixed") return {PlanTimeKind::Fixed, v};
      if (head == "per_traj") return {PlanTimeKind::PerTrajectory, v};
    }
  }
  throw ConfigError("plan_time_model", "expected measured, zero, fixed:<s> or per_traj:<s>, got '" + std::string(s) + "'");
}

struct MissionConfig {
  std::optional<Vec3> start;  // default_start(world) when unset
  double r_robot = 0.3;
  double l_local = 40.0;
  double time_budget_s = 600.0;
  double replan_fraction = 1.0;
  PlanTimeModel plan_time;
  double scan_every = 1.0;
  int settle_stages = 3;
  int slow_retries = 2;  // re-tracks an unsafe candidate at half the waypoint spacing
  unsigned threads = 1;
  SensorGeometry sensor;
  BeamPattern beams;
  GoalSamplerConfig sampler;
  TreeConfig tree;
  NmpcConfig nmpc;
  GainConfig gain;

  MissionConfig() { tree.improve_budget_s = 0.0; }

  /// Copy with the shared settings (robot radius, depths, threads) pushed
  /// into the per-module configs.
  MissionConfig effective() const {
    MissionConfig c = *this;
    c.sampler.r_robot = r_robot;
    c.tree.r_robot = r_robot;
    c.sampler.check_depth = tree.check_depth;
    c.sampler.gain_depth = gain.gain_depth;
    c.tree.threads = threads;
    return c;
  }

  void validate() const {
    if (!(r_robot > 0.0)) throw ConfigError("r_robot", "must be positive");
    if (!(l_local > 0.0)) throw ConfigError("L_local", "must be positive");
    if (!(time_budget_s > 0.0)) throw ConfigError("time_budget_s", "must be positive");
    if (!(replan_fraction > 0.0 && replan_fraction <= 1.0)) throw ConfigError("replan_fraction", "must be in (0, 1]");
    if (!(scan_every > 0.0)) throw ConfigError("scan_every", "must be positive");
    if (settle_stages < 0) throw ConfigError("settle_stages", "must be non-negative");
    if (slow_retries < 0) throw ConfigError("slow_retries", "must be non-negative");
    if (threads < 1) throw ConfigError("threads", "must be >= 1");
    if (start && !start->allFinite()) throw ConfigError("start", "must be finite");
    sensor.validate();
    beams.validate();
    const MissionConfig e = effective();
    e.sampler.validate();
    e.tree.validate();
    e.nmpc.validate();
    e.gain.validate();
  }
};

struct PlanResult {
  Aabb bounds;
  std::vector<CandidateGoal> goals;
  std::vector<CandidateTrajectory> candidates;  // feasible ones, goal-index order
  std::size_t selected = 0;                     // position in candidates
  std::size_t tree_size = 0;
  std::size_t infeasible = 0;  // dropped by the executed-motion safety check
};

namespace detail {

/// Number of stages executed for a reference of `n_wp` waypoints.
inline std::size_t executed_stages(std::size_t n_wp, std::size_t horizon, int settle) {
  const std::size_t reach = n_wp > 0 ? n_wp - 1 : 0;
  if (reach > horizon) return reach;
  return std::max<std::size_t>(1, std::min(horizon, reach + static_cast<std::size_t>(settle)));
}

/// NMPC tracking of a reference path. Stages past the horizon follow the
/// remaining waypoints directly at hover input. The result is cut to the
/// executed stages.
inline DynamicTrajectory track_reference(const UavState& x0, const std::vector<Vec3>& ref, const MissionConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(cfg.nmpc.horizon);
  const std::vector<Vec3> head(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(std::min(ref.size(), n + 1)));
  DynamicTrajectory t = solve(x0, head, cfg.nmpc);
  const std::size_t keep = executed_stages(ref.size(), n, cfg.settle_stages);
  if (keep <= n) {
    t.states.resize(keep + 1);
    t.inputs.resize(keep);
    return t;
  }
  for (std::size_t l = n + 1; l < ref.size(); ++l) {
    UavState s;
    s.p = ref[l];
    s.v = (ref[l] - ref[l - 1]) / cfg.nmpc.dt;
    t.states.push_back(s);
    t.inputs.push_back(cfg.nmpc.u_ref());
  }
  return t;
}

inline bool motion_safe(const OccupancyGrid& map, const std::vector<UavState>& states, double r, int depth) {
  for (std::size_t i = 1; i < states.size(); ++i)
    if (!map.segment_safe(states[i - 1].p, states[i].p, r, depth)) return false;
  return map.sphere_safe(states.front().p, r, depth);
}

}  // namespace detail

/// One planning call on a frozen map: local bounds, goal sampling, tree
/// branches, NMPC tracking, gain and cost assembly, selection. Candidates
/// whose executed motion is not capsule-safe are tracked again along a
/// reference with half the spacing, up to `slow_retries` times, then dropped.
/// Throws DeadEnd, PlanningFailed, ExpansionStalled or NoInformativeCandidate.
inline PlanResult plan_once(const OccupancyGrid& map, const UavState& x0, const MissionConfig& cfg_in, double l_local,
                            Rng& rng) {
  const MissionConfig cfg = cfg_in.effective();
  PlanResult out;
  out.bounds = map.local_bounds(x0.p, l_local);
  out.goals = sample_goals(map, x0.p, out.bounds, cfg.sensor, cfg.sampler, rng);
  const auto refs = plan_branches(map, x0.p, out.bounds, out.goals, cfg.tree, rng, &out.tree_size);

  std::vector<CandidateTrajectory> raw(refs.size());
  std::vector<std::uint8_t> ok(refs.size(), 0);
  parallel_for(refs.size(), cfg.threads, [&](std::size_t i) {
    CandidateTrajectory& c = raw[i];
    c.goal_index = refs[i].goal_index;
    c.reference = refs[i].waypoints;
    c.trajectory = detail::track_reference(x0, c.reference, cfg);
    double step = cfg.tree.step;
    for (int k = 0; !detail::motion_safe(map, c.trajectory.states, cfg.r_robot, cfg.tree.check_depth); ++k) {
      if (k == cfg.slow_retries) return;
      step *= 0.5;
      c.reference = resample(refs[i].waypoints, step);
      c.trajectory = detail::track_reference(x0, c.reference, cfg);
    }
    ok[i] = 1;
    c.nu = info_gain_along(map, c.trajectory.states, cfg.sensor, cfg.gain);
  });
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (ok[i]) out.candidates.push_back(std::move(raw[i]));
    else ++out.infeasible;
  }
  if (out.candidates.empty()) throw NoInformativeCandidate("no candidate trajectory passed the safety check");
  assemble(out.candidates, cfg.gain, cfg.nmpc);
  out.selected = select_best(out.candidates);
  return out;
}

enum class MissionStatus { Budget, LocallyComplete };

inline std::string to_string(MissionStatus s) { return s == MissionStatus::Budget ? "Budget" : "LocallyComplete"; }

struct MetricsRow {
  double t_sim = 0.0;
  int plan_idx = -1;
  Vec3 position = Vec3::Zero();
  double speed = 0.0;
  std::size_t known_voxels = 0;
  double known_volume_m3 = 0.0;
  double path_len_m = 0.0;
  double plan_compute_s = 0.0;
  double coverage = std::numeric_limits<double>::quiet_NaN();  // not part of the CSV
};

/// Ground-truth voxels the robot could observe: the clearance-restricted
/// reachable free space, grown through free space up to the mapping range,
/// keeping voxels (including occupied surface voxels) with line of sight to
/// the reachable voxel they were grown from.
class CoverageSet {
 public:
  CoverageSet() = default;

  CoverageSet(const GroundTruthWorld& w, const Vec3& start, double r_robot, double map_range) {
    const auto& d = w.dims();
    const std::size_t total = w.voxel_count();
    const auto ball = ball_offsets(r_robot, w.resolution());
    std::vector<std::uint8_t> reach(total, 0);
    std::vector<std::size_t> queue;
    const VoxelKey s = w.key_of(start);
    if (!w.in_bounds(s) || w.occupied(s)) throw Error("coverage start voxel is not free");
    reach[w.index(s)] = 1;
    queue.push_back(w.index(s));
    static constexpr int kNb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const VoxelKey k = w.key_at(queue[qi]);
      for (const auto& nb : kNb) {
        const VoxelKey n{k.x + nb[0], k.y + nb[1], k.z + nb[2]};
        if (!w.in_bounds(n) || reach[w.index(n)] || w.occupied(n) || !voxel_has_clearance(w, n, ball)) continue;
        reach[w.index(n)] = 1;
        queue.push_back(w.index(n));
      }
    }
    // Multi-source growth; source[i] is the reachable voxel i was grown from.
    std::vector<std::int64_t> source(total, -1);
    std::vector<int> dist(total, 0);
    std::vector<std::size_t> frontier;
    for (std::size_t i : queue) {
      source[i] = static_cast<std::int64_t>(i);
      frontier.push_back(i);
    }
    const int max_steps = static_cast<int>(std::floor(map_range / w.resolution()));
    for (std::size_t qi = 0; qi < frontier.size(); ++qi) {
      const std::size_t i = frontier[qi];
      if (w.raw()[i] || dist[i] >= max_steps) continue;  // occupied voxels are not expanded
      const VoxelKey k = w.key_at(i);
      for (const auto& nb : kNb) {
        const VoxelKey n{k.x + nb[0], k.y + nb[1], k.z + nb[2]};
        if (!w.in_bounds(n)) continue;
        const std::size_t j = w.index(n);
        if (source[j] >= 0) continue;
        source[j] = source[i];
        dist[j] = dist[i] + 1;
        frontier.push_back(j);
      }
    }
    (void)d;
    for (std::size_t i = 0; i < total; ++i) {
      if (source[i] < 0) continue;
      const std::size_t src = static_cast<std::size_t>(source[i]);
      if (src != i && !visible(w, w.key_at(src), w.key_at(i))) continue;
      keys_.push_back(w.key_at(i));
    }
    std::sort(keys_.begin(), keys_.end());
  }

  std::size_t size() const { return keys_.size(); }
  const std::vector<VoxelKey>& keys() const { return keys_; }

  double fraction(const OccupancyGrid& map) const {
    if (keys_.empty()) return 0.0;
    OccupancyGrid::Cursor cur(map);
    std::size_t known = 0;
    for (const auto& k : keys_)
      if (cur.state(k) != VoxelState::Unknown) ++known;
    return static_cast<double>(known) / static_cast<double>(keys_.size());
  }

 private:
  static bool visible(const GroundTruthWorld& w, const VoxelKey& from, const VoxelKey& to) {
    bool clear = true;
    walk_voxels(w.center_of(from), w.center_of(to), w.origin(), w.resolution(), [&](const VoxelKey& k) {
      if (k == from || k == to) return true;
      if (w.occupied(k)) {
        clear = false;
        return false;
      }
      return true;
    });
    return clear;
  }

  std::vector<VoxelKey> keys_;
};

struct MissionObserver {
  std::function<void(int plan_idx, const PlanResult&, const OccupancyGrid& map)> on_plan;
  std::function<void(int plan_idx, const std::string& error)> on_plan_failed;
};

struct MissionResult {
  MissionStatus status = MissionStatus::Budget;
  std::vector<MetricsRow> rows;
  OccupancyGrid map;
  int plans = 0;  // planning calls, including failed attempts
  double motion_time_s = 0.0;
  double idle_time_s = 0.0;
  double path_len_m = 0.0;
  std::vector<Vec3> executed;  // every executed position, start included
  std::vector<std::vector<Vec3>> selected_states;  // executed part of each selected trajectory
};

struct MissionOptions {
  const CoverageSet* coverage = nullptr;
  const MissionObserver* observer = nullptr;
  double stop_coverage = std::numeric_limits<double>::infinity();  // ends the run early, status Budget
};

namespace detail {

inline void integrate_scan(OccupancyGrid& map, const Vec3& pose, const MissionConfig& cfg, const GroundTruthWorld& w) {
  for (const ScanRay& r : simulate_scan(pose, cfg.beams, cfg.sensor, w)) map.integrate_ray(pose, r.endpoint, r.hit);
}

}  // namespace detail

/// Closed-loop exploration mission with ideal tracking. See MissionConfig
/// for the knobs; rows are emitted at t = 0, at every planning call and at
/// every executed state.
inline MissionResult run_mission(const GroundTruthWorld& world, const MissionConfig& cfg_in, Rng& rng,
                                 const MissionOptions& opt = {}) {
  cfg_in.validate();
  const MissionConfig cfg = cfg_in.effective();
  const double res = world.resolution();
  const Vec3 start = cfg.start ? *cfg.start : default_start(world);
  if (world.occupied_at(start) || !(world.clearance(start, cfg.r_robot + res) > cfg.r_robot))
    throw Error("start pose lacks r_robot clearance in ground truth");

  MissionResult out;
  out.map = OccupancyGrid(res, world.origin());
  OccupancyGrid& map = out.map;
  // The body volume at the start is free in ground truth; the sensor cannot see straight up or down.
  {
    const VoxelKey c = map.key_of(start);
    const int n = static_cast<int>(std::ceil(cfg.r_robot / res)) + 1;
    for (int dx = -n; dx <= n; ++dx)
      for (int dy = -n; dy <= n; ++dy)
        for (int dz = -n; dz <= n; ++dz) {
          const VoxelKey k{c.x + dx, c.y + dy, c.z + dz};
          if ((map.center_of(k) - start).norm() <= cfg.r_robot && !world.occupied(k)) map.set(k, VoxelState::Free);
        }
  }

  double t = 0.0;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  bool map_dirty = true;
  auto push_row = [&](int plan_idx, const Vec3& p, double speed, double plan_s) {
    if (opt.coverage && map_dirty) {
      coverage = opt.coverage->fraction(map);
      map_dirty = false;
    }
    MetricsRow r;
    r.t_sim = t;
    r.plan_idx = plan_idx;
    r.position = p;
    r.speed = speed;
    r.known_voxels = map.known_count();
    r.known_volume_m3 = static_cast<double>(r.known_voxels) * res * res * res;
    r.path_len_m = out.path_len_m;
    r.plan_compute_s = plan_s;
    r.coverage = coverage;
    out.rows.push_back(r);
  };

  UavState x;
  x.p = start;
  out.executed.push_back(start);
  detail::integrate_scan(map, start, cfg, world);
  push_row(-1, start, 0.0, 0.0);

  bool retried = false;
  while (t < cfg.time_budget_s) {
    const int k = out.plans++;
    const double l_local = retried ? 2.0 * cfg.l_local : cfg.l_local;
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<PlanResult> plan;
    std::string failure;
    try {
      plan = plan_once(map, x, cfg, l_local, rng);
    } catch (const DeadEnd& e) {
      failure = e.what();
    } catch (const NoInformativeCandidate& e) {
      failure = e.what();
    } catch (const PlanningFailed& e) {
      failure = e.what();
    } catch (const ExpansionStalled& e) {
      failure = e.what();
    }
    const double measured = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double idle = cfg.plan_time.charge(measured, cfg.sampler.n_traj);
    t += idle;
    out.idle_time_s += idle;
    push_row(k, x.p, 0.0, idle);

    if (!plan) {
      if (opt.observer && opt.observer->on_plan_failed) opt.observer->on_plan_failed(k, failure);
      if (retried) {
        out.status = MissionStatus::LocallyComplete;
        return out;
      }
      retried = true;
      continue;
    }
    retried = false;
    if (opt.observer && opt.observer->on_plan) opt.observer->on_plan(k, *plan, map);

    const auto& states = plan->candidates[plan->selected].trajectory.states;
    const std::size_t n_exec = states.size() - 1;
    const std::size_t n_go = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(cfg.replan_fraction * static_cast<double>(n_exec) - 1e-9)), 1, n_exec);
    auto& sel = out.selected_states.emplace_back();
    for (std::size_t s = 0; s <= n_go; ++s) sel.push_back(states[s].p);

    double since_scan = 0.0;
    for (std::size_t s = 1; s <= n_go && t < cfg.time_budget_s; ++s) {
      const double step_len = (states[s].p - states[s - 1].p).norm();
      t += cfg.nmpc.dt;
      out.motion_time_s += cfg.nmpc.dt;
      out.path_len_m += step_len;
      since_scan += step_len;
      x = states[s];
      out.executed.push_back(x.p);
      if (since_scan >= cfg.scan_every || s == n_go) {
        detail::integrate_scan(map, x.p, cfg, world);
        map_dirty = true;
        since_scan = 0.0;
      }
      push_row(k, x.p, x.v.norm(), 0.0);
    }
    // The robot hovers in place while the next plan is computed.
    x.v.setZero();
    x.phi = 0.0;
    x.theta = 0.0;
    if (coverage >= opt.stop_coverage) break;
  }
  out.status = MissionStatus::Budget;
  return out;
}

/// Same pipeline with endpoint-only gain and no actuation cost.
inline MissionResult run_baseline(const GroundTruthWorld& world, const MissionConfig& cfg, Rng& rng,
                                  const MissionOptions& opt = {}) {
  MissionConfig b = cfg;
  b.gain.mode = GainMode::Endpoint;
  b.gain.k_u = 0.0;
  return run_mission(world, b, rng, opt);
}

/// Coverage fraction per metrics row.
inline std::vector<double> coverage_report(const MissionResult& r) {
  std::vector<double> out;
  out.reserve(r.rows.size());
  for (const auto& row : r.rows) out.push_back(row.coverage);
  return out;
}

/// First simulated time at which coverage reaches `level`; infinity if never.
inline double time_to_coverage(const std::vector<MetricsRow>& rows, double level = 0.8) {
  for (const auto& r : rows)
    if (r.coverage >= level) return r.t_sim;
  return std::numeric_limits<double>::infinity();
}

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& os) {
  os << "t_sim,plan_idx,x,y,z,speed,known_voxels,known_volume_m3,path_len_m,plan_compute_s\n";
  for (const auto& r : rows) {
    os << format_fixed(r.t_sim) << ',' << r.plan_idx << ',' << format_fixed(r.position.x()) << ','
       << format_fixed(r.position.y()) << ',' << format_fixed(r.position.z()) << ',' << format_fixed(r.speed) << ','
       << r.known_voxels << ',' << format_fixed(r.known_volume_m3) << ',' << format_fixed(r.path_len_m) << ','
       << format_fixed(r.plan_compute_s) << '\n';
  }
}

inline void write_trajectory_csv(const DynamicTrajectory& t, std::ostream& os) {
  os << "stage,x,y,z,vx,vy,vz,phi,theta,uT,uphi,utheta\n";
  for (std::size_t l = 0; l < t.states.size(); ++l) {
    const UavState& s = t.states[l];
    const ControlInput u = l < t.inputs.size() ? t.inputs[l] : (t.inputs.empty() ? ControlInput{} : t.inputs.back());
    os << l;
    for (double v : {s.p.x(), s.p.y(), s.p.z(), s.v.x(), s.v.y(), s.v.z(), s.phi, s.theta, u.thrust, u.phi_ref,
                     u.theta_ref})
      os << ',' << format_fixed(v);
    os << '\n';
  }
}

}  // namespace errt
