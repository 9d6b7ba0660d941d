#pragma once

#include "errt/config.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

namespace errt::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfig = 1, kWorldIo = 2, kNoPlan = 3 };

struct RunSummary {
  MissionStatus status = MissionStatus::Budget;
  double t = 0.0;
  double coverage = 0.0;
  double path_m = 0.0;
  int plans = 0;
  double t80 = std::numeric_limits<double>::infinity();
  double mean_plan_s = 0.0;
  std::uint64_t metrics_hash = 0;
};

inline std::string summary_line(const RunSummary& s) {
  return "status=" + to_string(s.status) + " t=" + format_fixed(s.t, 3) + " coverage=" + format_fixed(s.coverage, 4) +
         " path_m=" + format_fixed(s.path_m, 3) + " plans=" + std::to_string(s.plans);
}

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw std::ios_base::failure("cannot write '" + p.string() + "'");
  return os;
}

inline std::string time_string(double t) { return std::isfinite(t) ? format_fixed(t, 3) : "inf"; }

}  // namespace detail

/// World named by the config: loaded from world_file or generated from
/// world_kind and the seed. Throws std::ios_base::failure, ParseError or
/// Error on failure.
inline GroundTruthWorld make_world(const AppConfig& cfg) {
  if (!cfg.world_file.empty()) return load_world_file(cfg.world_file);
  return gen_world(cfg.world_kind, cfg.seed, cfg.world_params());
}

/// Runs one mission and, when `out_dir` is non-empty, writes metrics.csv,
/// coverage.csv, plans.log, plan_<k>.csv, final_map.errtm and config.txt.
inline RunSummary run_to_dir(const AppConfig& cfg, const GroundTruthWorld& world, const std::string& out_dir,
                             std::string* metrics_csv = nullptr) {
  const MissionConfig mc = cfg.resolved_mission();
  mc.validate();
  const Vec3 start = mc.start ? *mc.start : default_start(world);
  const CoverageSet coverage(world, start, mc.r_robot, mc.sensor.map_range);
  std::vector<std::string> log;
  std::vector<std::pair<int, DynamicTrajectory>> selected;
  MissionObserver obs;
  const bool write = !out_dir.empty();
  obs.on_plan = [&](int k, const PlanResult& p, const OccupancyGrid&) {
    for (std::size_t i = 0; i < p.candidates.size(); ++i) log.push_back(cost_log_line(k, p.candidates[i], i == p.selected));
    if (write) selected.emplace_back(k, p.candidates[p.selected].trajectory);
  };
  obs.on_plan_failed = [&](int k, const std::string& e) { log.push_back("plan " + std::to_string(k) + " failed " + e); };
  MissionOptions opt;
  opt.coverage = &coverage;
  opt.observer = &obs;
  Rng rng(cfg.seed);
  const MissionResult r = cfg.baseline ? run_baseline(world, mc, rng, opt) : run_mission(world, mc, rng, opt);

  std::ostringstream metrics;
  write_metrics_csv(r.rows, metrics);
  RunSummary s;
  s.status = r.status;
  s.t = r.rows.back().t_sim;
  s.coverage = r.rows.back().coverage;
  s.path_m = r.path_len_m;
  s.plans = r.plans;
  s.t80 = time_to_coverage(r.rows, 0.8);
  s.metrics_hash = fnv1a(metrics.str());
  s.mean_plan_s = r.plans ? r.idle_time_s / r.plans : 0.0;
  if (metrics_csv) *metrics_csv = metrics.str();

  if (write) {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    detail::open_out(dir / "metrics.csv") << metrics.str();
    {
      auto os = detail::open_out(dir / "coverage.csv");
      os << "t_sim,coverage\n";
      for (const auto& row : r.rows) os << format_fixed(row.t_sim) << ',' << format_fixed(row.coverage) << '\n';
    }
    {
      auto os = detail::open_out(dir / "plans.log");
      for (const auto& l : log) os << l << '\n';
    }
    for (const auto& [k, t] : selected) {
      auto os = detail::open_out(dir / ("plan_" + std::to_string(k) + ".csv"));
      write_trajectory_csv(t, os);
    }
    {
      auto os = detail::open_out(dir / "final_map.errtm");
      dump_map(r.map, os);
    }
    {
      auto os = detail::open_out(dir / "config.txt");
      print_config(cfg, os);
    }
  }
  return s;
}

inline int cmd_run(const AppConfig& cfg, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  GroundTruthWorld world(0.2, 1, 1, 1);
  try {
    world = make_world(cfg);
  } catch (const std::exception& e) {
    err << "world error: " << (cfg.world_file.empty() ? std::string() : cfg.world_file + ": ") << e.what() << '\n';
    return kWorldIo;
  }
  try {
    out << summary_line(run_to_dir(cfg, world, out_dir)) << '\n';
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::ios_base::failure& e) {
    err << "output error: " << e.what() << '\n';
    return kWorldIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}

/// One planning call on a map snapshot. Writes goals.csv, cand_<j>.csv for
/// every candidate, selected.csv and costs.log into `out_dir`.
inline int cmd_plan(const AppConfig& cfg, const std::string& map_path, const Vec3& pose, const std::string& out_dir,
                    std::ostream& out, std::ostream& err) {
  OccupancyGrid map;
  try {
    std::ifstream in(map_path);
    if (!in) throw std::ios_base::failure("cannot open map snapshot");
    map = load_map(in);
  } catch (const std::exception& e) {
    err << "map error: " << map_path << ": " << e.what() << '\n';
    return kWorldIo;
  }
  MissionConfig mc;
  try {
    mc = cfg.resolved_mission();
    mc.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  }
  if (!pose.allFinite() || !map.sphere_safe(pose, mc.r_robot, mc.tree.check_depth)) {
    err << "pose error: pose is not safe in the map snapshot\n";
    return kConfig;
  }
  UavState x0;
  x0.p = pose;
  Rng rng(cfg.seed);
  PlanResult plan;
  try {
    plan = plan_once(map, x0, mc, mc.l_local, rng);
  } catch (const Error& e) {
    err << "no plan: " << e.what() << '\n';
    return kNoPlan;
  }
  try {
    if (!out_dir.empty()) {
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      {
        auto os = detail::open_out(dir / "goals.csv");
        os << "index,x,y,z\n";
        for (const auto& g : plan.goals)
          os << g.index << ',' << format_fixed(g.position.x()) << ',' << format_fixed(g.position.y()) << ','
             << format_fixed(g.position.z()) << '\n';
      }
      for (const auto& c : plan.candidates) {
        auto os = detail::open_out(dir / ("cand_" + std::to_string(c.goal_index) + ".csv"));
        write_trajectory_csv(c.trajectory, os);
      }
      {
        auto os = detail::open_out(dir / "selected.csv");
        write_trajectory_csv(plan.candidates[plan.selected].trajectory, os);
      }
      auto os = detail::open_out(dir / "costs.log");
      for (std::size_t i = 0; i < plan.candidates.size(); ++i) os << cost_log_line(0, plan.candidates[i], i == plan.selected) << '\n';
    }
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kWorldIo;
  }
  out << "candidates=" << plan.candidates.size() << " goals=" << plan.goals.size()
      << " selected=" << plan.candidates[plan.selected].goal_index << '\n';
  return kOk;
}

inline int cmd_gen_world(const AppConfig& cfg, const std::string& out_path, std::ostream& out, std::ostream& err) {
  GroundTruthWorld world(0.2, 1, 1, 1);
  try {
    world = gen_world(cfg.world_kind, cfg.seed, cfg.world_params());
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const Error& e) {
    err << "world error: " << e.what() << '\n';
    return kWorldIo;
  }
  if (out_path.empty() || out_path == "-") {
    dump_world(world, out);
    return kOk;
  }
  std::ofstream os(out_path);
  if (!os) {
    err << "world error: cannot write '" << out_path << "'\n";
    return kWorldIo;
  }
  dump_world(world, os);
  return kOk;
}

struct SweepRow {
  std::string value;
  std::uint64_t seed = 0;
  RunSummary summary;
};

/// Cross product of `values` and `seeds` consecutive seeds starting at
/// cfg.seed. Writes the metrics of each cell to <key>_<value>_seed<s>.csv
/// and one row per cell to aggregate.csv.
inline int cmd_sweep(const AppConfig& cfg, const std::string& key, const std::vector<std::string>& values, int seeds,
                     const std::string& out_dir, unsigned jobs, std::ostream& out, std::ostream& err) {
  if (!is_config_key(key) || key == "seed") {
    err << "config error: " << key << ": not a sweepable configuration key\n";
    return kConfig;
  }
  if (values.empty() || seeds < 1) {
    err << "config error: sweep needs at least one value and one seed\n";
    return kConfig;
  }
  std::vector<AppConfig> cells;
  std::vector<SweepRow> rows;
  try {
    for (const auto& v : values) {
      for (int s = 0; s < seeds; ++s) {
        AppConfig c = cfg;
        set_config_value(c, key, v);
        c.seed = cfg.seed + static_cast<std::uint64_t>(s);
        c.resolved_mission().validate();
        cells.push_back(c);
        rows.push_back({v, c.seed, {}});
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  }
  const fs::path dir(out_dir.empty() ? "." : out_dir);
  std::vector<std::string> failures(cells.size());
  std::vector<int> codes(cells.size(), kOk);
  parallel_for(cells.size(), std::max(1u, jobs), [&](std::size_t i) {
    try {
      const GroundTruthWorld world = make_world(cells[i]);
      std::string metrics;
      rows[i].summary = run_to_dir(cells[i], world, "", &metrics);
      fs::create_directories(dir);
      detail::open_out(dir / (key + "_" + rows[i].value + "_seed" + std::to_string(rows[i].seed) + ".csv")) << metrics;
    } catch (const std::exception& e) {
      failures[i] = e.what();
      codes[i] = kWorldIo;
    }
  });
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (codes[i] != kOk) {
      err << "world error: cell " << rows[i].value << " seed " << rows[i].seed << ": " << failures[i] << '\n';
      return codes[i];
    }
  }
  try {
    fs::create_directories(dir);
    auto os = detail::open_out(dir / "aggregate.csv");
    os << "key,value,seed,t80,coverage_final,mean_plan_s\n";
    for (const auto& r : rows)
      os << key << ',' << r.value << ',' << r.seed << ',' << detail::time_string(r.summary.t80) << ','
         << format_fixed(r.summary.coverage) << ',' << format_fixed(r.summary.mean_plan_s) << '\n';
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kWorldIo;
  }
  for (const auto& r : rows) out << key << '=' << r.value << " seed=" << r.seed << ' ' << summary_line(r.summary) << '\n';
  return kOk;
}

}  // namespace errt::cli
