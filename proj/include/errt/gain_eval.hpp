#pragma once

#include "errt/nmpc.hpp"
#include "errt/voxel_map.hpp"

#include <unordered_set>

namespace errt {

enum class GainMode { Along, Endpoint };

inline std::string to_string(GainMode m) { return m == GainMode::Along ? "along" : "endpoint"; }

inline GainMode parse_gain_mode(std::string_view s) {
  if (s == "along") return GainMode::Along;
  if (s == "endpoint") return GainMode::Endpoint;
  throw ConfigError("gain_mode", "expected along or endpoint, got '" + std::string(s) + "'");
}

struct GainConfig {
  double d_info = 6.0;
  GainMode mode = GainMode::Along;
  int gain_depth = 0;
  double k_d = 0.3;
  double k_i = 0.4;
  double k_u = 0.1;

  void validate() const {
    if (!(d_info > 0.0)) throw ConfigError("d_info", "must be positive");
    if (!(k_d >= 0.0)) throw ConfigError("K_d", "must be non-negative");
    if (!(k_i >= 0.0)) throw ConfigError("K_i", "must be non-negative");
    if (!(k_u >= 0.0)) throw ConfigError("K_u", "must be non-negative");
    if (gain_depth < 0 || gain_depth > 4) throw ConfigError("gain_depth", "must be in [0, 4]");
  }
};

struct CandidateTrajectory {
  int goal_index = 0;
  std::vector<Vec3> reference;
  DynamicTrajectory trajectory;
  std::size_t nu = 0;
  double c_d = 0.0;
  double c_u = 0.0;
  double c_i = 0.0;
  double total = 0.0;
};

/// Indices of the states at which gain is evaluated.
inline std::vector<std::size_t> gain_poses(const std::vector<UavState>& states, const GainConfig& cfg) {
  if (states.empty()) throw Error("trajectory has no states");
  const std::size_t last = states.size() - 1;
  if (cfg.mode == GainMode::Endpoint) return {last};
  std::vector<std::size_t> idx{0};
  double since = 0.0;
  for (std::size_t i = 1; i <= last; ++i) {
    since += (states[i].p - states[i - 1].p).norm();
    if (since >= cfg.d_info) {
      idx.push_back(i);
      since = 0.0;
    }
  }
  if (idx.back() != last) idx.push_back(last);
  return idx;
}

/// Unknown voxels visible from the evaluation poses, counted once each.
inline std::size_t info_gain_along(const OccupancyGrid& map, const std::vector<UavState>& states,
                                   const SensorGeometry& sensor, const GainConfig& cfg) {
  OccupancyGrid::Cursor cur(map);
  std::unordered_set<VoxelKey, VoxelKeyHash> seen;
  for (std::size_t i : gain_poses(states, cfg)) {
    const Vec3& pose = states[i].p;
    const VoxelKey from = map.key_of(pose);
    map.for_each_unknown_in_frustum(pose, sensor, cfg.gain_depth, [&](const VoxelKey& k) {
      if (!seen.contains(k) && map.los_free(cur, pose, from, k)) seen.insert(k);
      return true;
    });
  }
  return seen.size();
}

inline double distance_cost(const std::vector<UavState>& states, double k_d) {
  if (states.empty()) throw Error("trajectory has no states");
  double len = 0.0;
  for (std::size_t i = 1; i < states.size(); ++i) len += (states[i].p - states[i - 1].p).norm();
  return k_d * len;
}

/// Fills the cost terms of each candidate from its trajectory and nu.
inline void assemble(std::vector<CandidateTrajectory>& candidates, const GainConfig& cfg, const NmpcConfig& nmpc) {
  for (auto& c : candidates) {
    c.c_d = distance_cost(c.trajectory.states, cfg.k_d);
    c.c_u = actuation_cost(c.trajectory.inputs, nmpc, cfg.k_u);
    c.c_i = cfg.k_i * static_cast<double>(c.nu);
    c.total = c.c_d + c.c_u - c.c_i;
  }
}

/// Position in `candidates` of the lowest-total candidate with nu > 0; ties
/// go to the lowest goal index.
inline std::size_t select_best(const std::vector<CandidateTrajectory>& candidates) {
  if (candidates.empty()) throw NoInformativeCandidate("no candidates");
  std::size_t best = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.nu == 0) continue;
    if (best == candidates.size() || c.total < candidates[best].total ||
        (c.total == candidates[best].total && c.goal_index < candidates[best].goal_index))
      best = i;
  }
  if (best == candidates.size()) throw NoInformativeCandidate("every candidate has zero information gain");
  return best;
}

inline std::string cost_log_line(int plan, const CandidateTrajectory& c, bool selected) {
  std::string s = "plan " + std::to_string(plan) + " cand " + std::to_string(c.goal_index) + " nu " +
                  std::to_string(c.nu) + " Cd " + format_fixed(c.c_d) + " Cu " + format_fixed(c.c_u) + " Ci " +
                  format_fixed(c.c_i) + " total " + format_fixed(c.total);
  if (selected) s += " selected";
  return s;
}

}  // namespace errt
