#pragma once

#include "errt/voxel_map.hpp"

namespace errt {

struct GoalSamplerConfig {
  int n_traj = 60;
  double d_gc = 1.0;        // minimum spacing between goals
  double d_goal_min = 0.8;  // minimum distance from the robot
  int nu_min = 0;           // goals need more than nu_min visible unknown voxels
  int max_attempts = 0;     // 0 selects 200 * n_traj
  double r_robot = 0.3;
  int check_depth = 0;
  int gain_depth = 0;

  int attempts() const { return max_attempts > 0 ? max_attempts : 200 * n_traj; }

  void validate() const {
    if (n_traj < 1) throw ConfigError("n_traj", "must be >= 1");
    if (!(d_gc > 0.0)) throw ConfigError("d_gc", "must be positive");
    if (!(d_goal_min >= 0.0)) throw ConfigError("d_goal_min", "must be non-negative");
    if (nu_min < 0) throw ConfigError("nu_min", "must be non-negative");
    if (attempts() < n_traj) throw ConfigError("max_attempts", "must be >= n_traj");
    if (!(r_robot > 0.0)) throw ConfigError("r_robot", "must be positive");
  }
};

struct CandidateGoal {
  Vec3 position;
  int index = 0;
};

/// Number of Unknown voxels in the frustum at `pose` with a clear line of
/// sight. Counting stops once the count exceeds `stop_above`.
inline std::size_t visible_unknown_count(const OccupancyGrid& map, const Vec3& pose, const SensorGeometry& sensor,
                                         int depth, std::size_t stop_above = std::numeric_limits<std::size_t>::max()) {
  OccupancyGrid::Cursor cur(map);
  const VoxelKey from = map.key_of(pose);
  std::size_t count = 0;
  map.for_each_unknown_in_frustum(pose, sensor, depth, [&](const VoxelKey& k) {
    if (map.los_free(cur, pose, from, k)) ++count;
    return count <= stop_above;
  });
  return count;
}

/// Rejection-samples up to n_traj goals inside `bounds`: each is sphere-safe,
/// at least d_goal_min from the robot, at least d_gc from every goal already
/// accepted, and sees more than nu_min unknown voxels. Throws DeadEnd when no
/// goal is found within the attempt budget.
inline std::vector<CandidateGoal> sample_goals(const OccupancyGrid& map, const Vec3& p_hat, const Aabb& bounds,
                                               const SensorGeometry& sensor, const GoalSamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (!bounds.valid()) throw Error("sampling bounds are empty");
  std::vector<CandidateGoal> goals;
  const double spacing2 = cfg.d_gc * cfg.d_gc;
  const double floor2 = cfg.d_goal_min * cfg.d_goal_min;
  const int attempts = cfg.attempts();
  for (int a = 0; a < attempts && static_cast<int>(goals.size()) < cfg.n_traj; ++a) {
    const Vec3 p(uniform(rng, bounds.min.x(), bounds.max.x()), uniform(rng, bounds.min.y(), bounds.max.y()),
                 uniform(rng, bounds.min.z(), bounds.max.z()));
    if ((p - p_hat).squaredNorm() < floor2) continue;
    bool spaced = true;
    for (const auto& g : goals) {
      if ((g.position - p).squaredNorm() < spacing2) {
        spaced = false;
        break;
      }
    }
    if (!spaced) continue;
    if (!map.sphere_safe(p, cfg.r_robot, cfg.check_depth)) continue;
    // nu_min == 0: stop at the first visible unknown voxel.
    const std::size_t nu =
        cfg.nu_min == 0 ? visible_unknown_count(map, p, sensor, cfg.gain_depth, 0)
                        : visible_unknown_count(map, p, sensor, cfg.gain_depth);
    if (nu <= static_cast<std::size_t>(cfg.nu_min)) continue;
    goals.push_back({p, static_cast<int>(goals.size())});
  }
  if (goals.empty()) throw DeadEnd("no informative safe goal found in " + std::to_string(attempts) + " attempts");
  return goals;
}

}  // namespace errt
