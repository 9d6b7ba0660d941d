#pragma once

#include "errt/goal_sampler.hpp"

#include <chrono>
#include <unordered_map>

namespace errt {

struct TreeNode {
  Vec3 position;
  int parent = -1;  // -1 for the root
  double cumulative_length = 0.0;
};

/// Random tree rooted at the robot. Node ids are insertion indices.
class SearchTree {
 public:
  static constexpr std::size_t kLinearScanLimit = 4096;

  explicit SearchTree(const Vec3& root, double hash_cell = 1.0) : hash_cell_(hash_cell) {
    nodes_.push_back({root, -1, 0.0});
    index(0);
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }
  int root() const { return 0; }

  bool stalled() const { return stalled_; }
  void set_stalled(bool v) { stalled_ = v; }

  int add_leaf(int parent, const Vec3& p) {
    const TreeNode& par = node(parent);
    nodes_.push_back({p, parent, par.cumulative_length + (p - par.position).norm()});
    const int id = static_cast<int>(nodes_.size()) - 1;
    index(id);
    return id;
  }

  /// Euclidean-nearest node, lowest id on ties. Linear scan for small trees,
  /// uniform spatial hash beyond kLinearScanLimit nodes.
  int nearest(const Vec3& p) const {
    if (nodes_.size() <= kLinearScanLimit) {
      int best = 0;
      double best_d2 = (nodes_[0].position - p).squaredNorm();
      for (std::size_t i = 1; i < nodes_.size(); ++i) {
        const double d2 = (nodes_[i].position - p).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = static_cast<int>(i);
        }
      }
      return best;
    }
    const VoxelKey c = cell_of(p);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    const int max_ring = std::max({std::abs(c.x - lo_.x), std::abs(c.x - hi_.x), std::abs(c.y - lo_.y),
                                   std::abs(c.y - hi_.y), std::abs(c.z - lo_.z), std::abs(c.z - hi_.z)});
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int dx = -ring; dx <= ring; ++dx)
        for (int dy = -ring; dy <= ring; ++dy)
          for (int dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            auto it = buckets_.find({c.x + dx, c.y + dy, c.z + dz});
            if (it == buckets_.end()) continue;
            for (int id : it->second) {
              const double d2 = (nodes_[static_cast<std::size_t>(id)].position - p).squaredNorm();
              if (d2 < best_d2 || (d2 == best_d2 && id < best)) {
                best_d2 = d2;
                best = id;
              }
            }
          }
      const double covered = ring * hash_cell_;
      if (best >= 0 && best_d2 <= covered * covered) break;
    }
    return best;
  }

  /// Root-to-node waypoint sequence.
  std::vector<Vec3> branch(int id) const {
    std::vector<Vec3> out;
    for (int n = id; n >= 0; n = node(n).parent) out.push_back(node(n).position);
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  VoxelKey cell_of(const Vec3& p) const {
    return {detail::floor_to_int(p.x() / hash_cell_), detail::floor_to_int(p.y() / hash_cell_),
            detail::floor_to_int(p.z() / hash_cell_)};
  }
  void index(int id) {
    const VoxelKey c = cell_of(nodes_[static_cast<std::size_t>(id)].position);
    buckets_[c].push_back(id);
    if (id == 0) {
      lo_ = hi_ = c;
    } else {
      lo_ = {std::min(lo_.x, c.x), std::min(lo_.y, c.y), std::min(lo_.z, c.z)};
      hi_ = {std::max(hi_.x, c.x), std::max(hi_.y, c.y), std::max(hi_.z, c.z)};
    }
  }

  std::vector<TreeNode> nodes_;
  double hash_cell_;
  std::unordered_map<VoxelKey, std::vector<int>, VoxelKeyHash> buckets_;
  VoxelKey lo_{}, hi_{};
  bool stalled_ = false;
};

struct TreeConfig {
  int n_max = 2000;
  double d_extend = 3.0;
  double step = 0.4;
  double improve_budget_s = 0.05;
  double r_robot = 0.3;
  int check_depth = 0;
  int stall_limit = 10000;  // consecutive rejected samples before giving up
  unsigned threads = 1;

  void validate() const {
    if (n_max < 1) throw ConfigError("N_max", "must be >= 1");
    if (!(d_extend > 0.0)) throw ConfigError("d_extend", "must be positive");
    if (!(step > 0.0)) throw ConfigError("step", "must be positive");
    if (!(improve_budget_s >= 0.0)) throw ConfigError("improve_budget_s", "must be non-negative");
    if (!(r_robot > 0.0)) throw ConfigError("r_robot", "must be positive");
  }
};

struct ReferencePath {
  int goal_index = 0;
  std::vector<Vec3> waypoints;  // first = robot position, last = goal
};

/// Grows the tree until n_max samples have been accepted. A sample is kept
/// when it is sphere-safe and the capsule to its nearest node is safe; it is
/// linked to that node directly, without steering. After stall_limit
/// consecutive rejections the partial tree is returned flagged as stalled,
/// or ExpansionStalled is thrown if nothing was accepted.
inline SearchTree expand_tree(const OccupancyGrid& map, const Vec3& p_hat, const Aabb& bounds, const TreeConfig& cfg,
                              Rng& rng) {
  cfg.validate();
  if (!map.sphere_safe(p_hat, cfg.r_robot, cfg.check_depth)) throw PlanningFailed("robot position is not safe");
  SearchTree tree(p_hat, std::max(1.0, bounds.extent().maxCoeff() / 16.0));
  int accepted = 0;
  int misses = 0;
  while (accepted < cfg.n_max) {
    const Vec3 p(uniform(rng, bounds.min.x(), bounds.max.x()), uniform(rng, bounds.min.y(), bounds.max.y()),
                 uniform(rng, bounds.min.z(), bounds.max.z()));
    bool ok = map.sphere_safe(p, cfg.r_robot, cfg.check_depth);
    int closest = -1;
    if (ok) {
      closest = tree.nearest(p);
      ok = map.segment_safe(tree.node(closest).position, p, cfg.r_robot, cfg.check_depth);
    }
    if (!ok) {
      if (++misses >= cfg.stall_limit) {
        if (accepted == 0) throw ExpansionStalled("tree expansion accepted no sample");
        tree.set_stalled(true);
        break;
      }
      continue;
    }
    misses = 0;
    tree.add_leaf(closest, p);
    ++accepted;
  }
  return tree;
}

/// Attaches every goal as a leaf under each pre-existing node closer than
/// d_extend with a safe connecting capsule. Returns leaf ids per goal.
inline std::vector<std::vector<int>> connect_goals(SearchTree& tree, const std::vector<CandidateGoal>& goals,
                                                   double d_extend, const OccupancyGrid& map, double r_robot,
                                                   int depth = 0) {
  const int base = static_cast<int>(tree.size());
  const double d2 = d_extend * d_extend;
  std::vector<std::vector<int>> leaves(goals.size());
  for (std::size_t g = 0; g < goals.size(); ++g) {
    const Vec3& goal = goals[g].position;
    for (int n = 0; n < base; ++n) {
      const Vec3& p = tree.node(n).position;
      if ((p - goal).squaredNorm() >= d2) continue;
      if (!map.segment_safe(p, goal, r_robot, depth)) continue;
      leaves[g].push_back(tree.add_leaf(n, goal));
    }
  }
  return leaves;
}

/// Root-to-leaf path of the leaf with the smallest cumulative length
/// (lowest id on ties).
inline std::vector<Vec3> extract_branch(const SearchTree& tree, const std::vector<int>& leaf_ids) {
  if (leaf_ids.empty()) throw Error("extract_branch needs at least one leaf");
  int best = leaf_ids.front();
  for (int id : leaf_ids) {
    const double l = tree.node(id).cumulative_length, b = tree.node(best).cumulative_length;
    if (l < b || (l == b && id < best)) best = id;
  }
  return tree.branch(best);
}

/// Splits every edge into equal pieces no longer than `step`. Endpoints and
/// original waypoints are kept exactly.
inline std::vector<Vec3> resample(const std::vector<Vec3>& path, double step) {
  if (path.size() < 2) return path;
  std::vector<Vec3> out{path.front()};
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Vec3 a = path[i - 1], b = path[i];
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step - 1e-9)));
    for (int k = 1; k < pieces; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / pieces));
    out.push_back(b);
  }
  return out;
}

namespace detail {

/// Greedy shortcutting from the end: find the lowest i with a safe edge
/// i -> k, drop everything between, and repeat on the prefix ending at i.
/// Past the deadline the remaining prefix is kept as is.
template <typename Clock>
std::vector<Vec3> shortcut(const std::vector<Vec3>& path, const OccupancyGrid& map, double r, int depth,
                           typename Clock::time_point deadline, bool limited) {
  std::vector<Vec3> rev{path.back()};
  std::size_t k = path.size() - 1;
  while (k > 0) {
    std::size_t i = 0;
    for (; i + 1 < k; ++i) {
      if (limited && Clock::now() >= deadline) {
        i = k - 1;
        break;
      }
      if (map.segment_safe(path[i], path[k], r, depth)) break;
    }
    rev.push_back(path[i]);
    k = i;
  }
  std::reverse(rev.begin(), rev.end());
  return rev;
}

}  // namespace detail

/// Shortens a safe path: straight shot if possible, otherwise recursive
/// shortcutting, then a second pass over the path resampled at `step`.
/// Endpoints never move and the length never grows. A zero budget means
/// no time limit.
inline std::vector<Vec3> improve_path(const std::vector<Vec3>& path, const OccupancyGrid& map, double r_robot,
                                      double time_budget_s, double step = 0.4, int depth = 0) {
  if (path.size() <= 2) return path;
  if (map.segment_safe(path.front(), path.back(), r_robot, depth)) return {path.front(), path.back()};
  using Clock = std::chrono::steady_clock;
  const bool limited = time_budget_s > 0.0;
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(time_budget_s));
  const auto first = detail::shortcut<Clock>(path, map, r_robot, depth, deadline, limited);
  if (limited && Clock::now() >= deadline) return first;
  return detail::shortcut<Clock>(resample(first, step), map, r_robot, depth, deadline, limited);
}

/// Tree expansion, goal attachment, shortest-branch extraction, improvement
/// and resampling. Goals that could not be attached are dropped; paths keep
/// their goal index. Throws PlanningFailed when no goal could be attached.
inline std::vector<ReferencePath> plan_branches(const OccupancyGrid& map, const Vec3& p_hat, const Aabb& bounds,
                                                const std::vector<CandidateGoal>& goals, const TreeConfig& cfg,
                                                Rng& rng, std::size_t* tree_size = nullptr) {
  if (goals.empty()) throw PlanningFailed("no goals to plan for");
  SearchTree tree = expand_tree(map, p_hat, bounds, cfg, rng);
  const auto leaves = connect_goals(tree, goals, cfg.d_extend, map, cfg.r_robot, cfg.check_depth);
  if (tree_size) *tree_size = tree.size();
  std::vector<std::size_t> reachable;
  for (std::size_t g = 0; g < goals.size(); ++g)
    if (!leaves[g].empty()) reachable.push_back(g);
  if (reachable.empty()) throw PlanningFailed("no goal could be attached to the tree");
  std::vector<ReferencePath> out(reachable.size());
  parallel_for(reachable.size(), cfg.threads, [&](std::size_t i) {
    const std::size_t g = reachable[i];
    const auto branch = extract_branch(tree, leaves[g]);
    const auto improved = improve_path(branch, map, cfg.r_robot, cfg.improve_budget_s, cfg.step, cfg.check_depth);
    out[i] = {goals[g].index, resample(improved, cfg.step)};
  });
  return out;
}

}  // namespace errt
