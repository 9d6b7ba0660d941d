#include "errt/goal_sampler.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace errt;

namespace {

// Free box of n^3 voxels at res 0.2 starting at the origin, surrounded by Unknown.
OccupancyGrid free_box(int n) {
  OccupancyGrid m(0.2);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      for (int z = 0; z < n; ++z) m.set(VoxelKey{x, y, z}, VoxelState::Free);
  return m;
}

SensorGeometry small_sensor() {
  SensorGeometry s;
  s.range = 2.0;
  s.map_range = 4.0;
  return s;
}

}  // namespace

TEST(GoalSampler, FullyMappedSpaceIsDeadEnd) {
  OccupancyGrid m(0.2);
  // Occupied shell around a free interior, no Unknown within sensor range.
  for (int x = -15; x < 25; ++x)
    for (int y = -15; y < 25; ++y)
      for (int z = -15; z < 25; ++z) {
        const bool inside = x >= 0 && x < 10 && y >= 0 && y < 10 && z >= 0 && z < 10;
        m.set(VoxelKey{x, y, z}, inside ? VoxelState::Free : VoxelState::Occupied);
      }
  GoalSamplerConfig cfg;
  cfg.n_traj = 5;
  cfg.max_attempts = 2000;
  Rng rng(1);
  EXPECT_THROW(sample_goals(m, {1, 1, 1}, {{0, 0, 0}, {2, 2, 2}}, small_sensor(), cfg, rng), DeadEnd);
}

TEST(GoalSampler, SinglePocketYieldsOneGoal) {
  // Free corridor along x, walled except one Unknown voxel at its end. Goals
  // can only see it from a short stretch; a spacing larger than the stretch
  // admits exactly one goal.
  OccupancyGrid m(0.2);
  for (int x = -12; x < 40; ++x)
    for (int y = -12; y < 15; ++y)
      for (int z = -12; z < 15; ++z) {
        const bool corridor = x >= 0 && x < 30 && y >= 0 && y < 5 && z >= 0 && z < 5;
        m.set(VoxelKey{x, y, z}, corridor ? VoxelState::Free : VoxelState::Occupied);
      }
  m.set(VoxelKey{30, 2, 2}, VoxelState::Unknown);
  SensorGeometry s = small_sensor();
  s.range = 1.5;
  GoalSamplerConfig cfg;
  cfg.n_traj = 5;
  cfg.d_gc = 4.0;
  cfg.d_goal_min = 0.0;
  cfg.max_attempts = 20000;
  Rng rng(3);
  const Aabb bounds{{0, 0, 0}, {6, 1, 1}};
  const auto goals = sample_goals(m, {0.5, 0.5, 0.5}, bounds, s, cfg, rng);
  ASSERT_EQ(goals.size(), 1u);
  EXPECT_GE(oracle::visible_unknown(m, goals[0].position, s), 1u);
  EXPECT_GT(goals[0].position.x(), 6.1 - 1.5);
}

TEST(GoalSampler, InvariantsOnRandomMaps) {
  Rng world_rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    OccupancyGrid m = oracle::random_map(world_rng, 24, 0.2, 0.03, 0.05);
    GoalSamplerConfig cfg;
    cfg.n_traj = 10;
    cfg.r_robot = 0.2;
    cfg.max_attempts = 4000;
    cfg.nu_min = trial % 2 == 0 ? 0 : 3;
    const Vec3 p_hat(2.4, 2.4, 2.4);
    const Aabb bounds{{0.2, 0.2, 0.2}, {4.6, 4.6, 4.6}};
    const SensorGeometry s = small_sensor();
    Rng rng(static_cast<std::uint64_t>(trial));
    std::vector<CandidateGoal> goals;
    try {
      goals = sample_goals(m, p_hat, bounds, s, cfg, rng);
    } catch (const DeadEnd&) {
      continue;
    }
    ASSERT_LE(goals.size(), 10u);
    for (std::size_t i = 0; i < goals.size(); ++i) {
      const Vec3& g = goals[i].position;
      EXPECT_EQ(goals[i].index, static_cast<int>(i));
      EXPECT_TRUE(bounds.contains(g));
      EXPECT_TRUE(oracle::sphere_safe(m, g, cfg.r_robot));
      EXPECT_GE((g - p_hat).norm(), cfg.d_goal_min);
      EXPECT_GT(oracle::visible_unknown(m, g, s), static_cast<std::size_t>(cfg.nu_min));
      for (std::size_t j = 0; j < i; ++j) EXPECT_GE((goals[j].position - g).norm(), cfg.d_gc);
    }
  }
}

TEST(GoalSampler, Deterministic) {
  const OccupancyGrid m = free_box(20);
  GoalSamplerConfig cfg;
  cfg.n_traj = 8;
  const Aabb bounds{{0.4, 0.4, 0.4}, {3.6, 3.6, 3.6}};
  Rng a(42), b(42);
  const auto ga = sample_goals(m, {2, 2, 2}, bounds, small_sensor(), cfg, a);
  const auto gb = sample_goals(m, {2, 2, 2}, bounds, small_sensor(), cfg, b);
  ASSERT_EQ(ga.size(), gb.size());
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_EQ(ga[i].position, gb[i].position);
}

TEST(GoalSampler, ConfigValidation) {
  const OccupancyGrid m = free_box(4);
  Rng rng(1);
  GoalSamplerConfig cfg;
  cfg.n_traj = 0;
  EXPECT_THROW(sample_goals(m, {0.4, 0.4, 0.4}, {{0, 0, 0}, {1, 1, 1}}, small_sensor(), cfg, rng), ConfigError);
  cfg = {};
  cfg.d_gc = 0.0;
  EXPECT_THROW(sample_goals(m, {0.4, 0.4, 0.4}, {{0, 0, 0}, {1, 1, 1}}, small_sensor(), cfg, rng), ConfigError);
  cfg = {};
  cfg.n_traj = 10;
  cfg.max_attempts = 5;
  EXPECT_THROW(sample_goals(m, {0.4, 0.4, 0.4}, {{0, 0, 0}, {1, 1, 1}}, small_sensor(), cfg, rng), ConfigError);
}

TEST(GoalSampler, VisibleCountMatchesOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 15; ++trial) {
    const OccupancyGrid m = oracle::random_map(rng, 20, 0.2, 0.05, 0.3);
    const Vec3 p = oracle::random_point(rng, {0.5, 0.5, 0.5}, {3.5, 3.5, 3.5});
    EXPECT_EQ(visible_unknown_count(m, p, small_sensor(), 0), oracle::visible_unknown(m, p, small_sensor()));
  }
}
