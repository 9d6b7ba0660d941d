#include "errt/mission.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace errt;

namespace {

MissionConfig small_cfg() {
  MissionConfig c;
  c.l_local = 12.0;
  c.time_budget_s = 60.0;
  c.sensor.range = 4.0;
  c.sensor.map_range = 8.0;
  c.beams.n_elev = 16;
  c.beams.n_azim = 180;
  c.sampler.n_traj = 10;
  c.tree.n_max = 300;
  c.gain.d_info = 2.4;
  return c;
}

// Sealed 6 x 6 x 1.2 m room.
GroundTruthWorld sealed_room() { return GroundTruthWorld(0.2, 30, 30, 6); }

const GroundTruthWorld& tunnel() {
  static const GroundTruthWorld w = gen_world(WorldKind::Tunnel, 1, {});
  return w;
}

}  // namespace

TEST(Mission, PlanTimeModelParsing) {
  EXPECT_EQ(parse_plan_time_model("measured").kind, PlanTimeKind::Measured);
  EXPECT_EQ(parse_plan_time_model("zero").kind, PlanTimeKind::Zero);
  const auto f = parse_plan_time_model("fixed:2.5");
  EXPECT_EQ(f.kind, PlanTimeKind::Fixed);
  EXPECT_EQ(f.charge(9.0, 60), 2.5);
  const auto p = parse_plan_time_model("per_traj:0.01");
  EXPECT_NEAR(p.charge(9.0, 120), 1.2, 1e-12);
  EXPECT_EQ(to_string(p), "per_traj:0.01");
  EXPECT_THROW(parse_plan_time_model("fixed:"), ConfigError);
  EXPECT_THROW(parse_plan_time_model("fixed:-1"), ConfigError);
  EXPECT_THROW(parse_plan_time_model("wall"), ConfigError);
}

TEST(Mission, ConfigValidation) {
  MissionConfig c;
  c.replan_fraction = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.time_budget_s = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.sampler.n_traj = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Mission, ExecutedStages) {
  EXPECT_EQ(detail::executed_stages(1, 50, 3), 3u);
  EXPECT_EQ(detail::executed_stages(6, 50, 3), 8u);
  EXPECT_EQ(detail::executed_stages(50, 50, 3), 50u);
  EXPECT_EQ(detail::executed_stages(70, 50, 3), 69u);
  EXPECT_EQ(detail::executed_stages(1, 50, 0), 1u);
}

TEST(Mission, TrackReferenceAppendsTail) {
  MissionConfig c;
  c.nmpc.horizon = 10;
  c.nmpc.max_iters = 20;
  std::vector<Vec3> ref;
  for (int i = 0; i < 15; ++i) ref.push_back({0.4 * i, 0, 1});
  UavState x;
  x.p = ref.front();
  const auto t = detail::track_reference(x, ref, c);
  ASSERT_EQ(t.states.size(), 15u);
  ASSERT_EQ(t.inputs.size(), 14u);
  for (std::size_t l = 11; l < 15; ++l) EXPECT_EQ(t.states[l].p, ref[l]);
}

TEST(Mission, StartWithoutClearanceThrows) {
  auto w = sealed_room();
  MissionConfig c = small_cfg();
  c.start = Vec3(0.1, 0.1, 0.1);
  Rng rng(1);
  EXPECT_THROW(run_mission(w, c, rng), Error);
}

TEST(Mission, SealedRoomCompletes) {
  const auto w = sealed_room();
  MissionConfig c = small_cfg();
  c.time_budget_s = 600.0;
  const CoverageSet cov(w, default_start(w), c.r_robot, c.sensor.map_range);
  Rng rng(1);
  MissionOptions opt;
  opt.coverage = &cov;
  const auto r = run_mission(w, c, rng, opt);
  EXPECT_EQ(r.status, MissionStatus::LocallyComplete);
  EXPECT_LE(r.selected_states.size(), 3u);
  EXPECT_GE(r.rows.back().coverage, 0.95);
}

TEST(Mission, RowInvariantsAndIdleAccounting) {
  MissionConfig c = small_cfg();
  c.plan_time = {PlanTimeKind::Fixed, 1.5};
  const CoverageSet cov(tunnel(), default_start(tunnel()), c.r_robot, c.sensor.map_range);
  Rng rng(2);
  MissionOptions opt;
  opt.coverage = &cov;
  const auto r = run_mission(tunnel(), c, rng, opt);
  ASSERT_GT(r.rows.size(), 2u);
  EXPECT_EQ(r.rows.front().t_sim, 0.0);
  EXPECT_EQ(r.rows.front().plan_idx, -1);
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    EXPECT_GT(r.rows[i].t_sim, r.rows[i - 1].t_sim);
    EXPECT_GE(r.rows[i].known_voxels, r.rows[i - 1].known_voxels);
    EXPECT_GE(r.rows[i].coverage, r.rows[i - 1].coverage);
    EXPECT_GE(r.rows[i].path_len_m, r.rows[i - 1].path_len_m);
  }
  EXPECT_NEAR(r.rows.back().t_sim, r.motion_time_s + 1.5 * r.plans, 1e-9);
  EXPECT_NEAR(r.idle_time_s, 1.5 * r.plans, 1e-9);
  EXPECT_NEAR(r.rows.back().path_len_m, r.path_len_m, 1e-12);
  // Ideal tracking: executed positions are the selected states, in order.
  std::vector<Vec3> expect{r.executed.front()};
  for (const auto& s : r.selected_states) expect.insert(expect.end(), s.begin() + 1, s.end());
  ASSERT_GE(expect.size(), r.executed.size());
  for (std::size_t i = 0; i < r.executed.size(); ++i) EXPECT_EQ(r.executed[i], expect[i]);
}

TEST(Mission, ExecutedMotionKeepsClearance) {
  MissionConfig c = small_cfg();
  for (auto kind : {WorldKind::Rooms, WorldKind::Cavern}) {
    const auto w = gen_world(kind, 3, {});
    Rng rng(3);
    const auto r = run_mission(w, c, rng);
    for (const auto& p : r.executed) EXPECT_GT(w.clearance(p, 1.0), c.r_robot - w.resolution()) << to_string(kind);
  }
}

TEST(Mission, SelectedStatesSafeOnPlanningMap) {
  MissionConfig c = small_cfg();
  MissionObserver obs;
  int checked = 0;
  obs.on_plan = [&](int, const PlanResult& p, const OccupancyGrid& map) {
    for (const auto& s : p.candidates[p.selected].trajectory.states) {
      EXPECT_TRUE(oracle::sphere_safe(map, s.p, c.r_robot));
      ++checked;
    }
    // Endpoint gain never exceeds gain along the same trajectory.
    GainConfig e = c.gain;
    e.mode = GainMode::Endpoint;
    for (const auto& cand : p.candidates)
      EXPECT_LE(info_gain_along(map, cand.trajectory.states, c.sensor, e), cand.nu);
  };
  MissionOptions opt;
  opt.observer = &obs;
  Rng rng(4);
  run_mission(tunnel(), c, rng, opt);
  EXPECT_GT(checked, 0);
}

TEST(Mission, DeterministicAcrossThreadCounts) {
  MissionConfig c = small_cfg();
  c.time_budget_s = 40.0;
  auto csv = [&](unsigned threads) {
    MissionConfig cc = c;
    cc.threads = threads;
    Rng rng(5);
    std::ostringstream os;
    write_metrics_csv(run_mission(tunnel(), cc, rng).rows, os);
    return os.str();
  };
  const std::string a = csv(1);
  EXPECT_EQ(a, csv(1));
  EXPECT_EQ(a, csv(3));
}

TEST(Mission, BaselineHasSameSchema) {
  MissionConfig c = small_cfg();
  c.time_budget_s = 30.0;
  Rng rng(6);
  const auto r = run_baseline(tunnel(), c, rng);
  std::ostringstream os;
  write_metrics_csv(r.rows, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "t_sim,plan_idx,x,y,z,speed,known_voxels,known_volume_m3,path_len_m,plan_compute_s");
  EXPECT_GT(r.rows.size(), 1u);
}

TEST(Mission, TimeToCoverage) {
  std::vector<MetricsRow> rows(3);
  rows[0].t_sim = 0.0;
  rows[0].coverage = 0.2;
  rows[1].t_sim = 5.0;
  rows[1].coverage = 0.85;
  rows[2].t_sim = 9.0;
  rows[2].coverage = 0.9;
  EXPECT_EQ(time_to_coverage(rows), 5.0);
  EXPECT_TRUE(std::isinf(time_to_coverage(rows, 0.95)));
}

TEST(Mission, CoverageSetOfOpenRoomIsWholeRoom) {
  const auto w = sealed_room();
  const CoverageSet cov(w, default_start(w), 0.3, 8.0);
  // Every free voxel sees the reachable core directly in a convex room.
  EXPECT_EQ(cov.size(), w.voxel_count());
  OccupancyGrid empty(0.2);
  EXPECT_EQ(cov.fraction(empty), 0.0);
}

TEST(Mission, TrajectoryCsv) {
  DynamicTrajectory t;
  t.states.resize(2);
  t.states[1].p = {1, 2, 3};
  t.inputs = {{9.81, 0.1, -0.1}};
  std::ostringstream os;
  write_trajectory_csv(t, os);
  EXPECT_EQ(os.str(),
            "stage,x,y,z,vx,vy,vz,phi,theta,uT,uphi,utheta\n"
            "0,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,9.810000,0.100000,-0.100000\n"
            "1,1.000000,2.000000,3.000000,0.000000,0.000000,0.000000,0.000000,0.000000,9.810000,0.100000,-0.100000\n");
}
