#include "errt/config.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace errt;

TEST(Config, DefaultsMatchTableOne) {
  const AppConfig c;
  EXPECT_EQ(get_config_value(c, "L_local"), "40");
  EXPECT_EQ(get_config_value(c, "n_traj"), "60");
  EXPECT_EQ(get_config_value(c, "S_r"), "10");
  EXPECT_EQ(get_config_value(c, "N_max"), "2000");
  EXPECT_EQ(get_config_value(c, "d_info"), "6");
  EXPECT_EQ(get_config_value(c, "K_d"), "0.3");
  EXPECT_EQ(get_config_value(c, "K_i"), "0.4");
  EXPECT_EQ(get_config_value(c, "K_u"), "0.1");
  EXPECT_EQ(get_config_value(c, "r_robot"), "0.3");
}

TEST(Config, FieldTuningOverride) {
  AppConfig c;
  std::istringstream file("K_i = 0.4\nL_local = 24 # field\n");
  apply_config(c, file);
  apply_override(c, "K_i=0.8");
  EXPECT_EQ(c.mission.gain.k_i, 0.8);
  EXPECT_EQ(c.mission.l_local, 24.0);
}

TEST(Config, UnknownKeyNamesTheKey) {
  AppConfig c;
  try {
    apply_override(c, "K_x=1");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "K_x");
  }
  try {
    set_config_value(c, "n_traj", "many");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "n_traj");
  }
  EXPECT_THROW(apply_override(c, "n_traj"), ConfigError);
}

TEST(Config, ParseErrorCarriesLine) {
  AppConfig c;
  std::istringstream in("# comment\nseed = 3\nthis line is wrong\n");
  try {
    apply_config(c, in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Config, PrintReloadIsFixpoint) {
  AppConfig c;
  for (const char* kv : {"seed=17", "world_kind=cavern", "S_map=12", "gain_mode=endpoint", "plan_time_model=per_traj:0.02",
                         "Q_x=1,2,3,4,5,6,7,8", "start=1.5,2,1", "baseline=true", "world_size=10,12,3"})
    apply_override(c, kv);
  const std::string printed = print_config(c);
  AppConfig d;
  std::istringstream in(printed);
  apply_config(d, in);
  EXPECT_EQ(print_config(d), printed);
  EXPECT_EQ(d.seed, 17u);
  EXPECT_EQ(d.world_kind, WorldKind::Cavern);
  EXPECT_EQ(d.mission.gain.mode, GainMode::Endpoint);
  EXPECT_EQ(d.mission.nmpc.q_state[7], 8.0);
  ASSERT_TRUE(d.mission.start.has_value());
  EXPECT_EQ(*d.mission.start, Vec3(1.5, 2, 1));
}

TEST(Config, EveryKeyIsPrinted) {
  const std::string printed = print_config(AppConfig{});
  std::istringstream in(printed);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto key = line.substr(0, line.find(" = "));
    EXPECT_TRUE(is_config_key(key)) << key;
    ++n;
  }
  EXPECT_EQ(n, detail::config_keys().size());
}

TEST(Config, ResolvedMission) {
  AppConfig c;
  EXPECT_EQ(c.resolved_mission().sensor.map_range, 20.0);
  apply_override(c, "S_map=8");
  apply_override(c, "S_theta_deg=30");
  const auto m = c.resolved_mission();
  EXPECT_EQ(m.sensor.map_range, 8.0);
  EXPECT_NEAR(m.beams.vertical_fov, deg2rad(30.0), 1e-15);
}

TEST(Config, SeedAcceptsFullRange) {
  AppConfig c;
  apply_override(c, "seed=18446744073709551615");
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  EXPECT_THROW(apply_override(c, "seed=-1"), ConfigError);
}
