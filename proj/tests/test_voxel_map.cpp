#include "errt/voxel_map.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using errt::OccupancyGrid;
using errt::Vec3;
using errt::VoxelKey;
using errt::VoxelState;

TEST(VoxelMap, EmptyMapIsUnknown) {
  OccupancyGrid m(0.2);
  EXPECT_EQ(m.get_state({1.3, -2.7, 0.05}), VoxelState::Unknown);
  EXPECT_EQ(m.known_count(), 0u);
}

TEST(VoxelMap, WriteReadIdentity) {
  OccupancyGrid m(0.2);
  m.set(m.key_of({1.0, 2.0, 3.0}), VoxelState::Free);
  EXPECT_EQ(m.get_state({1.0, 2.0, 3.0}), VoxelState::Free);
}

TEST(VoxelMap, HalfOpenBoundary) {
  OccupancyGrid m(0.5);
  EXPECT_EQ(m.key_of({0.5, 0.0, -0.5}), (VoxelKey{1, 0, -1}));
  EXPECT_EQ(m.key_of({0.4999, 0.0, -0.0001}), (VoxelKey{0, 0, -1}));
}

TEST(VoxelMap, KeyCenterRoundTrip) {
  OccupancyGrid m(0.2, {0.3, -1.1, 4.0});
  for (int x = -40; x <= 40; x += 7)
    for (int y = -40; y <= 40; y += 9)
      for (int z = -40; z <= 40; z += 11) EXPECT_EQ(m.key_of(m.center_of({x, y, z})), (VoxelKey{x, y, z}));
}

TEST(VoxelMap, RayOfThreeVoxelsWithHit) {
  OccupancyGrid m(1.0);
  m.integrate_ray({0.5, 0.5, 0.5}, {3.5, 0.5, 0.5}, true);
  EXPECT_EQ(m.state({0, 0, 0}), VoxelState::Free);
  EXPECT_EQ(m.state({1, 0, 0}), VoxelState::Free);
  EXPECT_EQ(m.state({2, 0, 0}), VoxelState::Free);
  EXPECT_EQ(m.state({3, 0, 0}), VoxelState::Occupied);
  EXPECT_EQ(m.known_count(), 4u);
}

TEST(VoxelMap, RayInsideOneVoxel) {
  OccupancyGrid m(1.0);
  m.integrate_ray({0.1, 0.1, 0.1}, {0.8, 0.9, 0.4}, false);
  EXPECT_EQ(m.state({0, 0, 0}), VoxelState::Free);
  EXPECT_EQ(m.known_count(), 1u);
}

TEST(VoxelMap, RayMatchesSlabOracle) {
  errt::Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const Vec3 a = oracle::random_point(rng, Vec3::Constant(-2), Vec3::Constant(2));
    const Vec3 b = oracle::random_point(rng, Vec3::Constant(-2), Vec3::Constant(2));
    OccupancyGrid m(0.2);
    m.integrate_ray(a, b, false);
    const auto expect = oracle::crossed(a, b, m.origin(), m.resolution());
    std::set<VoxelKey> got;
    m.for_each_known([&](const VoxelKey& k, VoxelState) { got.insert(k); });
    ASSERT_EQ(got, expect) << "segment " << i;
  }
}

TEST(VoxelMap, CrossingRaysUnionNoFlicker) {
  OccupancyGrid m(0.2);
  const Vec3 a0(0.05, 1.0, 0.1), a1(2.05, 1.0, 0.1), b0(1.0, 0.05, 0.1), b1(1.0, 2.05, 0.1);
  m.integrate_ray(a0, a1, false);
  m.integrate_ray(b0, b1, false);
  auto expect = oracle::crossed(a0, a1, m.origin(), 0.2);
  const auto other = oracle::crossed(b0, b1, m.origin(), 0.2);
  expect.insert(other.begin(), other.end());
  std::set<VoxelKey> got;
  m.for_each_known([&](const VoxelKey& k, VoxelState s) {
    EXPECT_EQ(s, VoxelState::Free);
    got.insert(k);
  });
  EXPECT_EQ(got, expect);
}

TEST(VoxelMap, OccupiedIsSticky) {
  OccupancyGrid m(1.0);
  m.integrate_ray({0.5, 0.5, 0.5}, {2.5, 0.5, 0.5}, true);
  m.integrate_ray({0.5, 0.5, 0.5}, {4.5, 0.5, 0.5}, false);
  m.integrate_ray({0.5, 0.5, 0.5}, {2.5, 0.5, 0.5}, false);
  EXPECT_EQ(m.state({2, 0, 0}), VoxelState::Occupied);
  EXPECT_EQ(m.state({4, 0, 0}), VoxelState::Free);
}

TEST(VoxelMap, SphereAllFreeAndViolation) {
  OccupancyGrid m(0.2);
  const Vec3 c(1.1, 1.1, 1.1);
  const double r = 0.5;
  oracle::for_keys_in_box(m, c - Vec3::Constant(2 * r), c + Vec3::Constant(2 * r),
                          [&](const VoxelKey& k) { m.set(k, VoxelState::Free); });
  EXPECT_TRUE(m.sphere_safe(c, r));
  m.set(m.key_of(c + Vec3(0.25, 0.0, 0.0)), VoxelState::Occupied);
  EXPECT_FALSE(m.sphere_safe(c, r));
}

TEST(VoxelMap, SphereAndSegmentMatchOracle) {
  errt::Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    const auto m = oracle::random_map(rng, 24, 0.2, 0.01, 0.01);
    for (int q = 0; q < 40; ++q) {
      const Vec3 a = oracle::random_point(rng, Vec3::Constant(0.6), Vec3::Constant(4.2));
      const Vec3 b = oracle::random_point(rng, Vec3::Constant(0.6), Vec3::Constant(4.2));
      const double r = errt::uniform(rng, 0.05, 0.5);
      ASSERT_EQ(m.sphere_safe(a, r), oracle::sphere_safe(m, a, r));
      const Vec3 b_near = a + 0.3 * (b - a);
      ASSERT_EQ(m.segment_safe(a, b_near, r), oracle::segment_safe(m, a, b_near, r));
    }
  }
}

TEST(VoxelMap, SegmentDegenerateAndSymmetric) {
  errt::Rng rng(8);
  const auto m = oracle::random_map(rng, 20, 0.2, 0.005, 0.005);
  for (int q = 0; q < 200; ++q) {
    const Vec3 a = oracle::random_point(rng, Vec3::Constant(0.5), Vec3::Constant(3.5));
    const Vec3 b = oracle::random_point(rng, Vec3::Constant(0.5), Vec3::Constant(3.5));
    EXPECT_EQ(m.segment_safe(a, a, 0.3), m.sphere_safe(a, 0.3));
    EXPECT_EQ(m.segment_safe(a, b, 0.2), m.segment_safe(b, a, 0.2));
  }
}

TEST(VoxelMap, FreeCorridorIsSafe) {
  OccupancyGrid m(0.1);
  for (int x = -5; x < 60; ++x)
    for (int y = -10; y < 10; ++y)
      for (int z = -10; z < 10; ++z) m.set(VoxelKey{x, y, z}, VoxelState::Free);
  EXPECT_TRUE(m.segment_safe({0.0, 0.0, 0.0}, {5.0, 0.0, 0.0}, 0.3));
  m.set(m.key_of({2.5, 0.85, 0.0}), VoxelState::Occupied);
  EXPECT_TRUE(m.segment_safe({0.0, 0.0, 0.0}, {5.0, 0.0, 0.0}, 0.3));
}

TEST(VoxelMap, CoarseDepthIsConservative) {
  errt::Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const auto m = oracle::random_map(rng, 32, 0.2, 0.003, 0.003);
    for (int q = 0; q < 30; ++q) {
      const Vec3 a = oracle::random_point(rng, Vec3::Constant(1.0), Vec3::Constant(5.4));
      const Vec3 b = a + oracle::random_point(rng, Vec3::Constant(-0.5), Vec3::Constant(0.5));
      const double r = errt::uniform(rng, 0.1, 0.4);
      for (int d = 1; d <= 3; ++d) {
        if (!m.segment_safe(a, b, r, 0)) {
          EXPECT_FALSE(m.segment_safe(a, b, r, d));
        }
        if (!m.sphere_safe(a, r, 0)) {
          EXPECT_FALSE(m.sphere_safe(a, r, d));
        }
      }
    }
  }
}

TEST(VoxelMap, LocalBounds) {
  OccupancyGrid m(0.5);
  const Vec3 p(0.0, 0.0, 0.0);
  EXPECT_EQ(m.local_bounds(p, 4.0).min, Vec3::Constant(-2.0));
  EXPECT_EQ(m.local_bounds(p, 4.0).max, Vec3::Constant(2.0));
  // Free voxels only in the lower half: max z clips to the highest free center.
  for (int x = -4; x < 4; ++x)
    for (int y = -4; y < 4; ++y)
      for (int z = -4; z < 0; ++z) m.set(VoxelKey{x, y, z}, VoxelState::Free);
  const auto b = m.local_bounds(p, 4.0);
  EXPECT_DOUBLE_EQ(b.max.z(), -0.25);
  EXPECT_DOUBLE_EQ(b.min.z(), -1.75);
  EXPECT_DOUBLE_EQ(b.min.x(), -1.75);
  EXPECT_DOUBLE_EQ(b.max.x(), 1.75);
}

TEST(VoxelMap, LosSimpleCases) {
  OccupancyGrid m(1.0);
  for (int x = 0; x < 6; ++x) m.set(VoxelKey{x, 0, 0}, VoxelState::Free);
  EXPECT_TRUE(m.los_free({0.5, 0.5, 0.5}, {1, 0, 0}));
  EXPECT_TRUE(m.los_free({0.5, 0.5, 0.5}, {5, 0, 0}));
  m.set(VoxelKey{3, 0, 0}, VoxelState::Occupied);
  EXPECT_FALSE(m.los_free({0.5, 0.5, 0.5}, {5, 0, 0}));
  m.set(VoxelKey{3, 0, 0}, VoxelState::Unknown);
  EXPECT_FALSE(m.los_free({0.5, 0.5, 0.5}, {5, 0, 0}));
  m.set_los_unknown_blocks(false);
  EXPECT_TRUE(m.los_free({0.5, 0.5, 0.5}, {5, 0, 0}));
}

TEST(VoxelMap, LosMatchesOracle) {
  errt::Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const auto m = oracle::random_map(rng, 20, 0.2, 0.01, 0.02);
    for (int q = 0; q < 50; ++q) {
      const Vec3 from = oracle::random_point(rng, Vec3::Constant(0.1), Vec3::Constant(3.9));
      const VoxelKey target{static_cast<int>(rng() % 20), static_cast<int>(rng() % 20), static_cast<int>(rng() % 20)};
      ASSERT_EQ(m.los_free(from, target), oracle::los_free(m, from, target));
    }
  }
}

TEST(VoxelMap, FrustumFullyFreeIsEmpty) {
  OccupancyGrid m(0.5);
  for (int x = -10; x < 10; ++x)
    for (int y = -10; y < 10; ++y)
      for (int z = -10; z < 10; ++z) m.set(VoxelKey{x, y, z}, VoxelState::Free);
  errt::SensorGeometry s;
  s.range = 3.0;
  s.map_range = 6.0;
  EXPECT_TRUE(m.unknown_in_frustum({0.1, 0.2, 0.3}, s).empty());
}

TEST(VoxelMap, FrustumBallAndElevation) {
  OccupancyGrid m(0.25);
  errt::SensorGeometry s;
  s.range = 2.0;
  s.map_range = 4.0;
  const Vec3 pose(0.1, -0.05, 0.07);
  for (double fov : {std::numbers::pi, std::numbers::pi / 2, errt::deg2rad(45.0)}) {
    s.vertical_fov = fov;
    const auto got = m.unknown_in_frustum(pose, s);
    const auto expect = oracle::unknown_in_frustum(m, pose, s);
    EXPECT_EQ(std::set<VoxelKey>(got.begin(), got.end()), expect);
    EXPECT_EQ(got.size(), expect.size());
  }
}

TEST(VoxelMap, FrustumMatchesOracleOnRandomMaps) {
  errt::Rng rng(17);
  errt::SensorGeometry s;
  s.range = 2.5;
  s.map_range = 5.0;
  for (int t = 0; t < 20; ++t) {
    const auto m = oracle::random_map(rng, 24, 0.2, 0.2, 0.4);
    const Vec3 pose = oracle::random_point(rng, Vec3::Constant(0.5), Vec3::Constant(4.3));
    const auto got = m.unknown_in_frustum(pose, s);
    ASSERT_EQ(std::set<VoxelKey>(got.begin(), got.end()), oracle::unknown_in_frustum(m, pose, s));
    for (int d = 1; d <= 2; ++d) {
      const auto coarse = m.unknown_in_frustum(pose, s, d);
      const auto fine = oracle::unknown_in_frustum(m, pose, s);
      for (const auto& k : coarse) EXPECT_TRUE(fine.contains(k));
    }
  }
}

TEST(VoxelMap, MapFormatRoundTrip) {
  errt::Rng rng(2);
  const auto m = oracle::random_map(rng, 12, 0.15, 0.2, 0.3, {0.5, -1.25, 2.0});
  const std::string a = errt::dump_map(m);
  const auto m2 = errt::load_map_string(a);
  EXPECT_EQ(errt::dump_map(m2), a);
  EXPECT_EQ(m2.known_count(), m.known_count());
}

TEST(VoxelMap, MapFormatErrorsCarryLine) {
  try {
    errt::load_map_string("ERRTM1\nres 0.2\norigin 0 0 0\nf 1 2\n");
    FAIL();
  } catch (const errt::ParseError& e) {
    EXPECT_EQ(e.line(), 4);
  }
  EXPECT_THROW(errt::load_map_string("ERRTW1\n"), errt::ParseError);
  const auto m = errt::load_map_string("# comment\nERRTM1\nres 0.5 # trailing\norigin 0 0 0\no 1 2 3\n");
  EXPECT_EQ(m.state({1, 2, 3}), VoxelState::Occupied);
}
