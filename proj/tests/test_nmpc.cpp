#include "errt/nmpc.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace errt;

namespace {

struct Instance {
  UavState x0;
  std::vector<ControlInput> u;
  std::vector<Vec3> ref;
};

Instance random_instance(Rng& rng, const NmpcConfig& c) {
  Instance in;
  in.x0.p = oracle::random_point(rng, {-1, -1, -1}, {1, 1, 1});
  in.x0.v = oracle::random_point(rng, {-1, -1, -1}, {1, 1, 1});
  in.x0.phi = uniform(rng, -0.3, 0.3);
  in.x0.theta = uniform(rng, -0.3, 0.3);
  for (int k = 0; k < c.horizon; ++k)
    in.u.push_back({uniform(rng, c.u_min.thrust, c.u_max.thrust), uniform(rng, -0.35, 0.35), uniform(rng, -0.35, 0.35)});
  Vec3 p = in.x0.p;
  const int n = 5 + static_cast<int>(rng() % 40);
  for (int i = 0; i < n; ++i) {
    p += oracle::random_point(rng, {-0.4, -0.4, -0.1}, {0.4, 0.4, 0.1}).normalized() * 0.4;
    in.ref.push_back(p);
  }
  return in;
}

}  // namespace

TEST(Nmpc, HoverIsEquilibrium) {
  ModelParams m;
  m.damping = {0.7, 0.3, 1.1};
  UavState x;
  x.p = {1, 2, 3};
  const auto n = step(x, {m.g, 0, 0}, 0.4, m);
  EXPECT_EQ(n.p, x.p);
  EXPECT_EQ(n.v, x.v);
  EXPECT_EQ(n.phi, 0.0);
  EXPECT_EQ(n.theta, 0.0);
}

TEST(Nmpc, FreeFall) {
  ModelParams m;
  m.damping = Vec3::Zero();
  const auto n = step(UavState{}, {0, 0, 0}, 0.4, m);
  EXPECT_NEAR(n.v.z(), -3.924, 1e-12);
}

TEST(Nmpc, AttitudeChannel) {
  const auto n = step(UavState{}, {9.81, 0.1, 0}, 0.4, ModelParams{});
  EXPECT_NEAR(n.phi, 0.08, 1e-12);
  EXPECT_EQ(n.theta, 0.0);
}

TEST(Nmpc, RolloutMatchesOracle) {
  NmpcConfig c;
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto in = random_instance(rng, c);
    const auto xs = rollout(in.x0, in.u, c.dt, c.model);
    const auto ox = oracle::rollout(in.x0, in.u, c);
    ASSERT_EQ(xs.size(), in.u.size() + 1);
    for (std::size_t l = 0; l < xs.size(); ++l) {
      for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(xs[l].p[i], ox[l][static_cast<std::size_t>(i)], 1e-9);
        EXPECT_NEAR(xs[l].v[i], ox[l][static_cast<std::size_t>(3 + i)], 1e-9);
      }
      EXPECT_NEAR(xs[l].phi, ox[l][6], 1e-12);
      EXPECT_NEAR(xs[l].theta, ox[l][7], 1e-12);
    }
  }
}

TEST(Nmpc, HoverRolloutIsConstant) {
  NmpcConfig c;
  UavState x;
  x.p = {0.5, -1, 2};
  const auto xs = rollout(x, std::vector<ControlInput>(10, c.u_ref()), c.dt, c.model);
  for (const auto& s : xs) EXPECT_EQ(s.p, x.p);
}

TEST(Nmpc, ObjectiveZeroAtReference) {
  NmpcConfig c;
  UavState x;
  x.p = {1, 1, 1};
  EXPECT_EQ(objective(x, std::vector<ControlInput>(static_cast<std::size_t>(c.horizon), c.u_ref()), {x.p}, c), 0.0);
}

TEST(Nmpc, ObjectiveMatchesOracleAndIsLinearInStateWeights) {
  NmpcConfig c;
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto in = random_instance(rng, c);
    const double j = objective(in.x0, in.u, in.ref, c);
    EXPECT_NEAR(j, oracle::objective(in.x0, in.u, in.ref, c), 1e-9 * std::max(1.0, j));
    NmpcConfig c2 = c;
    for (auto& q : c2.q_state) q *= 2.0;
    NmpcConfig c0 = c;
    for (auto& q : c0.q_state) q = 0.0;
    const double input_part = objective(in.x0, in.u, in.ref, c0);
    EXPECT_NEAR(objective(in.x0, in.u, in.ref, c2), input_part + 2.0 * (j - input_part), 1e-9 * std::max(1.0, j));
  }
}

TEST(Nmpc, AdjointGradientMatchesFiniteDifferences) {
  NmpcConfig c;
  Rng rng(7);
  for (int t = 0; t < 30; ++t) {
    const auto in = random_instance(rng, c);
    std::vector<double> g;
    const double j = objective_gradient(in.x0, in.u, in.ref, c, g);
    EXPECT_NEAR(j, objective(in.x0, in.u, in.ref, c), 1e-9 * std::max(1.0, j));
    const auto fd = oracle::fd_gradient(in.x0, in.u, in.ref, c);
    ASSERT_EQ(g.size(), fd.size());
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      err = std::max(err, std::abs(g[k] - fd[k]));
      scale = std::max(scale, std::abs(fd[k]));
    }
    EXPECT_LT(err / scale, 1e-4);
  }
}

TEST(Nmpc, SolveAtReferenceStaysHover) {
  NmpcConfig c;
  UavState x;
  x.p = {2, 2, 1};
  const auto t = solve(x, {x.p}, c);
  EXPECT_LE(t.final_cost, 1e-9);
  EXPECT_TRUE(t.converged);
  for (const auto& u : t.inputs) {
    EXPECT_EQ(u.thrust, c.model.g);
    EXPECT_EQ(u.phi_ref, 0.0);
    EXPECT_EQ(u.theta_ref, 0.0);
  }
}

TEST(Nmpc, SolveIsFeasibleMonotoneAndConsistent) {
  NmpcConfig c;
  c.max_iters = 60;
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const auto in = random_instance(rng, c);
    std::vector<double> hist;
    const auto tr = solve(in.x0, in.ref, c, &hist);
    ASSERT_EQ(tr.inputs.size(), static_cast<std::size_t>(c.horizon));
    ASSERT_EQ(tr.states.size(), tr.inputs.size() + 1);
    for (const auto& u : tr.inputs)
      for (int i = 0; i < 3; ++i) {
        EXPECT_GE(u[i], c.u_min[i]);
        EXPECT_LE(u[i], c.u_max[i]);
      }
    for (std::size_t k = 1; k < hist.size(); ++k) EXPECT_LE(hist[k], hist[k - 1]);
    EXPECT_EQ(tr.final_cost, hist.back());
    const auto xs = rollout(in.x0, tr.inputs, c.dt, c.model);
    for (std::size_t l = 0; l < xs.size(); ++l) EXPECT_EQ(xs[l].p, tr.states[l].p);
  }
}

TEST(Nmpc, TracksStraightReference) {
  NmpcConfig c;
  std::vector<Vec3> ref;
  for (int i = 0; i <= 20; ++i) ref.push_back({0.4 * i, 0, 1});
  UavState x;
  x.p = {0, 0, 1};
  const auto t = solve(x, ref, c);
  EXPECT_NEAR(t.states.back().p.x(), 8.0, 0.3);
  EXPECT_NEAR(t.states.back().p.y(), 0.0, 0.05);
}

TEST(Nmpc, NonFiniteStartReturnsHover) {
  UavState x;
  x.p = {std::nan(""), 0, 0};
  const auto t = solve(x, {{0, 0, 0}}, NmpcConfig{});
  EXPECT_FALSE(t.converged);
  EXPECT_EQ(t.inputs.front().thrust, 9.81);
}

TEST(Nmpc, ActuationCost) {
  NmpcConfig c;
  EXPECT_EQ(actuation_cost(std::vector<ControlInput>(5, c.u_ref()), c, 0.1), 0.0);
  c.q_input = {1, 1, 1};
  c.q_rate = {0, 0, 0};
  EXPECT_NEAR(actuation_cost({{c.model.g + 1.0, 0, 0}}, c, 0.1), 0.1, 1e-15);
}

TEST(Nmpc, ReversalCostsMoreActuation) {
  NmpcConfig c;
  std::vector<Vec3> straight, reversal;
  for (int i = 0; i <= 15; ++i) straight.push_back({0.4 * i, 0, 1});
  for (int i = 0; i <= 15; ++i) reversal.push_back({i <= 8 ? 0.4 * i : 0.4 * (16 - i), 0, 1});
  const auto a = solve({{0, 0, 1}, Vec3::Zero(), 0, 0}, straight, c);
  const auto b = solve({{0, 0, 1}, Vec3::Zero(), 0, 0}, reversal, c);
  EXPECT_LT(actuation_cost(a.inputs, c, 0.1), actuation_cost(b.inputs, c, 0.1));
}

TEST(Nmpc, HorizonSpan) {
  NmpcConfig c;
  EXPECT_NEAR(c.horizon * c.dt * 1.0, 20.0, 1e-12);
}

TEST(Nmpc, ConfigValidation) {
  NmpcConfig c;
  c.horizon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.u_min.thrust = c.u_max.thrust;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.q_state[0] = c.q_state[1] = c.q_state[2] = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.model.tau_phi = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}
