#pragma once

#include "errt/common.hpp"

#include <array>

namespace errt {

/// UAV state: position, velocity, and the two tilt angles. `phi` is the
/// pitch-channel angle (tilts thrust toward +x), `theta` the roll-channel
/// angle (tilts thrust toward -y).
struct UavState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double phi = 0.0;
  double theta = 0.0;

  bool finite() const { return p.allFinite() && v.allFinite() && std::isfinite(phi) && std::isfinite(theta); }
};

/// Mass-normalized thrust (m/s^2) and the two attitude references (rad).
struct ControlInput {
  double thrust = 0.0;
  double phi_ref = 0.0;
  double theta_ref = 0.0;

  double operator[](int i) const { return i == 0 ? thrust : (i == 1 ? phi_ref : theta_ref); }
  double& operator[](int i) { return i == 0 ? thrust : (i == 1 ? phi_ref : theta_ref); }
};

struct ModelParams {
  double g = 9.81;
  Vec3 damping{0.1, 0.1, 0.2};  // A_x, A_y, A_z in 1/s
  double tau_phi = 0.5;
  double tau_theta = 0.5;
  double k_phi = 1.0;
  double k_theta = 1.0;

  void validate() const {
    if (!(g > 0.0)) throw ConfigError("g", "must be positive");
    if ((damping.array() < 0.0).any()) throw ConfigError("A_x", "damping must be non-negative");
    if (!(tau_phi > 0.0)) throw ConfigError("tau_phi", "must be positive");
    if (!(tau_theta > 0.0)) throw ConfigError("tau_theta", "must be positive");
  }
};

struct NmpcConfig {
  int horizon = 50;
  double dt = 0.4;
  // Diagonal weights over (p, v, phi, theta), (u_T, u_phi, u_theta) and input rates.
  std::array<double, 8> q_state{4, 4, 4, 1, 1, 1, 0.5, 0.5};
  std::array<double, 3> q_input{1, 2, 2};
  std::array<double, 3> q_rate{1, 4, 4};
  ControlInput u_min{0.5 * 9.81, -0.35, -0.35};
  ControlInput u_max{1.5 * 9.81, 0.35, 0.35};
  int max_iters = 200;
  double tolerance = 1e-3;
  bool accelerate = true;  // Barzilai-Borwein step lengths
  ModelParams model;

  ControlInput u_ref() const { return {model.g, 0.0, 0.0}; }

  void validate() const {
    model.validate();
    if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("dt", "must be positive");
    for (double q : q_state)
      if (!(q >= 0.0)) throw ConfigError("Q_x", "weights must be non-negative");
    if (!(q_state[0] > 0.0 || q_state[1] > 0.0 || q_state[2] > 0.0))
      throw ConfigError("Q_x", "at least one position weight must be positive");
    for (int i = 0; i < 3; ++i) {
      if (!(q_input[i] >= 0.0)) throw ConfigError("Q_u", "weights must be non-negative");
      if (!(q_rate[i] >= 0.0)) throw ConfigError("Q_du", "weights must be non-negative");
      if (!(u_min[i] < u_max[i])) throw ConfigError("u_bounds", "u_min must be below u_max");
    }
    if (max_iters < 0) throw ConfigError("nmpc_max_iters", "must be non-negative");
  }
};

struct DynamicTrajectory {
  std::vector<UavState> states;      // horizon + 1
  std::vector<ControlInput> inputs;  // horizon
  bool converged = false;
  double final_cost = 0.0;
  int iterations = 0;
};

namespace detail {

inline Vec3 thrust_direction(double phi, double theta) {
  return {std::sin(phi) * std::cos(theta), -std::sin(theta), std::cos(phi) * std::cos(theta)};
}

}  // namespace detail

/// One forward-Euler step of the UAV model.
inline UavState step(const UavState& x, const ControlInput& u, double dt, const ModelParams& m) {
  const Vec3 acc = u.thrust * detail::thrust_direction(x.phi, x.theta) - Vec3(0, 0, m.g) - m.damping.cwiseProduct(x.v);
  UavState n;
  n.p = x.p + dt * x.v;
  n.v = x.v + dt * acc;
  n.phi = x.phi + dt * (m.k_phi * u.phi_ref - x.phi) / m.tau_phi;
  n.theta = x.theta + dt * (m.k_theta * u.theta_ref - x.theta) / m.tau_theta;
  return n;
}

inline std::vector<UavState> rollout(const UavState& x0, const std::vector<ControlInput>& inputs, double dt,
                                     const ModelParams& m) {
  std::vector<UavState> xs;
  xs.reserve(inputs.size() + 1);
  xs.push_back(x0);
  for (const auto& u : inputs) xs.push_back(step(xs.back(), u, dt, m));
  return xs;
}

namespace detail {

inline const Vec3& reference_at(const std::vector<Vec3>& ref, std::size_t l) {
  return ref[std::min(l, ref.size() - 1)];
}

inline double stage_cost(const UavState& x, const Vec3& ref, const std::array<double, 8>& q) {
  double c = 0.0;
  for (int i = 0; i < 3; ++i) {
    c += q[i] * (x.p[i] - ref[i]) * (x.p[i] - ref[i]);
    c += q[3 + i] * x.v[i] * x.v[i];
  }
  return c + q[6] * x.phi * x.phi + q[7] * x.theta * x.theta;
}

inline double input_cost(const ControlInput& u, const ControlInput& prev, const ControlInput& uref,
                         const std::array<double, 3>& qu, const std::array<double, 3>& qdu) {
  double c = 0.0;
  for (int i = 0; i < 3; ++i) {
    c += qu[i] * (uref[i] - u[i]) * (uref[i] - u[i]);
    c += qdu[i] * (u[i] - prev[i]) * (u[i] - prev[i]);
  }
  return c;
}

}  // namespace detail

/// Tracking objective over stages 0..N: weighted position error against the
/// reference (held at its last waypoint), velocity and angles against zero,
/// input deviation from hover, and input rate with u_{-1} = u_0.
inline double objective(const UavState& x0, const std::vector<ControlInput>& inputs, const std::vector<Vec3>& ref,
                        const NmpcConfig& cfg) {
  if (ref.empty()) throw Error("reference path is empty");
  const auto xs = rollout(x0, inputs, cfg.dt, cfg.model);
  const ControlInput uref = cfg.u_ref();
  double j = 0.0;
  for (std::size_t l = 0; l < xs.size(); ++l) j += detail::stage_cost(xs[l], detail::reference_at(ref, l), cfg.q_state);
  for (std::size_t l = 0; l < inputs.size(); ++l)
    j += detail::input_cost(inputs[l], inputs[l == 0 ? 0 : l - 1], uref, cfg.q_input, cfg.q_rate);
  return j;
}

/// Objective and its gradient with respect to the stacked inputs, the latter
/// accumulated by a reverse (adjoint) sweep through the Euler recursion.
/// Gradient layout: 3 entries per stage (thrust, phi_ref, theta_ref).
inline double objective_gradient(const UavState& x0, const std::vector<ControlInput>& inputs,
                                 const std::vector<Vec3>& ref, const NmpcConfig& cfg, std::vector<double>& grad) {
  if (ref.empty()) throw Error("reference path is empty");
  const ModelParams& m = cfg.model;
  const double dt = cfg.dt;
  const auto& q = cfg.q_state;
  const std::size_t n = inputs.size();
  const auto xs = rollout(x0, inputs, dt, m);
  const ControlInput uref = cfg.u_ref();
  grad.assign(3 * n, 0.0);

  double j = 0.0;
  for (std::size_t l = 0; l < xs.size(); ++l) j += detail::stage_cost(xs[l], detail::reference_at(ref, l), q);
  for (std::size_t l = 0; l < n; ++l) {
    const ControlInput& prev = inputs[l == 0 ? 0 : l - 1];
    j += detail::input_cost(inputs[l], prev, uref, cfg.q_input, cfg.q_rate);
    for (int i = 0; i < 3; ++i) {
      grad[3 * l + i] += 2.0 * cfg.q_input[i] * (inputs[l][i] - uref[i]);
      if (l > 0) {
        const double r = 2.0 * cfg.q_rate[i] * (inputs[l][i] - prev[i]);
        grad[3 * l + i] += r;
        grad[3 * (l - 1) + i] -= r;
      }
    }
  }

  // Adjoint of the stage cost gradient w.r.t. state l.
  auto stage_grad = [&](std::size_t l, Vec3& lp, Vec3& lv, double& lphi, double& ltheta) {
    const Vec3& r = detail::reference_at(ref, l);
    const UavState& x = xs[l];
    for (int i = 0; i < 3; ++i) {
      lp[i] = 2.0 * q[i] * (x.p[i] - r[i]);
      lv[i] = 2.0 * q[3 + i] * x.v[i];
    }
    lphi = 2.0 * q[6] * x.phi;
    ltheta = 2.0 * q[7] * x.theta;
  };

  Vec3 lp, lv;
  double lphi = 0.0, ltheta = 0.0;
  stage_grad(n, lp, lv, lphi, ltheta);
  for (std::size_t k = n; k-- > 0;) {
    const UavState& x = xs[k];
    const ControlInput& u = inputs[k];
    const double sp = std::sin(x.phi), cp = std::cos(x.phi), st = std::sin(x.theta), ct = std::cos(x.theta);
    const Vec3 b(sp * ct, -st, cp * ct);
    const Vec3 db_dphi(cp * ct, 0.0, -sp * ct);
    const Vec3 db_dtheta(-sp * st, -ct, -cp * st);

    grad[3 * k + 0] += dt * b.dot(lv);
    grad[3 * k + 1] += dt * m.k_phi / m.tau_phi * lphi;
    grad[3 * k + 2] += dt * m.k_theta / m.tau_theta * ltheta;

    Vec3 np, nv;
    double nphi = 0.0, ntheta = 0.0;
    stage_grad(k, np, nv, nphi, ntheta);
    np += lp;
    nv += dt * lp + lv - dt * m.damping.cwiseProduct(lv);
    nphi += dt * u.thrust * db_dphi.dot(lv) + (1.0 - dt / m.tau_phi) * lphi;
    ntheta += dt * u.thrust * db_dtheta.dot(lv) + (1.0 - dt / m.tau_theta) * ltheta;
    lp = np;
    lv = nv;
    lphi = nphi;
    ltheta = ntheta;
  }
  return j;
}

namespace detail {

inline void project(std::vector<double>& u, const NmpcConfig& cfg) {
  for (std::size_t k = 0; k < u.size(); ++k) {
    const int i = static_cast<int>(k % 3);
    u[k] = std::clamp(u[k], cfg.u_min[i], cfg.u_max[i]);
  }
}

inline std::vector<ControlInput> unstack(const std::vector<double>& u) {
  std::vector<ControlInput> out(u.size() / 3);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {u[3 * k], u[3 * k + 1], u[3 * k + 2]};
  return out;
}

}  // namespace detail

/// Single-shooting box-constrained NMPC solve by projected gradient descent
/// with Armijo backtracking (optionally Barzilai-Borwein step lengths).
/// Starts from hover inputs; every iterate is feasible and the objective is
/// non-increasing. Stops when the fixed-point residual
/// max|u - proj(u - grad)| drops to `tolerance` or after max_iters.
inline DynamicTrajectory solve(const UavState& x0, const std::vector<Vec3>& ref, const NmpcConfig& cfg,
                               std::vector<double>* cost_history = nullptr) {
  cfg.validate();
  if (ref.empty()) throw Error("reference path is empty");
  const std::size_t n = static_cast<std::size_t>(cfg.horizon);
  const ControlInput uref = cfg.u_ref();
  std::vector<double> u(3 * n);
  for (std::size_t k = 0; k < n; ++k)
    for (int i = 0; i < 3; ++i) u[3 * k + i] = uref[i];
  detail::project(u, cfg);

  auto hover = [&] {
    DynamicTrajectory t;
    t.inputs = detail::unstack(u);
    t.states = rollout(x0, t.inputs, cfg.dt, cfg.model);
    t.converged = false;
    t.final_cost = std::numeric_limits<double>::infinity();
    return t;
  };
  if (!x0.finite()) return hover();

  std::vector<double> g, g_new, u_new(u.size());
  double j = objective_gradient(x0, detail::unstack(u), ref, cfg, g);
  if (!std::isfinite(j)) return hover();
  if (cost_history) cost_history->assign(1, j);

  auto residual = [&](const std::vector<double>& uu, const std::vector<double>& gg) {
    double r = 0.0;
    for (std::size_t k = 0; k < uu.size(); ++k) {
      const int i = static_cast<int>(k % 3);
      r = std::max(r, std::abs(uu[k] - std::clamp(uu[k] - gg[k], cfg.u_min[i], cfg.u_max[i])));
    }
    return r;
  };

  DynamicTrajectory out;
  double gamma = 0.0;
  {
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    gamma = gmax > 0.0 ? 0.1 / gmax : 1.0;
  }
  int it = 0;
  bool converged = residual(u, g) <= cfg.tolerance;
  for (; it < cfg.max_iters && !converged; ++it) {
    bool accepted = false;
    double j_new = j;
    for (int bt = 0; bt < 50; ++bt) {
      for (std::size_t k = 0; k < u.size(); ++k) u_new[k] = u[k] - gamma * g[k];
      detail::project(u_new, cfg);
      double move2 = 0.0;
      for (std::size_t k = 0; k < u.size(); ++k) move2 += (u_new[k] - u[k]) * (u_new[k] - u[k]);
      if (move2 == 0.0) break;
      j_new = objective_gradient(x0, detail::unstack(u_new), ref, cfg, g_new);
      if (std::isfinite(j_new) && j_new <= j - 1e-4 / gamma * move2) {
        accepted = true;
        break;
      }
      gamma *= 0.5;
    }
    if (!accepted) break;
    double ss = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double s = u_new[k] - u[k], y = g_new[k] - g[k];
      ss += s * s;
      sy += s * y;
    }
    std::swap(u, u_new);
    std::swap(g, g_new);
    j = j_new;
    if (cost_history) cost_history->push_back(j);
    gamma = (cfg.accelerate && sy > 0.0) ? ss / sy : 2.0 * gamma;
    converged = residual(u, g) <= cfg.tolerance;
  }
  out.inputs = detail::unstack(u);
  out.states = rollout(x0, out.inputs, cfg.dt, cfg.model);
  out.converged = converged;
  out.final_cost = j;
  out.iterations = it;
  return out;
}

/// Actuation cost: k_u times the hover-deviation and input-rate terms of the
/// tracking objective (u_{-1} = u_0).
inline double actuation_cost(const std::vector<ControlInput>& inputs, const NmpcConfig& cfg, double k_u) {
  if (inputs.empty()) throw Error("input sequence is empty");
  const ControlInput uref = cfg.u_ref();
  double c = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    c += detail::input_cost(inputs[i], inputs[i == 0 ? 0 : i - 1], uref, cfg.q_input, cfg.q_rate);
  return k_u * c;
}

}  // namespace errt
