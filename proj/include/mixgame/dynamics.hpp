#ifndef MIXGAME_DYNAMICS_HPP
#define MIXGAME_DYNAMICS_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mixgame {

struct DynamicsError : std::runtime_error {
  explicit DynamicsError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unicycle limits. Velocity bounds are part of the simulated dynamics;
// control bounds are enforced when controls are applied.
struct Limits {
  double v_min = 0.5;
  double v_max = 1.0;
  double omega_max = 1.5;
  double a_max = 1.0;
};

struct AgentState {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;  // heading, wrapped to (-pi, pi]
  double v = 0.0;    // longitudinal velocity

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(psi) && std::isfinite(v);
  }
};

struct Control {
  double omega = 0.0;  // angular velocity
  double a = 0.0;      // longitudinal acceleration
};

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  a -= M_PI;
  // keep the convention psi in (-pi, pi]
  if (a == -M_PI) a = M_PI;
  return a;
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

inline Control clamp_control(Control u, const Limits& lim) {
  return {clamp(u.omega, -lim.omega_max, lim.omega_max), clamp(u.a, -lim.a_max, lim.a_max)};
}

struct Trajectory {
  double dt = 0.1;
  std::vector<AgentState> states;

  size_t length() const { return states.size(); }
  const AgentState& front() const { return states.front(); }
  const AgentState& back() const { return states.back(); }
};

// Euler step of the unicycle; velocity clamped to the simulator bounds,
// heading wrapped.
inline AgentState step(const AgentState& s, const Control& u, double dt,
                       const Limits& lim = Limits{}) {
  if (dt <= 0.0) throw DynamicsError("step: dt must be positive");
  if (!s.finite() || !std::isfinite(u.omega) || !std::isfinite(u.a))
    throw DynamicsError("step: non-finite input");
  AgentState n;
  n.x = s.x + dt * s.v * std::cos(s.psi);
  n.y = s.y + dt * s.v * std::sin(s.psi);
  n.psi = wrap_angle(s.psi + dt * u.omega);
  n.v = clamp(s.v + dt * u.a, lim.v_min, lim.v_max);
  return n;
}

inline Trajectory rollout(const AgentState& initial, const std::vector<Control>& controls,
                          double dt, const Limits& lim = Limits{}) {
  if (controls.empty()) throw DynamicsError("rollout: empty control sequence");
  Trajectory traj;
  traj.dt = dt;
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(initial);
  for (const auto& u : controls) traj.states.push_back(step(traj.states.back(), u, dt, lim));
  return traj;
}

inline double dist(const AgentState& a, const AgentState& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace mixgame

#endif  // MIXGAME_DYNAMICS_HPP
