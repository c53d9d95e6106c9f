#ifndef MIXGAME_LQGAME_HPP
#define MIXGAME_LQGAME_HPP

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "mixgame/dynamics.hpp"

namespace mixgame {

struct AgentSpec {
  std::array<double, 2> goal{0.0, 0.0};
  double lambda = 0.5;  // cost trade-off, sampled in [0.1, 0.9]
  double preferred_speed = 1.0;
  AgentState initial;
};

struct GameWeights {
  double nav = 100.0;
  double safety = 1000.0;
  // The published cost has no control term; a small quadratic control
  // penalty keeps the LQ subproblems well posed.
  double control_reg = 1.0;
};

struct LqGameProblem {
  int horizon = 30;
  double dt = 0.1;
  std::vector<AgentSpec> specs;
  double social_distance = 0.7;
  GameWeights weights;
  Limits limits;
};

// Straight line from the current position toward the goal at the preferred
// speed; holds position once the goal is reached.
inline Trajectory reference_trajectory(const AgentSpec& spec, const AgentState& state,
                                       int horizon, double dt) {
  if (!state.finite()) throw DynamicsError("reference_trajectory: non-finite state");
  Trajectory ref;
  ref.dt = dt;
  ref.states.reserve(horizon + 1);
  const double dx = spec.goal[0] - state.x;
  const double dy = spec.goal[1] - state.y;
  const double total = std::hypot(dx, dy);
  const double heading = total > 1e-12 ? std::atan2(dy, dx) : state.psi;
  for (int k = 0; k <= horizon; ++k) {
    const double travel = std::min(spec.preferred_speed * dt * k, total);
    AgentState s;
    if (total > 1e-12) {
      s.x = state.x + travel * dx / total;
      s.y = state.y + travel * dy / total;
    } else {
      s.x = spec.goal[0];
      s.y = spec.goal[1];
    }
    s.psi = heading;
    s.v = travel < total ? spec.preferred_speed : 0.0;
    ref.states.push_back(s);
  }
  return ref;
}

inline double nav_cost(const AgentState& state, const AgentState& ref_point) {
  const double ex = state.x - ref_point.x;
  const double ey = state.y - ref_point.y;
  return ex * ex + ey * ey;
}

// Sum over other agents of the squared shortfall below the social distance.
// The indicator is strict: separation exactly at the threshold costs zero.
inline double safety_cost(const std::vector<AgentState>& states, int agent,
                          double social_distance) {
  double cost = 0.0;
  for (size_t j = 0; j < states.size(); ++j) {
    if (static_cast<int>(j) == agent) continue;
    const double d = dist(states[agent], states[j]);
    if (d < social_distance) {
      const double shortfall = d - social_distance;
      cost += shortfall * shortfall;
    }
  }
  return cost;
}

inline double combined_cost(const std::vector<AgentState>& states, int agent,
                            const AgentState& ref_point, double lambda,
                            double social_distance, const GameWeights& w = GameWeights{}) {
  return w.nav * lambda * nav_cost(states[agent], ref_point) +
         w.safety * (1.0 - lambda) * safety_cost(states, agent, social_distance);
}

// ---------------------------------------------------------------------------
// Iterative LQ game solver over joint unicycle dynamics. Costs are supplied
// through this interface so the same backward recursion serves both the
// multi-agent benchmark game and single-agent tracking.
// ---------------------------------------------------------------------------

class GameCost {
 public:
  virtual ~GameCost() = default;
  // Running state cost of `agent` at step k (states after k integration steps).
  virtual double state_cost(int agent, int k, const std::vector<AgentState>& xs) const = 0;
  // Gradient/Gauss-Newton Hessian of state_cost w.r.t. the joint state
  // [x,y,psi,v] * N, accumulated into q (4N) and Q (4N x 4N).
  virtual void quadraticize(int agent, int k, const std::vector<AgentState>& xs,
                            Eigen::VectorXd& q, Eigen::MatrixXd& Q) const = 0;
  virtual double control_reg(int agent) const = 0;
};

struct GameSolution {
  // controls[i][k] is agent i's control at step k.
  std::vector<std::vector<Control>> controls;
  // joint_states[k] holds all agents' states after k steps.
  std::vector<std::vector<AgentState>> joint_states;
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_trace;  // total cost after each accepted step
};

namespace detail {

struct JointLin {
  // Per-agent 4x4 A blocks and 4x2 B blocks (dynamics are decoupled).
  std::vector<Eigen::Matrix4d> A;
  std::vector<Eigen::Matrix<double, 4, 2>> B;
};

inline JointLin linearize(const std::vector<AgentState>& xs,
                          const std::vector<Control>& us, double dt,
                          const Limits& lim) {
  const int n_agents = static_cast<int>(xs.size());
  JointLin lin;
  lin.A.resize(n_agents);
  lin.B.resize(n_agents);
  for (int i = 0; i < n_agents; ++i) {
    const AgentState& s = xs[i];
    Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
    A(0, 2) = -dt * s.v * std::sin(s.psi);
    A(0, 3) = dt * std::cos(s.psi);
    A(1, 2) = dt * s.v * std::cos(s.psi);
    A(1, 3) = dt * std::sin(s.psi);
    Eigen::Matrix<double, 4, 2> B = Eigen::Matrix<double, 4, 2>::Zero();
    B(2, 0) = dt;
    // velocity clamp saturates the acceleration channel
    const double v_next = s.v + dt * us[i].a;
    const bool saturated = v_next < lim.v_min || v_next > lim.v_max;
    if (saturated) {
      A(3, 3) = 0.0;
    } else {
      B(3, 1) = dt;
    }
    lin.A[i] = A;
    lin.B[i] = B;
  }
  return lin;
}

inline double total_cost(const GameCost& cost, const std::vector<std::vector<AgentState>>& X,
                         const std::vector<std::vector<Control>>& U) {
  const int n_agents = static_cast<int>(X.front().size());
  const int horizon = static_cast<int>(U.front().size());
  double c = 0.0;
  for (int i = 0; i < n_agents; ++i) {
    for (int k = 1; k <= horizon; ++k) c += cost.state_cost(i, k, X[k]);
    const double reg = cost.control_reg(i);
    for (int k = 0; k < horizon; ++k)
      c += reg * (U[i][k].omega * U[i][k].omega + U[i][k].a * U[i][k].a);
  }
  return c;
}

inline std::vector<Control> pick(const std::vector<std::vector<Control>>& U, int k) {
  std::vector<Control> us(U.size());
  for (size_t i = 0; i < U.size(); ++i) us[i] = U[i][k];
  return us;
}

}  // namespace detail

// Iterates {linearize, quadraticize, coupled backward recursion, line-searched
// feedback rollout} until the max control change drops below tol. Returns the
// best iterate with converged=false if the iteration cap is hit.
inline GameSolution solve_lq_game(const std::vector<AgentState>& initial,
                                  const GameCost& cost, int horizon, double dt,
                                  const Limits& lim,
                                  std::vector<std::vector<Control>> init_controls = {},
                                  int max_iterations = 50, double tol = 1e-3) {
  const int n_agents = static_cast<int>(initial.size());
  const int n = 4 * n_agents;
  const int m = 2 * n_agents;

  // Symmetric configurations are degenerate stationary points; a small
  // deterministic heading rotation of the internal operating point breaks
  // ties reproducibly without touching the true state.
  std::vector<AgentState> x0 = initial;
  for (auto& s : x0) s.psi = wrap_angle(s.psi + 1e-3);

  std::vector<std::vector<Control>> U = std::move(init_controls);
  if (U.empty()) U.assign(n_agents, std::vector<Control>(horizon, Control{}));

  auto roll_open = [&](const std::vector<std::vector<Control>>& ctrl) {
    std::vector<std::vector<AgentState>> X(horizon + 1, std::vector<AgentState>(n_agents));
    X[0] = x0;
    for (int k = 0; k < horizon; ++k)
      for (int i = 0; i < n_agents; ++i) X[k + 1][i] = step(X[k][i], ctrl[i][k], dt, lim);
    return X;
  };

  std::vector<std::vector<AgentState>> X = roll_open(U);
  double current_cost = detail::total_cost(cost, X, U);

  GameSolution sol;
  sol.controls = U;
  sol.joint_states = X;
  sol.cost_trace.push_back(current_cost);

  Eigen::MatrixXd S(m, m), YP(m, n);
  Eigen::VectorXd Ya(m);

  for (int iter = 0; iter < max_iterations; ++iter) {
    sol.iterations = iter + 1;

    // Quadraticize along the operating point.
    std::vector<detail::JointLin> lins(horizon);
    std::vector<std::vector<Eigen::MatrixXd>> Qs(horizon + 1);
    std::vector<std::vector<Eigen::VectorXd>> qs(horizon + 1);
    for (int k = 0; k < horizon; ++k)
      lins[k] = detail::linearize(X[k], detail::pick(U, k), dt, lim);
    for (int k = 1; k <= horizon; ++k) {
      Qs[k].assign(n_agents, Eigen::MatrixXd::Zero(n, n));
      qs[k].assign(n_agents, Eigen::VectorXd::Zero(n));
      for (int i = 0; i < n_agents; ++i) cost.quadraticize(i, k, X[k], qs[k][i], Qs[k][i]);
    }

    // Backward recursion for the coupled LQ game.
    std::vector<Eigen::MatrixXd> Z(n_agents);
    std::vector<Eigen::VectorXd> zeta(n_agents);
    for (int i = 0; i < n_agents; ++i) {
      Z[i] = Qs[horizon][i];
      zeta[i] = qs[horizon][i];
    }
    std::vector<std::vector<Eigen::MatrixXd>> Ps(horizon);  // per step, per agent 2 x n
    std::vector<std::vector<Eigen::Vector2d>> alphas(horizon);

    for (int k = horizon - 1; k >= 0; --k) {
      const auto& lin = lins[k];
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, m);
      for (int i = 0; i < n_agents; ++i) {
        A.block<4, 4>(4 * i, 4 * i) = lin.A[i];
        B.block<4, 2>(4 * i, 2 * i) = lin.B[i];
      }
      for (int i = 0; i < n_agents; ++i) {
        const Eigen::MatrixXd BiT = B.middleCols<2>(2 * i).transpose();
        const Eigen::MatrixXd BiTZ = BiT * Z[i];
        for (int j = 0; j < n_agents; ++j) {
          S.block<2, 2>(2 * i, 2 * j) = BiTZ * B.middleCols<2>(2 * j);
          if (i == j)
            S.block<2, 2>(2 * i, 2 * j) +=
                2.0 * cost.control_reg(i) * Eigen::Matrix2d::Identity();
        }
        YP.middleRows<2>(2 * i) = BiTZ * A;
        Ya.segment<2>(2 * i) =
            BiT * zeta[i] +
            2.0 * cost.control_reg(i) * Eigen::Vector2d(U[i][k].omega, U[i][k].a);
      }
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(S);
      const Eigen::MatrixXd P = lu.solve(YP);
      const Eigen::VectorXd alpha = lu.solve(Ya);

      Ps[k].resize(n_agents);
      alphas[k].resize(n_agents);
      for (int i = 0; i < n_agents; ++i) {
        Ps[k][i] = P.middleRows<2>(2 * i);
        alphas[k][i] = alpha.segment<2>(2 * i);
      }

      Eigen::MatrixXd F = A;
      Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < n_agents; ++i) {
        F -= B.middleCols<2>(2 * i) * Ps[k][i];
        beta -= B.middleCols<2>(2 * i) * alphas[k][i];
      }
      for (int i = 0; i < n_agents; ++i) {
        const Eigen::Matrix2d Rii = 2.0 * cost.control_reg(i) * Eigen::Matrix2d::Identity();
        const Eigen::Vector2d rii =
            2.0 * cost.control_reg(i) * Eigen::Vector2d(U[i][k].omega, U[i][k].a);
        Eigen::VectorXd new_zeta = F.transpose() * (zeta[i] + Z[i] * beta) +
                                   Ps[k][i].transpose() * (Rii * alphas[k][i] - rii);
        Eigen::MatrixXd new_Z =
            F.transpose() * Z[i] * F + Ps[k][i].transpose() * Rii * Ps[k][i];
        if (k >= 1) {
          new_zeta += qs[k][i];
          new_Z += Qs[k][i];
        }
        zeta[i] = std::move(new_zeta);
        Z[i] = std::move(new_Z);
      }
    }

    // Line-searched feedback rollout.
    bool accepted = false;
    double max_du = 0.0;
    for (double eta = 1.0; eta > 1e-3; eta *= 0.5) {
      std::vector<std::vector<Control>> Unew(n_agents, std::vector<Control>(horizon));
      std::vector<std::vector<AgentState>> Xnew(horizon + 1,
                                                std::vector<AgentState>(n_agents));
      Xnew[0] = x0;
      for (int k = 0; k < horizon; ++k) {
        Eigen::VectorXd dx(n);
        for (int i = 0; i < n_agents; ++i) {
          dx.segment<4>(4 * i) << Xnew[k][i].x - X[k][i].x, Xnew[k][i].y - X[k][i].y,
              wrap_angle(Xnew[k][i].psi - X[k][i].psi), Xnew[k][i].v - X[k][i].v;
        }
        for (int i = 0; i < n_agents; ++i) {
          const Eigen::Vector2d du = -Ps[k][i] * dx - eta * alphas[k][i];
          Unew[i][k] = {U[i][k].omega + du(0), U[i][k].a + du(1)};
          Xnew[k + 1][i] = step(Xnew[k][i], Unew[i][k], dt, lim);
        }
      }
      const double cand_cost = detail::total_cost(cost, Xnew, Unew);
      if (cand_cost < current_cost) {
        max_du = 0.0;
        for (int i = 0; i < n_agents; ++i)
          for (int k = 0; k < horizon; ++k) {
            max_du = std::max(max_du, std::abs(Unew[i][k].omega - U[i][k].omega));
            max_du = std::max(max_du, std::abs(Unew[i][k].a - U[i][k].a));
          }
        U = std::move(Unew);
        X = std::move(Xnew);
        current_cost = cand_cost;
        sol.cost_trace.push_back(current_cost);
        accepted = true;
        break;
      }
    }

    sol.controls = U;
    sol.joint_states = X;
    if (!accepted || max_du < tol) {
      sol.converged = true;
      return sol;
    }
  }
  sol.converged = false;  // iteration cap hit; best iterate returned
  return sol;
}

// ---------------------------------------------------------------------------
// The benchmark game cost: weighted navigation tracking plus the social-zone
// safety penalty, with Gauss-Newton quadraticization of the safety term.
// ---------------------------------------------------------------------------

class BenchmarkGameCost : public GameCost {
 public:
  BenchmarkGameCost(const LqGameProblem& problem, std::vector<Trajectory> refs)
      : problem_(problem), refs_(std::move(refs)) {}

  double state_cost(int agent, int k, const std::vector<AgentState>& xs) const override {
    const AgentState& ref = refs_[agent].states[k];
    return combined_cost(xs, agent, ref, problem_.specs[agent].lambda,
                         problem_.social_distance, problem_.weights);
  }

  void quadraticize(int agent, int k, const std::vector<AgentState>& xs,
                    Eigen::VectorXd& q, Eigen::MatrixXd& Q) const override {
    const double lambda = problem_.specs[agent].lambda;
    const double w_nav = problem_.weights.nav * lambda;
    const double w_safe = problem_.weights.safety * (1.0 - lambda);
    const AgentState& ref = refs_[agent].states[k];
    const int ia = 4 * agent;
    q(ia + 0) += 2.0 * w_nav * (xs[agent].x - ref.x);
    q(ia + 1) += 2.0 * w_nav * (xs[agent].y - ref.y);
    Q(ia + 0, ia + 0) += 2.0 * w_nav;
    Q(ia + 1, ia + 1) += 2.0 * w_nav;

    for (size_t j = 0; j < xs.size(); ++j) {
      if (static_cast<int>(j) == agent) continue;
      const double dx = xs[agent].x - xs[j].x;
      const double dy = xs[agent].y - xs[j].y;
      const double d = std::hypot(dx, dy);
      if (d >= problem_.social_distance || d < 1e-9) continue;
      const double shortfall = d - problem_.social_distance;
      const Eigen::Vector2d u(dx / d, dy / d);
      const int ja = 4 * static_cast<int>(j);
      const Eigen::Vector2d grad = 2.0 * w_safe * shortfall * u;
      q.segment<2>(ia) += grad;
      q.segment<2>(ja) -= grad;
      // Gauss-Newton: keep only the positive-semidefinite outer-product term.
      const Eigen::Matrix2d H = 2.0 * w_safe * u * u.transpose();
      Q.block<2, 2>(ia, ia) += H;
      Q.block<2, 2>(ja, ja) += H;
      Q.block<2, 2>(ia, ja) -= H;
      Q.block<2, 2>(ja, ia) -= H;
    }
  }

  double control_reg(int agent) const override {
    (void)agent;
    return problem_.weights.control_reg;
  }

 private:
  const LqGameProblem& problem_;
  std::vector<Trajectory> refs_;
};

inline GameSolution solve_benchmark_game(const LqGameProblem& problem,
                                         const std::vector<AgentState>& states,
                                         std::vector<std::vector<Control>> init_controls = {}) {
  std::vector<Trajectory> refs;
  refs.reserve(problem.specs.size());
  for (size_t i = 0; i < problem.specs.size(); ++i)
    refs.push_back(
        reference_trajectory(problem.specs[i], states[i], problem.horizon, problem.dt));
  BenchmarkGameCost cost(problem, std::move(refs));
  return solve_lq_game(states, cost, problem.horizon, problem.dt, problem.limits,
                       std::move(init_controls));
}

// Receding-horizon step: re-solves from the current states (warm-started from
// the previous solution shifted by one step) and returns the first controls.
struct MpcState {
  std::vector<std::vector<Control>> prev_controls;  // empty on first call
};

inline std::vector<Control> mpc_step(const LqGameProblem& problem,
                                     const std::vector<AgentState>& states,
                                     MpcState* warm = nullptr, bool* converged = nullptr) {
  std::vector<std::vector<Control>> init;
  if (warm && !warm->prev_controls.empty()) {
    init = warm->prev_controls;
    for (auto& seq : init) {
      seq.erase(seq.begin());
      seq.push_back(seq.back());
    }
  }
  GameSolution sol = solve_benchmark_game(problem, states, std::move(init));
  if (warm) warm->prev_controls = sol.controls;
  if (converged) *converged = sol.converged;
  std::vector<Control> firsts(problem.specs.size());
  for (size_t i = 0; i < problem.specs.size(); ++i)
    firsts[i] = clamp_control(sol.controls[i][0], problem.limits);
  return firsts;
}

}  // namespace mixgame

#endif  // MIXGAME_LQGAME_HPP
