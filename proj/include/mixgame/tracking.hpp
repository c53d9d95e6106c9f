#ifndef MIXGAME_TRACKING_HPP
#define MIXGAME_TRACKING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mixgame/lqgame.hpp"
#include "mixgame/strategy.hpp"

namespace mixgame {

// Short-horizon least-squares tracking cost used to convert a mixed strategy
// into a control. Position error 1.0, heading error 0.1, control effort 0.01.
class TrackingCost : public GameCost {
 public:
  explicit TrackingCost(const Trajectory& ref) : ref_(ref) {}

  double state_cost(int /*agent*/, int k, const std::vector<AgentState>& xs) const override {
    const AgentState& r = ref_.states[k - 1];  // ref index 0 is one step ahead
    const double ex = xs[0].x - r.x;
    const double ey = xs[0].y - r.y;
    const double epsi = wrap_angle(xs[0].psi - r.psi);
    return kPosWeight * (ex * ex + ey * ey) + kHeadingWeight * epsi * epsi;
  }

  void quadraticize(int /*agent*/, int k, const std::vector<AgentState>& xs,
                    Eigen::VectorXd& q, Eigen::MatrixXd& Q) const override {
    const AgentState& r = ref_.states[k - 1];
    q(0) += 2.0 * kPosWeight * (xs[0].x - r.x);
    q(1) += 2.0 * kPosWeight * (xs[0].y - r.y);
    q(2) += 2.0 * kHeadingWeight * wrap_angle(xs[0].psi - r.psi);
    Q(0, 0) += 2.0 * kPosWeight;
    Q(1, 1) += 2.0 * kPosWeight;
    Q(2, 2) += 2.0 * kHeadingWeight;
  }

  double control_reg(int /*agent*/) const override { return kControlWeight; }

  static constexpr double kPosWeight = 1.0;
  static constexpr double kHeadingWeight = 0.1;
  static constexpr double kControlWeight = 0.01;

 private:
  const Trajectory& ref_;
};

// Tracks the weighted mean of the mixed strategy over a 10-step horizon and
// returns the first control, clamped to the control bounds.
inline Control track_mean(const WeightedStrategy& strategy, const AgentState& current,
                          double dt, const Limits& lim = Limits{}, int horizon = 10) {
  const Trajectory mean = strategy_mean(strategy);
  const int h = std::min<int>(horizon, static_cast<int>(mean.length()));
  if (h < 1) throw DynamicsError("track_mean: empty strategy horizon");
  TrackingCost cost(mean);
  GameSolution sol = solve_lq_game({current}, cost, h, dt, lim);
  return clamp_control(sol.controls[0][0], lim);
}

}  // namespace mixgame

#endif  // MIXGAME_TRACKING_HPP
