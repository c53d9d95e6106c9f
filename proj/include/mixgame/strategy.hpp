#ifndef MIXGAME_STRATEGY_HPP
#define MIXGAME_STRATEGY_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mixgame/dynamics.hpp"

namespace mixgame {

// A mixed strategy: K trajectory samples with normalized weights.
struct WeightedStrategy {
  std::vector<Trajectory> samples;
  std::vector<double> weights;

  size_t size() const { return samples.size(); }

  static WeightedStrategy uniform(std::vector<Trajectory> samples) {
    WeightedStrategy s;
    const size_t k = samples.size();
    if (k == 0) throw DynamicsError("WeightedStrategy: no samples");
    s.samples = std::move(samples);
    s.weights.assign(k, 1.0 / static_cast<double>(k));
    return s;
  }

  void validate() const {
    if (samples.empty() || samples.size() != weights.size())
      throw DynamicsError("WeightedStrategy: sample/weight mismatch");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw DynamicsError("WeightedStrategy: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw DynamicsError("WeightedStrategy: weights not normalized");
  }
};

// Pointwise weighted mean over (x, y, psi, v); psi averaged through its
// sin/cos components so the wrap at +-pi does not distort the mean.
inline Trajectory strategy_mean(const WeightedStrategy& strategy) {
  strategy.validate();
  const size_t horizon = strategy.samples.front().length();
  for (const auto& s : strategy.samples)
    if (s.length() != horizon) throw DynamicsError("strategy_mean: ragged samples");
  Trajectory mean;
  mean.dt = strategy.samples.front().dt;
  mean.states.resize(horizon);
  for (size_t t = 0; t < horizon; ++t) {
    double x = 0.0, y = 0.0, cs = 0.0, sn = 0.0, v = 0.0;
    for (size_t k = 0; k < strategy.size(); ++k) {
      const double w = strategy.weights[k];
      const AgentState& st = strategy.samples[k].states[t];
      x += w * st.x;
      y += w * st.y;
      cs += w * std::cos(st.psi);
      sn += w * std::sin(st.psi);
      v += w * st.v;
    }
    mean.states[t] = {x, y, std::atan2(sn, cs), v};
  }
  return mean;
}

}  // namespace mixgame

#endif  // MIXGAME_STRATEGY_HPP
