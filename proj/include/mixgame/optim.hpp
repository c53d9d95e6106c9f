#ifndef MIXGAME_OPTIM_HPP
#define MIXGAME_OPTIM_HPP

#include <cmath>
#include <vector>

#include "mixgame/tensor.hpp"

namespace mixgame {

// Adaptive-moment first-order optimizer state, one slot per parameter tensor.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long t = 0;

  static AdamState init(const std::vector<Tensor>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
      s.m.push_back(Tensor::zeros(p.shape));
      s.v.push_back(Tensor::zeros(p.shape));
    }
    return s;
  }
};

inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                      AdamState& state, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw TensorError("adam_step: parameter/gradient/state count mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]))
      throw TensorError("adam_step: shape mismatch at parameter " + std::to_string(i));
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    for (size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace mixgame

#endif  // MIXGAME_OPTIM_HPP
