#ifndef MIXGAME_BRNE_HPP
#define MIXGAME_BRNE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "mixgame/strategy.hpp"
#include "mixgame/tape.hpp"

namespace mixgame {

// Pairwise interaction cost between one trajectory of each of two agents.
using PairCostFn = std::function<double(const Trajectory&, const Trajectory&)>;

struct SolveReport {
  int iterations = 0;
  std::vector<double> expected_cost_trace;  // length iterations + 1
  bool converged = false;
};

inline Eigen::MatrixXd pair_cost_matrix(const PairCostFn& cost,
                                        const std::vector<Trajectory>& A,
                                        const std::vector<Trajectory>& B) {
  if (A.empty() || B.empty()) throw DynamicsError("pair_cost_matrix: empty sample set");
  Eigen::MatrixXd M(A.size(), B.size());
  for (size_t k = 0; k < A.size(); ++k)
    for (size_t kp = 0; kp < B.size(); ++kp) {
      const double v = cost(A[k], B[kp]);
      if (!std::isfinite(v)) throw DynamicsError("pair_cost_matrix: non-finite cost");
      M(k, kp) = v;
    }
  return M;
}

inline double kl_to_nominal(const WeightedStrategy& s) {
  s.validate();
  const double K = static_cast<double>(s.weights.size());
  double kl = 0.0;
  for (double w : s.weights)
    if (w > 0.0) kl += w * std::log(w * K);
  return kl;
}

namespace detail {

// Cost matrices for every unordered pair, indexed (i, j) with i < j.
inline std::map<std::pair<int, int>, Eigen::MatrixXd> all_pair_matrices(
    const std::vector<WeightedStrategy>& strategies, const PairCostFn& cost) {
  std::map<std::pair<int, int>, Eigen::MatrixXd> M;
  const int n = static_cast<int>(strategies.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      M[{i, j}] = pair_cost_matrix(cost, strategies[i].samples, strategies[j].samples);
  return M;
}

inline double expected_joint_cost(
    const std::vector<WeightedStrategy>& strategies,
    const std::map<std::pair<int, int>, Eigen::MatrixXd>& M) {
  double total = 0.0;
  for (const auto& [ij, mat] : M) {
    const auto& wi = strategies[ij.first].weights;
    const auto& wj = strategies[ij.second].weights;
    const Eigen::Map<const Eigen::VectorXd> vi(wi.data(), wi.size());
    const Eigen::Map<const Eigen::VectorXd> vj(wj.data(), wj.size());
    total += vi.transpose() * mat * vj;
  }
  return total;
}

// Expected cost against agent i's samples: h(k) = sum_{j != i} sum_k' w_j(k') l(x_{i,k}, x_{j,k'}).
inline Eigen::VectorXd expected_cost_vector(
    int i, const std::vector<WeightedStrategy>& strategies,
    const std::map<std::pair<int, int>, Eigen::MatrixXd>& M) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(strategies[i].weights.size());
  const int n = static_cast<int>(strategies.size());
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const auto& wj = strategies[j].weights;
    const Eigen::Map<const Eigen::VectorXd> vj(wj.data(), wj.size());
    if (j > i)
      h += M.at({i, j}) * vj;
    else
      h += M.at({j, i}).transpose() * vj;
  }
  return h;
}

// Closed-form minimizer of w.h + KL(w || uniform): w = softmax(-h), evaluated
// with max-subtraction so the exponentials never underflow to an all-zero
// vector (the shift cancels in the normalization).
inline void softmin_weights(const Eigen::VectorXd& h, std::vector<double>& w) {
  const double lo = h.minCoeff();
  double z = 0.0;
  for (long k = 0; k < h.size(); ++k) {
    w[k] = std::exp(-(h(k) - lo));
    z += w[k];
  }
  for (auto& wk : w) wk /= z;
}

}  // namespace detail

inline double expected_joint_cost(const std::vector<WeightedStrategy>& strategies,
                                  const PairCostFn& cost) {
  for (const auto& s : strategies) s.validate();
  return detail::expected_joint_cost(strategies,
                                     detail::all_pair_matrices(strategies, cost));
}

// Sequential best-response iteration over the sample weights. Each sweep
// visits agents in index order; agent i re-weights its nominal samples
// against the already-updated strategies of agents before it and the previous
// strategies of agents after it. Stops when the largest per-agent
// total-variation weight change over a sweep drops below tol.
inline SolveReport brne_update(std::vector<WeightedStrategy>& strategies,
                               const std::map<std::pair<int, int>, Eigen::MatrixXd>& M,
                               int max_sweeps = 100, double tol = 1e-4) {
  const int n = static_cast<int>(strategies.size());
  for (const auto& s : strategies) s.validate();

  SolveReport report;
  report.expected_cost_trace.push_back(detail::expected_joint_cost(strategies, M));

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_tv = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd h = detail::expected_cost_vector(i, strategies, M);
      std::vector<double> prev = strategies[i].weights;
      detail::softmin_weights(h, strategies[i].weights);
      double tv = 0.0;
      for (size_t k = 0; k < prev.size(); ++k)
        tv += std::abs(strategies[i].weights[k] - prev[k]);
      max_tv = std::max(max_tv, 0.5 * tv);
    }
    report.iterations = sweep + 1;
    report.expected_cost_trace.push_back(detail::expected_joint_cost(strategies, M));
    if (max_tv < tol) {
      report.converged = true;
      break;
    }
  }
  return report;
}

inline SolveReport brne_update(std::vector<WeightedStrategy>& strategies,
                               const PairCostFn& cost, int max_sweeps = 100,
                               double tol = 1e-4) {
  for (const auto& s : strategies) s.validate();
  return brne_update(strategies, detail::all_pair_matrices(strategies, cost),
                     max_sweeps, tol);
}

// ---------------------------------------------------------------------------
// Differentiable unrolled solve. The pairwise cost matrices are nodes on the
// caller's tape (shape {K_i, K_j} for each pair i < j); a fixed number of
// sweeps is unrolled so gradients flow from the final weights back into the
// cost parameters.
// ---------------------------------------------------------------------------

inline std::vector<Tape::NodeId> brne_unrolled(
    Tape& tape, const std::vector<int>& sample_counts,
    const std::map<std::pair<int, int>, Tape::NodeId>& M, int sweeps = 3) {
  const int n = static_cast<int>(sample_counts.size());
  std::vector<Tape::NodeId> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = tape.constant(Tensor::full({sample_counts[i]}, 1.0 / sample_counts[i]));

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int i = 0; i < n; ++i) {
      Tape::NodeId h = -1;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const Tape::NodeId term = j > i ? tape.matmul(M.at({i, j}), w[j])
                                        : tape.vecmat(w[j], M.at({j, i}));
        h = h < 0 ? term : tape.add(h, term);
      }
      if (h < 0) continue;  // single agent: stays uniform
      w[i] = tape.softmax_normalize(tape.scale(h, -1.0));
    }
  }
  return w;
}

}  // namespace mixgame

#endif  // MIXGAME_BRNE_HPP
