#ifndef MIXGAME_INVERSE_HPP
#define MIXGAME_INVERSE_HPP

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mixgame/brne.hpp"
#include "mixgame/checkpoint.hpp"
#include "mixgame/cvae.hpp"
#include "mixgame/optim.hpp"
#include "mixgame/rng.hpp"

namespace mixgame {

struct InverseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-step pair encoding: relative displacement, distance, closing speed.
inline Tensor pair_features(const Trajectory& a, const Trajectory& b) {
  if (a.states.size() != b.states.size() || a.states.empty())
    throw InverseError("pair_features: trajectory length mismatch");
  const int T = static_cast<int>(a.states.size());
  Tensor f = Tensor::zeros({4 * T});
  double prev_d = 0.0;
  for (int k = 0; k < T; ++k) {
    const double dx = b.states[k].x - a.states[k].x;
    const double dy = b.states[k].y - a.states[k].y;
    const double d = std::hypot(dx, dy);
    const double closing = k == 0 ? 0.0 : (d - prev_d) / a.dt;
    f.data[4 * k + 0] = dx;
    f.data[4 * k + 1] = dy;
    f.data[4 * k + 2] = d;
    f.data[4 * k + 3] = closing;
    prev_d = d;
  }
  return f;
}

// Dense network over pair features: 3 tanh hidden layers, softplus scalar head.
struct CostNet {
  int tau1 = 30;
  int hidden = 256;
  std::vector<std::pair<std::string, Tensor>> params;

  int feature_dim() const { return 4 * tau1; }

  Tensor& tensor(const std::string& name) {
    for (auto& [n, t] : params)
      if (n == name) return t;
    throw InverseError("unknown parameter: " + name);
  }
  const Tensor& tensor(const std::string& name) const {
    return const_cast<CostNet*>(this)->tensor(name);
  }

  static CostNet init(int tau1, int hidden, Rng& rng) {
    CostNet net;
    net.tau1 = tau1;
    net.hidden = hidden;
    auto dense = [&](const std::string& name, int in, int out) {
      Tensor W = Tensor::zeros({in, out});
      const double s = 1.0 / std::sqrt(static_cast<double>(in));
      for (auto& v : W.data) v = s * rng.normal();
      net.params.emplace_back(name + ".W", std::move(W));
      net.params.emplace_back(name + ".b", Tensor::zeros({out}));
    };
    dense("c1", net.feature_dim(), hidden);
    dense("c2", hidden, hidden);
    dense("c3", hidden, hidden);
    dense("head", hidden, 1);
    return net;
  }

  // Plain forward pass for planning-time evaluation.
  double eval(const Tensor& features) const {
    if (features.size() != feature_dim()) throw InverseError("eval: feature size");
    Eigen::Map<const Eigen::VectorXd> x(features.data.data(), features.size());
    Eigen::VectorXd h = x;
    for (const char* layer : {"c1", "c2", "c3"}) {
      const Tensor& W = tensor(std::string(layer) + ".W");
      const Tensor& b = tensor(std::string(layer) + ".b");
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          Wm(W.data.data(), W.shape[0], W.shape[1]);
      Eigen::Map<const Eigen::VectorXd> bv(b.data.data(), b.shape[0]);
      h = (Wm.transpose() * h + bv).array().tanh().matrix();
    }
    const Tensor& W = tensor("head.W");
    const Tensor& b = tensor("head.b");
    Eigen::Map<const Eigen::VectorXd> Wv(W.data.data(), W.shape[0]);
    const double z = Wv.dot(h) + b.at(0);
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));  // softplus
  }

  // Batched evaluation of the full K x K' pairwise cost matrix; one pass of
  // dense matrix products instead of K*K' scalar forward passes.
  Eigen::MatrixXd pair_cost_matrix(const std::vector<Trajectory>& A,
                                   const std::vector<Trajectory>& B) const {
    const int K = static_cast<int>(A.size()), Kp = static_cast<int>(B.size());
    if (K == 0 || Kp == 0) throw InverseError("pair_cost_matrix: empty sample set");
    Eigen::MatrixXd H(K * Kp, feature_dim());
    for (int k = 0; k < K; ++k)
      for (int kp = 0; kp < Kp; ++kp) {
        const Tensor f = pair_features(A[k], B[kp]);
        H.row(k * Kp + kp) =
            Eigen::Map<const Eigen::VectorXd>(f.data.data(), f.size());
      }
    for (const char* layer : {"c1", "c2", "c3"}) {
      const Tensor& W = tensor(std::string(layer) + ".W");
      const Tensor& b = tensor(std::string(layer) + ".b");
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          Wm(W.data.data(), W.shape[0], W.shape[1]);
      Eigen::Map<const Eigen::VectorXd> bv(b.data.data(), b.shape[0]);
      H = ((H * Wm).rowwise() + bv.transpose()).array().tanh().matrix();
    }
    const Tensor& W = tensor("head.W");
    Eigen::Map<const Eigen::VectorXd> Wv(W.data.data(), W.shape[0]);
    Eigen::VectorXd z = H * Wv;
    z.array() += tensor("head.b").at(0);
    Eigen::MatrixXd out(K, Kp);
    for (int k = 0; k < K; ++k)
      for (int kp = 0; kp < Kp; ++kp) {
        const double v = z(k * Kp + kp);
        out(k, kp) = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
      }
    return out;
  }

  PairCostFn as_pair_cost() const {
    return [this](const Trajectory& a, const Trajectory& b) {
      return eval(pair_features(a, b));
    };
  }

  void save(const std::string& path) const {
    std::vector<std::pair<std::string, Tensor>> out = params;
    out.emplace_back("__config", Tensor::vec({static_cast<double>(tau1),
                                              static_cast<double>(hidden)}));
    save_checkpoint(path, out);
  }

  static CostNet load(const std::string& path) {
    auto tensors = load_checkpoint(path);
    auto it = tensors.find("__config");
    if (it == tensors.end() || it->second.size() != 2)
      throw InverseError("not a cost-net checkpoint: " + path);
    Rng rng(0);
    CostNet net = init(static_cast<int>(it->second.at(0)),
                       static_cast<int>(it->second.at(1)), rng);
    for (auto& [name, t] : net.params) {
      auto found = tensors.find(name);
      if (found == tensors.end()) throw InverseError("missing tensor: " + name);
      if (found->second.shape != t.shape) throw InverseError("shape mismatch: " + name);
      t = std::move(found->second);
    }
    return net;
  }
};

// One joint observation: every agent's past, future, and task variable.
struct DataWindow {
  std::vector<CvaeWindow> agents;
};

inline std::vector<DataWindow> window_dataset(const std::vector<TrialRecord>& trials,
                                              int tau1, int tau2, int stride = 1,
                                              int* skipped = nullptr) {
  if (stride < 1) throw InverseError("window_dataset: stride must be positive");
  std::vector<DataWindow> windows;
  int short_trials = 0;
  for (const auto& trial : trials) {
    if (trial.agents.empty()) {
      ++short_trials;
      continue;
    }
    const int T = static_cast<int>(trial.agents.front().states.size());
    if (T < tau1 + tau2) {
      ++short_trials;
      continue;
    }
    for (int t = tau2 - 1; t + tau1 < T; t += stride) {
      DataWindow w;
      for (const auto& agent : trial.agents) {
        CvaeWindow cw;
        cw.ctx.past.assign(agent.states.begin() + (t - tau2 + 1),
                           agent.states.begin() + t + 1);
        cw.ctx.beta = agent.goal;
        cw.future.assign(agent.states.begin() + t + 1,
                         agent.states.begin() + t + 1 + tau1);
        w.agents.push_back(std::move(cw));
      }
      windows.push_back(std::move(w));
    }
  }
  if (skipped) *skipped = short_trials;
  return windows;
}

// Split by trial (not by window) so held-out windows never share a trial with
// training windows.
inline void split_trials(const std::vector<TrialRecord>& trials, double holdout_frac,
                         Rng& rng, std::vector<TrialRecord>& train,
                         std::vector<TrialRecord>& holdout) {
  if (trials.empty()) throw InverseError("split_trials: empty trial set");
  std::vector<int> order(trials.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform() * (i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  size_t n_hold = static_cast<size_t>(holdout_frac * trials.size());
  if (n_hold == 0 && trials.size() > 1 && holdout_frac > 0.0) n_hold = 1;
  train.clear();
  holdout.clear();
  for (size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < order.size() - n_hold ? train : holdout;
    dst.push_back(trials[order[i]]);
  }
}

namespace detail {

struct CostBind {
  Tape* tape = nullptr;
  std::map<std::string, Tape::NodeId> id;
  Tape::NodeId operator[](const std::string& name) const { return id.at(name); }
};

inline CostBind bind_cost(Tape& tape, const CostNet& net, bool trainable) {
  CostBind b;
  b.tape = &tape;
  for (const auto& [name, t] : net.params)
    b.id[name] = trainable ? tape.param(t) : tape.constant(t);
  return b;
}

// Batched cost evaluation: {B,F} features -> {B} non-negative costs.
inline Tape::NodeId cost_forward(const CostBind& b, Tape::NodeId features) {
  Tape& t = *b.tape;
  Tape::NodeId h = features;
  for (const char* layer : {"c1", "c2", "c3"})
    h = t.tanh_(t.add(t.matmul(h, b[std::string(layer) + ".W"]),
                      b[std::string(layer) + ".b"]));
  Tape::NodeId z = t.add(t.matmul(h, b["head.W"]), b["head.b"]);  // {B,1}
  return t.softplus(z);
}

// K x K' cost matrix node between two sample sets.
inline Tape::NodeId pair_matrix_node(const CostBind& b, const CostNet& net,
                                     const std::vector<Trajectory>& A,
                                     const std::vector<Trajectory>& B) {
  Tape& t = *b.tape;
  const int K = static_cast<int>(A.size()), Kp = static_cast<int>(B.size());
  Tensor feats = Tensor::zeros({K * Kp, net.feature_dim()});
  for (int k = 0; k < K; ++k)
    for (int kp = 0; kp < Kp; ++kp) {
      Tensor f = pair_features(A[k], B[kp]);
      std::copy(f.data.begin(), f.data.end(),
                feats.data.begin() + static_cast<long>(k * Kp + kp) * f.size());
    }
  Tape::NodeId costs = cost_forward(b, t.constant(std::move(feats)));  // {K*Kp,1}
  return t.reshape(costs, {K, Kp});
}

inline Tensor future_distances(const std::vector<Trajectory>& samples,
                               const std::vector<AgentState>& target) {
  Tensor d = Tensor::zeros({static_cast<int>(samples.size())});
  for (size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].states.size() != target.size())
      throw InverseError("future_distances: length mismatch");
    double acc = 0.0;
    for (size_t s = 0; s < target.size(); ++s) {
      const double ex = samples[k].states[s].x - target[s].x;
      const double ey = samples[k].states[s].y - target[s].y;
      acc += ex * ex + ey * ey;
    }
    d.data[k] = acc;
  }
  return d;
}

}  // namespace detail

struct WindowLossResult {
  double loss = 0.0;
  std::vector<Tensor> grads;  // aligned with CostNet::params when requested
};

// Negative-log-likelihood surrogate for one window: sample nominal strategies
// from the frozen generative model, push them through the unrolled
// best-response solve under l_theta, and weight each sample's squared distance
// to the demonstrated future by its equilibrium weight.
inline WindowLossResult window_loss(const CostNet& net, const CvaeModel& cvae,
                                    const DataWindow& window, int K, Rng& rng,
                                    bool with_grad = false, int sweeps = 3) {
  if (K < 1) throw InverseError("window_loss: K must be positive");
  const int n = static_cast<int>(window.agents.size());
  if (n < 1) throw InverseError("window_loss: empty window");

  std::vector<std::vector<Trajectory>> samples(n);
  for (int i = 0; i < n; ++i)
    samples[i] = sample_nominal(cvae, window.agents[i].ctx, K, rng);

  Tape tape;
  auto b = detail::bind_cost(tape, net, with_grad);
  std::map<std::pair<int, int>, Tape::NodeId> M;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      M[{i, j}] = detail::pair_matrix_node(b, net, samples[i], samples[j]);

  const auto w = brne_unrolled(tape, std::vector<int>(n, K), M, sweeps);

  Tape::NodeId loss = tape.constant(Tensor::scalar(0.0));
  for (int i = 0; i < n; ++i) {
    const Tensor d = detail::future_distances(samples[i], window.agents[i].future);
    loss = tape.add(loss, tape.sum(tape.mul(w[i], tape.constant(d))));
  }

  WindowLossResult out;
  out.loss = tape.value(loss).at(0);
  if (with_grad) {
    tape.backward(loss);
    for (const auto& [name, t] : net.params) out.grads.push_back(tape.grad(b[name]));
  }
  return out;
}

struct CostTrainReport {
  std::vector<double> epoch_loss;
};

inline CostTrainReport train_cost(
    CostNet& net, const CvaeModel& cvae, const std::vector<DataWindow>& windows,
    int epochs = 10, int batch_size = 48, double lr = 1e-4, int K = 100,
    Rng rng = Rng(0), int sweeps = 3,
    const std::function<void(int, double, const CostNet&)>& on_epoch = {}) {
  if (windows.empty()) throw InverseError("train_cost: empty window set");
  CostTrainReport report;
  std::vector<Tensor> snapshot;
  for (const auto& [n, t] : net.params) snapshot.push_back(t);
  AdamState adam = AdamState::init(snapshot);

  std::vector<int> order(windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform() * (i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }
    double total = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += batch_size) {
      const size_t end = std::min(order.size(), start + batch_size);
      std::vector<Tensor> grads;
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        auto res = window_loss(net, cvae, windows[order[i]], K, rng, true, sweeps);
        batch_loss += res.loss;
        if (grads.empty()) {
          grads = std::move(res.grads);
        } else {
          for (size_t g = 0; g < grads.size(); ++g)
            for (long e = 0; e < grads[g].size(); ++e)
              grads[g].data[e] += res.grads[g].data[e];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : grads)
        for (auto& v : g.data) v *= inv;
      total += batch_loss * inv;
      ++batches;

      std::vector<Tensor> params;
      for (const auto& [name, t] : net.params) params.push_back(t);
      adam_step(params, grads, adam, lr);
      for (size_t i = 0; i < net.params.size(); ++i)
        net.params[i].second = std::move(params[i]);
    }
    const double mean_loss = total / batches;
    report.epoch_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss, net);
  }
  return report;
}

}  // namespace mixgame

#endif  // MIXGAME_INVERSE_HPP
