#ifndef MIXGAME_CVAE_HPP
#define MIXGAME_CVAE_HPP

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mixgame/checkpoint.hpp"
#include "mixgame/dataset.hpp"
#include "mixgame/dynamics.hpp"
#include "mixgame/optim.hpp"
#include "mixgame/rng.hpp"
#include "mixgame/tape.hpp"

namespace mixgame {

struct CvaeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CvaeConfig {
  int tau1 = 30;   // future steps
  int tau2 = 10;   // past (conditioning) steps
  int hidden = 256;
  int latent = 4;
  double dt = 0.1;
};

struct ConditioningContext {
  std::vector<AgentState> past;     // exactly tau2 states, world frame
  std::array<double, 2> beta{0, 0};  // task waypoint, world frame
};

// Agent-centric canonical frame anchored at the last past state: that state
// sits at the origin heading +x.
struct CanonicalFrame {
  double x = 0, y = 0, psi = 0;

  std::array<double, 2> to_local(double wx, double wy) const {
    const double dx = wx - x, dy = wy - y;
    const double c = std::cos(psi), s = std::sin(psi);
    return {c * dx + s * dy, -s * dx + c * dy};
  }
  std::array<double, 2> to_world(double lx, double ly) const {
    const double c = std::cos(psi), s = std::sin(psi);
    return {x + c * lx - s * ly, y + s * lx + c * ly};
  }
};

inline CanonicalFrame frame_of(const std::vector<AgentState>& past) {
  if (past.empty()) throw CvaeError("frame_of: empty past");
  const AgentState& s = past.back();
  return {s.x, s.y, s.psi};
}

struct CvaeModel {
  CvaeConfig cfg;
  std::vector<std::pair<std::string, Tensor>> params;  // fixed registration order

  Tensor& tensor(const std::string& name) {
    for (auto& [n, t] : params)
      if (n == name) return t;
    throw CvaeError("unknown parameter: " + name);
  }
  const Tensor& tensor(const std::string& name) const {
    return const_cast<CvaeModel*>(this)->tensor(name);
  }

  static CvaeModel init(const CvaeConfig& cfg, Rng& rng) {
    CvaeModel m;
    m.cfg = cfg;
    const int H = cfg.hidden, L = cfg.latent;
    auto dense = [&](const std::string& name, int in, int out, bool zero = false) {
      Tensor W = Tensor::zeros({in, out});
      if (!zero) {
        const double s = 1.0 / std::sqrt(static_cast<double>(in));
        for (auto& v : W.data) v = s * rng.normal();
      }
      m.params.emplace_back(name + ".W", std::move(W));
      m.params.emplace_back(name + ".b", Tensor::zeros({out}));
    };
    auto gru_cell = [&](const std::string& name, int in) {
      for (const char* gate : {"z", "r", "h"}) {
        const double sw = 1.0 / std::sqrt(static_cast<double>(in));
        const double su = 1.0 / std::sqrt(static_cast<double>(H));
        Tensor W = Tensor::zeros({in, H});
        for (auto& v : W.data) v = sw * rng.normal();
        Tensor U = Tensor::zeros({H, H});
        for (auto& v : U.data) v = su * rng.normal();
        m.params.emplace_back(name + ".W" + gate, std::move(W));
        m.params.emplace_back(name + ".U" + gate, std::move(U));
        m.params.emplace_back(name + ".b" + gate, Tensor::zeros({H}));
      }
    };

    gru_cell("ctx_gru", 5);            // past state [x, y, cos, sin, v]
    dense("ctx_embed", H + 2, H);      // [h_past, beta]
    gru_cell("enc_gru", 2);            // future displacement [dx, dy]
    dense("enc_d1", 2 * H, H);
    dense("enc_d2", H, H);
    dense("enc_d3", H, H);
    dense("enc_mu", H, L, /*zero=*/true);
    dense("enc_logvar", H, L, /*zero=*/true);
    dense("dec_d1", L + H, H);
    dense("dec_d2", H, H);
    dense("dec_d3", H, H);
    gru_cell("dec_gru", 2);            // previous output displacement
    dense("dec_out", H, 2);
    return m;
  }

  void save(const std::string& path) const {
    std::vector<std::pair<std::string, Tensor>> out = params;
    out.emplace_back("__config",
                     Tensor::vec({static_cast<double>(cfg.tau1),
                                  static_cast<double>(cfg.tau2),
                                  static_cast<double>(cfg.hidden),
                                  static_cast<double>(cfg.latent), cfg.dt}));
    save_checkpoint(path, out);
  }

  static CvaeModel load(const std::string& path) {
    auto tensors = load_checkpoint(path);
    auto it = tensors.find("__config");
    if (it == tensors.end() || it->second.size() != 5)
      throw CvaeError("not a generative-model checkpoint: " + path);
    CvaeConfig cfg;
    cfg.tau1 = static_cast<int>(it->second.at(0));
    cfg.tau2 = static_cast<int>(it->second.at(1));
    cfg.hidden = static_cast<int>(it->second.at(2));
    cfg.latent = static_cast<int>(it->second.at(3));
    cfg.dt = it->second.at(4);
    Rng rng(0);
    CvaeModel m = init(cfg, rng);  // establishes names and shapes
    for (auto& [name, t] : m.params) {
      auto found = tensors.find(name);
      if (found == tensors.end()) throw CvaeError("missing tensor: " + name);
      if (found->second.shape != t.shape) throw CvaeError("shape mismatch: " + name);
      t = std::move(found->second);
    }
    return m;
  }
};

struct CvaeWindow {
  ConditioningContext ctx;
  std::vector<AgentState> future;  // exactly tau1 states, world frame
};

namespace detail {

struct CvaeBind {
  Tape* tape = nullptr;
  std::unordered_map<std::string, Tape::NodeId> id;
  Tape::NodeId operator[](const std::string& name) const { return id.at(name); }
};

inline CvaeBind bind_cvae(Tape& tape, const CvaeModel& model, bool trainable) {
  CvaeBind b;
  b.tape = &tape;
  for (const auto& [name, t] : model.params)
    b.id[name] = trainable ? tape.param(t) : tape.constant(t);
  return b;
}

inline Tape::NodeId dense_tanh(const CvaeBind& b, const std::string& name,
                               Tape::NodeId x) {
  Tape& t = *b.tape;
  return t.tanh_(t.add(t.matmul(x, b[name + ".W"]), b[name + ".b"]));
}

inline Tape::NodeId gru_step(const CvaeBind& b, const std::string& name,
                             Tape::NodeId x, Tape::NodeId h) {
  Tape& t = *b.tape;
  auto gate = [&](const char* g, Tape::NodeId hin) {
    return t.add(t.add(t.matmul(x, b[name + ".W" + g]), t.matmul(hin, b[name + ".U" + g])),
                 b[name + ".b" + g]);
  };
  const Tape::NodeId z = t.sigmoid(gate("z", h));
  const Tape::NodeId r = t.sigmoid(gate("r", h));
  const Tape::NodeId hh = t.tanh_(t.add(
      t.add(t.matmul(x, b[name + ".Wh"]), t.matmul(t.mul(r, h), b[name + ".Uh"])),
      b[name + ".bh"]));
  // h' = (1 - z) * h + z * hh
  return t.add(t.sub(h, t.mul(z, h)), t.mul(z, hh));
}

// Batched canonical inputs for a set of windows (all share tau1/tau2).
struct CanonBatch {
  int B = 0;
  std::vector<CanonicalFrame> frames;
  std::vector<Tensor> past_inputs;     // tau2 tensors {B,5}
  Tensor beta;                         // {B,2}
  std::vector<Tensor> future_deltas;   // tau1 tensors {B,2} (empty if no futures)
  std::vector<Tensor> future_pos;      // tau1 tensors {B,2}
};

inline CanonBatch canonicalize(const std::vector<const CvaeWindow*>& windows,
                               const CvaeConfig& cfg) {
  CanonBatch cb;
  cb.B = static_cast<int>(windows.size());
  cb.beta = Tensor::zeros({cb.B, 2});
  cb.past_inputs.assign(cfg.tau2, Tensor::zeros({cb.B, 5}));
  const bool has_future = !windows.front()->future.empty();
  if (has_future) {
    cb.future_deltas.assign(cfg.tau1, Tensor::zeros({cb.B, 2}));
    cb.future_pos.assign(cfg.tau1, Tensor::zeros({cb.B, 2}));
  }
  for (int w = 0; w < cb.B; ++w) {
    const CvaeWindow& win = *windows[w];
    if (static_cast<int>(win.ctx.past.size()) != cfg.tau2)
      throw CvaeError("window past length != tau2");
    if (has_future && static_cast<int>(win.future.size()) != cfg.tau1)
      throw CvaeError("window future length != tau1");
    const CanonicalFrame f = frame_of(win.ctx.past);
    cb.frames.push_back(f);
    for (int k = 0; k < cfg.tau2; ++k) {
      const AgentState& s = win.ctx.past[k];
      const auto p = f.to_local(s.x, s.y);
      cb.past_inputs[k].at(w, 0) = p[0];
      cb.past_inputs[k].at(w, 1) = p[1];
      cb.past_inputs[k].at(w, 2) = std::cos(s.psi - f.psi);
      cb.past_inputs[k].at(w, 3) = std::sin(s.psi - f.psi);
      cb.past_inputs[k].at(w, 4) = s.v;
    }
    const auto bl = f.to_local(win.ctx.beta[0], win.ctx.beta[1]);
    cb.beta.at(w, 0) = bl[0];
    cb.beta.at(w, 1) = bl[1];
    if (has_future) {
      std::array<double, 2> prev{0.0, 0.0};
      for (int k = 0; k < cfg.tau1; ++k) {
        const auto p = f.to_local(win.future[k].x, win.future[k].y);
        cb.future_pos[k].at(w, 0) = p[0];
        cb.future_pos[k].at(w, 1) = p[1];
        cb.future_deltas[k].at(w, 0) = p[0] - prev[0];
        cb.future_deltas[k].at(w, 1) = p[1] - prev[1];
        prev = p;
      }
    }
  }
  return cb;
}

inline Tape::NodeId context_embedding(const CvaeBind& b, const CanonBatch& cb) {
  Tape& t = *b.tape;
  const int H = t.value(b["ctx_gru.bz"]).shape[0];
  Tape::NodeId h = t.constant(Tensor::zeros({cb.B, H}));
  for (const Tensor& x : cb.past_inputs)
    h = gru_step(b, "ctx_gru", t.constant(x), h);
  return dense_tanh(b, "ctx_embed", t.concat(h, t.constant(cb.beta)));
}

inline std::pair<Tape::NodeId, Tape::NodeId> encode_posterior(const CvaeBind& b,
                                                              const CanonBatch& cb,
                                                              Tape::NodeId ctx) {
  Tape& t = *b.tape;
  const int H = t.value(b["enc_gru.bz"]).shape[0];
  Tape::NodeId h = t.constant(Tensor::zeros({cb.B, H}));
  for (const Tensor& d : cb.future_deltas) h = gru_step(b, "enc_gru", t.constant(d), h);
  Tape::NodeId e = dense_tanh(b, "enc_d1", t.concat(h, ctx));
  e = dense_tanh(b, "enc_d2", e);
  e = dense_tanh(b, "enc_d3", e);
  Tape& tp = t;
  const Tape::NodeId mu = tp.add(tp.matmul(e, b["enc_mu.W"]), b["enc_mu.b"]);
  const Tape::NodeId logvar = tp.add(tp.matmul(e, b["enc_logvar.W"]), b["enc_logvar.b"]);
  return {mu, logvar};
}

// Decodes {B,latent} latents into tau1 canonical position nodes {B,2}.
inline std::vector<Tape::NodeId> decode_positions(const CvaeBind& b,
                                                  const CvaeConfig& cfg,
                                                  Tape::NodeId z, Tape::NodeId ctx) {
  Tape& t = *b.tape;
  const int B = t.value(z).shape[0];
  Tape::NodeId h = dense_tanh(b, "dec_d1", t.concat(z, ctx));
  h = dense_tanh(b, "dec_d2", h);
  h = dense_tanh(b, "dec_d3", h);
  Tape::NodeId delta = t.constant(Tensor::zeros({B, 2}));
  Tape::NodeId pos = t.constant(Tensor::zeros({B, 2}));
  std::vector<Tape::NodeId> out;
  out.reserve(cfg.tau1);
  for (int k = 0; k < cfg.tau1; ++k) {
    h = gru_step(b, "dec_gru", delta, h);
    delta = t.add(t.matmul(h, b["dec_out.W"]), b["dec_out.b"]);
    pos = t.add(pos, delta);
    out.push_back(pos);
  }
  return out;
}

// Full ELBO node over a batch of windows: 0.5 * sum of squared position error
// + Gaussian KL, averaged over the batch.
inline Tape::NodeId elbo_node(const CvaeBind& b, const CvaeModel& model,
                              const CanonBatch& cb, const Tensor& eps) {
  Tape& t = *b.tape;
  const Tape::NodeId ctx = context_embedding(b, cb);
  auto [mu, logvar] = encode_posterior(b, cb, ctx);
  const Tape::NodeId sigma = t.exp_(t.scale(logvar, 0.5));
  const Tape::NodeId z = t.add(mu, t.mul(sigma, t.constant(eps)));
  const auto pos = decode_positions(b, model.cfg, z, ctx);

  Tape::NodeId rec = t.constant(Tensor::scalar(0.0));
  for (int k = 0; k < model.cfg.tau1; ++k)
    rec = t.add(rec, t.sum(t.square(t.sub(pos[k], t.constant(cb.future_pos[k])))));
  rec = t.scale(rec, 0.5);
  // KL(N(mu, sigma^2) || N(0, I)) = 0.5 * sum(mu^2 + sigma^2 - 1 - logvar)
  Tape::NodeId kl = t.sum(t.add(t.square(mu), t.sub(t.exp_(logvar), logvar)));
  kl = t.scale(t.sub(kl, t.constant(Tensor::scalar(
                             static_cast<double>(t.value(mu).size())))),
               0.5);
  return t.scale(t.add(rec, kl), 1.0 / cb.B);
}

}  // namespace detail

inline std::pair<Tensor, Tensor> encode(const CvaeModel& model,
                                        const std::vector<AgentState>& future,
                                        const ConditioningContext& ctx) {
  CvaeWindow win{ctx, future};
  Tape tape;
  auto b = detail::bind_cvae(tape, model, false);
  auto cb = detail::canonicalize({&win}, model.cfg);
  const Tape::NodeId c = detail::context_embedding(b, cb);
  auto [mu, logvar] = detail::encode_posterior(b, cb, c);
  Tensor m(std::vector<int>{model.cfg.latent}, tape.value(mu).data);
  Tensor lv(std::vector<int>{model.cfg.latent}, tape.value(logvar).data);
  return {std::move(m), std::move(lv)};
}

namespace detail {

// Tape-free forward pass for sampling: the generative direction never needs
// gradients, so it runs on plain dense algebra.
using FwdMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const FwdMat> fwd_mat(const Tensor& t) {
  return {t.data.data(), t.shape[0], t.shape[1]};
}
inline Eigen::Map<const Eigen::RowVectorXd> fwd_row(const Tensor& t) {
  return {t.data.data(), static_cast<long>(t.data.size())};
}

struct FwdGru {
  const Tensor *Wz, *Uz, *bz, *Wr, *Ur, *br, *Wh, *Uh, *bh;
};

inline FwdGru fwd_gru(const CvaeModel& m, const std::string& name) {
  return {&m.tensor(name + ".Wz"), &m.tensor(name + ".Uz"), &m.tensor(name + ".bz"),
          &m.tensor(name + ".Wr"), &m.tensor(name + ".Ur"), &m.tensor(name + ".br"),
          &m.tensor(name + ".Wh"), &m.tensor(name + ".Uh"), &m.tensor(name + ".bh")};
}

inline void fwd_gru_step(const FwdGru& g, const FwdMat& x, FwdMat& h) {
  const auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  FwdMat z = ((x * fwd_mat(*g.Wz) + h * fwd_mat(*g.Uz)).rowwise() + fwd_row(*g.bz))
                 .unaryExpr(sigmoid);
  FwdMat r = ((x * fwd_mat(*g.Wr) + h * fwd_mat(*g.Ur)).rowwise() + fwd_row(*g.br))
                 .unaryExpr(sigmoid);
  FwdMat hh = ((x * fwd_mat(*g.Wh) + (r.cwiseProduct(h)) * fwd_mat(*g.Uh)).rowwise() +
               fwd_row(*g.bh))
                  .array()
                  .tanh()
                  .matrix();
  h = h - z.cwiseProduct(h) + z.cwiseProduct(hh);
}

inline FwdMat fwd_dense_tanh(const CvaeModel& m, const std::string& name,
                             const FwdMat& x) {
  return ((x * fwd_mat(m.tensor(name + ".W"))).rowwise() +
          fwd_row(m.tensor(name + ".b")))
      .array()
      .tanh()
      .matrix();
}

inline std::vector<Trajectory> decode_batch(const CvaeModel& model,
                                            const Tensor& z_batch,
                                            const ConditioningContext& ctx) {
  const CvaeConfig& cfg = model.cfg;
  const int K = z_batch.shape[0];
  const int H = cfg.hidden;
  const CanonicalFrame f = frame_of(ctx.past);
  if (static_cast<int>(ctx.past.size()) != cfg.tau2)
    throw CvaeError("decode: past length != tau2");

  // context embedding, computed once and shared over the K latents
  FwdMat hc = FwdMat::Zero(1, H);
  const FwdGru ctx_gru = fwd_gru(model, "ctx_gru");
  for (int k = 0; k < cfg.tau2; ++k) {
    const AgentState& s = ctx.past[k];
    const auto p = f.to_local(s.x, s.y);
    FwdMat x(1, 5);
    x << p[0], p[1], std::cos(s.psi - f.psi), std::sin(s.psi - f.psi), s.v;
    fwd_gru_step(ctx_gru, x, hc);
  }
  const auto bl = f.to_local(ctx.beta[0], ctx.beta[1]);
  FwdMat cin(1, H + 2);
  cin << hc, bl[0], bl[1];
  const FwdMat c1 = fwd_dense_tanh(model, "ctx_embed", cin);
  const FwdMat c = c1.replicate(K, 1);

  // decoder: three dense layers seed the hidden state, then autoregressive
  // displacement steps accumulated into positions
  FwdMat zin(K, cfg.latent + H);
  zin << fwd_mat(z_batch), c;
  FwdMat h = fwd_dense_tanh(model, "dec_d1", zin);
  h = fwd_dense_tanh(model, "dec_d2", h);
  h = fwd_dense_tanh(model, "dec_d3", h);
  const FwdGru dec_gru = fwd_gru(model, "dec_gru");
  const auto& Wout = model.tensor("dec_out.W");
  const auto& bout = model.tensor("dec_out.b");
  FwdMat delta = FwdMat::Zero(K, 2);
  FwdMat pos = FwdMat::Zero(K, 2);
  std::vector<FwdMat> positions;
  positions.reserve(cfg.tau1);
  for (int k = 0; k < cfg.tau1; ++k) {
    fwd_gru_step(dec_gru, delta, h);
    delta = (h * fwd_mat(Wout)).rowwise() + fwd_row(bout);
    pos += delta;
    positions.push_back(pos);
  }

  std::vector<Trajectory> out(K);
  for (int s = 0; s < K; ++s) {
    out[s].dt = model.cfg.dt;
    out[s].states.reserve(model.cfg.tau1);
  }
  for (int s = 0; s < K; ++s) {
    std::array<double, 2> prev_world = {f.x, f.y};
    double prev_psi = f.psi;
    for (int k = 0; k < model.cfg.tau1; ++k) {
      const FwdMat& p = positions[k];
      const auto w = f.to_world(p(s, 0), p(s, 1));
      const double dx = w[0] - prev_world[0], dy = w[1] - prev_world[1];
      const double step_len = std::hypot(dx, dy);
      AgentState st;
      st.x = w[0];
      st.y = w[1];
      st.psi = step_len > 1e-9 ? std::atan2(dy, dx) : prev_psi;
      st.v = step_len / model.cfg.dt;
      out[s].states.push_back(st);
      prev_world = w;
      prev_psi = st.psi;
    }
  }
  return out;
}

}  // namespace detail

inline Trajectory decode(const CvaeModel& model, const Tensor& z,
                         const ConditioningContext& ctx) {
  if (z.size() != model.cfg.latent) throw CvaeError("decode: latent size mismatch");
  Tensor zb(std::vector<int>{1, model.cfg.latent}, z.data);
  return detail::decode_batch(model, zb, ctx)[0];
}

inline std::vector<Trajectory> sample_nominal(const CvaeModel& model,
                                              const ConditioningContext& ctx, int K,
                                              Rng& rng) {
  if (K < 1) throw CvaeError("sample_nominal: K must be positive");
  Tensor z = Tensor::zeros({K, model.cfg.latent});
  for (auto& v : z.data) v = rng.normal();
  return detail::decode_batch(model, z, ctx);
}

inline double elbo_loss(const CvaeModel& model, const std::vector<AgentState>& future,
                        const ConditioningContext& ctx, Rng& rng) {
  CvaeWindow win{ctx, future};
  Tape tape;
  auto b = detail::bind_cvae(tape, model, false);
  auto cb = detail::canonicalize({&win}, model.cfg);
  Tensor eps = Tensor::zeros({1, model.cfg.latent});
  for (auto& v : eps.data) v = rng.normal();
  return tape.value(detail::elbo_node(b, model, cb, eps)).at(0);
}

// Sliding per-agent windows (stride 1) over every trial.
inline std::vector<CvaeWindow> cvae_windows(const std::vector<TrialRecord>& trials,
                                            const CvaeConfig& cfg) {
  std::vector<CvaeWindow> windows;
  for (const auto& trial : trials) {
    for (const auto& agent : trial.agents) {
      const int T = static_cast<int>(agent.states.size());
      for (int t = cfg.tau2 - 1; t + cfg.tau1 < T; ++t) {
        CvaeWindow w;
        w.ctx.past.assign(agent.states.begin() + (t - cfg.tau2 + 1),
                          agent.states.begin() + t + 1);
        w.ctx.beta = agent.goal;
        w.future.assign(agent.states.begin() + t + 1,
                        agent.states.begin() + t + 1 + cfg.tau1);
        windows.push_back(std::move(w));
      }
    }
  }
  return windows;
}

struct CvaeTrainReport {
  std::vector<double> epoch_loss;  // mean ELBO per epoch
};

inline CvaeTrainReport train_cvae(
    CvaeModel& model, const std::vector<CvaeWindow>& windows, int epochs,
    int batch_size, double lr, Rng& rng,
    const std::function<void(int, double)>& on_epoch = {}) {
  if (windows.empty()) throw CvaeError("train_cvae: empty window set");
  CvaeTrainReport report;
  AdamState adam;
  std::vector<Tensor> param_snapshot;
  for (const auto& [n, t] : model.params) param_snapshot.push_back(t);
  adam = AdamState::init(param_snapshot);

  std::vector<int> order(windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    // Fisher-Yates shuffle with the run RNG
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform() * (i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }
    double total = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += batch_size) {
      std::vector<const CvaeWindow*> batch;
      for (size_t i = start; i < std::min(order.size(), start + batch_size); ++i)
        batch.push_back(&windows[order[i]]);
      Tape tape;
      auto b = detail::bind_cvae(tape, model, true);
      auto cb = detail::canonicalize(batch, model.cfg);
      Tensor eps = Tensor::zeros({cb.B, model.cfg.latent});
      for (auto& v : eps.data) v = rng.normal();
      const Tape::NodeId loss = detail::elbo_node(b, model, cb, eps);
      tape.backward(loss);
      total += tape.value(loss).at(0);
      ++batches;

      std::vector<Tensor> params, grads;
      params.reserve(model.params.size());
      for (const auto& [name, t] : model.params) {
        params.push_back(t);
        grads.push_back(tape.grad(b[name]));
      }
      adam_step(params, grads, adam, lr);
      for (size_t i = 0; i < model.params.size(); ++i)
        model.params[i].second = std::move(params[i]);
    }
    const double mean_loss = total / batches;
    report.epoch_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  return report;
}

}  // namespace mixgame

#endif  // MIXGAME_CVAE_HPP
