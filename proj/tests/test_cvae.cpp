#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mixgame/cvae.hpp"

using namespace mixgame;

namespace {

CvaeConfig small_cfg() {
  CvaeConfig cfg;
  cfg.tau1 = 5;
  cfg.tau2 = 3;
  cfg.hidden = 16;
  cfg.latent = 2;
  return cfg;
}

// Constant-velocity window starting at (x0,y0) with heading psi and speed v.
CvaeWindow cv_window(const CvaeConfig& cfg, double x0, double y0, double psi, double v) {
  CvaeWindow w;
  AgentState s{x0, y0, psi, v};
  auto advance = [&](AgentState& st) {
    st.x += cfg.dt * st.v * std::cos(st.psi);
    st.y += cfg.dt * st.v * std::sin(st.psi);
  };
  for (int k = 0; k < cfg.tau2; ++k) {
    w.ctx.past.push_back(s);
    advance(s);
  }
  for (int k = 0; k < cfg.tau1; ++k) {
    w.ctx.past.size();  // no-op
    w.future.push_back(s);
    advance(s);
  }
  w.ctx.beta = {s.x + 2 * std::cos(psi), s.y + 2 * std::sin(psi)};
  return w;
}

double recon_oracle(const CvaeModel& model, const Tensor& z, const CvaeWindow& w) {
  Trajectory dec = decode(model, z, w.ctx);
  double rec = 0.0;
  for (int k = 0; k < model.cfg.tau1; ++k) {
    const double ex = dec.states[k].x - w.future[k].x;
    const double ey = dec.states[k].y - w.future[k].y;
    rec += ex * ex + ey * ey;
  }
  return 0.5 * rec;
}

}  // namespace

TEST_CASE("encode contract") {
  Rng rng(1);
  CvaeModel model = CvaeModel::init(small_cfg(), rng);
  CvaeWindow w = cv_window(model.cfg, 0.3, -0.2, 0.4, 0.8);

  auto [mu, logvar] = encode(model, w.future, w.ctx);
  REQUIRE(mu.shape == std::vector<int>{2});
  REQUIRE(logvar.shape == std::vector<int>{2});
  // zero-initialized posterior head: exactly the prior
  for (double m : mu.data) REQUIRE(m == 0.0);
  for (double lv : logvar.data) REQUIRE(lv == 0.0);

  SECTION("wrong future length rejected") {
    auto bad = w.future;
    bad.pop_back();
    REQUIRE_THROWS_AS(encode(model, bad, w.ctx), CvaeError);
  }
  SECTION("wrong past length rejected") {
    auto ctx = w.ctx;
    ctx.past.pop_back();
    REQUIRE_THROWS_AS(encode(model, w.future, ctx), CvaeError);
  }
}

TEST_CASE("decode contract") {
  Rng rng(2);
  CvaeModel model = CvaeModel::init(small_cfg(), rng);
  CvaeWindow w = cv_window(model.cfg, 1.0, 2.0, -0.7, 0.6);
  Tensor z = Tensor::vec({0.3, -1.1});

  Trajectory a = decode(model, z, w.ctx);
  REQUIRE(static_cast<int>(a.states.size()) == model.cfg.tau1);

  SECTION("deterministic") {
    Trajectory b = decode(model, z, w.ctx);
    for (int k = 0; k < model.cfg.tau1; ++k) {
      REQUIRE(a.states[k].x == b.states[k].x);
      REQUIRE(a.states[k].y == b.states[k].y);
    }
  }
  SECTION("latent size checked") {
    REQUIRE_THROWS_AS(decode(model, Tensor::vec({1.0}), w.ctx), CvaeError);
  }
  SECTION("equivariant under world-frame rotation") {
    const double th = 1.13;
    const double c = std::cos(th), s = std::sin(th);
    ConditioningContext rot = w.ctx;
    for (auto& st : rot.past) {
      const double x = st.x, y = st.y;
      st.x = c * x - s * y;
      st.y = s * x + c * y;
      st.psi = wrap_angle(st.psi + th);
    }
    rot.beta = {c * w.ctx.beta[0] - s * w.ctx.beta[1],
                s * w.ctx.beta[0] + c * w.ctx.beta[1]};
    Trajectory r = decode(model, z, rot);
    for (int k = 0; k < model.cfg.tau1; ++k) {
      REQUIRE_THAT(r.states[k].x,
                   Catch::Matchers::WithinAbs(c * a.states[k].x - s * a.states[k].y, 1e-9));
      REQUIRE_THAT(r.states[k].y,
                   Catch::Matchers::WithinAbs(s * a.states[k].x + c * a.states[k].y, 1e-9));
    }
  }
}

TEST_CASE("elbo oracle checks") {
  Rng rng(3);
  CvaeModel model = CvaeModel::init(small_cfg(), rng);
  CvaeWindow w = cv_window(model.cfg, -0.5, 0.1, 2.2, 0.9);

  SECTION("zero-init posterior head: loss is pure reconstruction") {
    Rng r1(42);
    const double loss = elbo_loss(model, w.future, w.ctx, r1);
    Rng r2(42);
    Tensor z = Tensor::zeros({model.cfg.latent});
    for (auto& v : z.data) v = r2.normal();  // mu=0, sigma=1 -> z = eps
    REQUIRE_THAT(loss, Catch::Matchers::WithinAbs(recon_oracle(model, z, w), 1e-9));
  }
  SECTION("unit posterior mean shift adds KL of one half") {
    CvaeModel shifted = model;
    shifted.tensor("enc_mu.b").data[0] = 1.0;
    Rng r1(42);
    const double loss = elbo_loss(shifted, w.future, w.ctx, r1);
    Rng r2(42);
    Tensor z = Tensor::zeros({model.cfg.latent});
    for (auto& v : z.data) v = r2.normal();
    z.data[0] += 1.0;  // z = mu + eps
    REQUIRE_THAT(loss - recon_oracle(shifted, z, w),
                 Catch::Matchers::WithinAbs(0.5, 1e-9));
  }
}

TEST_CASE("elbo gradients match finite differences") {
  Rng rng(7);
  CvaeConfig cfg = small_cfg();
  cfg.hidden = 6;
  cfg.tau1 = 4;
  CvaeModel model = CvaeModel::init(cfg, rng);
  // make the zero-init heads non-trivial so their gradients are exercised
  for (auto& v : model.tensor("enc_mu.W").data) v = 0.3 * rng.normal();
  for (auto& v : model.tensor("enc_logvar.W").data) v = 0.1 * rng.normal();

  std::vector<CvaeWindow> wins = {cv_window(cfg, 0, 0, 0.3, 0.7),
                                  cv_window(cfg, 1, -1, -1.2, 0.9)};
  Tensor eps = Tensor::zeros({2, cfg.latent});
  for (auto& v : eps.data) v = rng.normal();

  auto loss_of = [&](const CvaeModel& m, Tape* grad_tape,
                     detail::CvaeBind* bind_out) {
    Tape local;
    Tape& tape = grad_tape ? *grad_tape : local;
    auto b = detail::bind_cvae(tape, m, grad_tape != nullptr);
    auto cb = detail::canonicalize({&wins[0], &wins[1]}, cfg);
    const Tape::NodeId loss = detail::elbo_node(b, m, cb, eps);
    if (grad_tape) {
      grad_tape->backward(loss);
      *bind_out = b;
    }
    return tape.value(loss).at(0);
  };

  Tape tape;
  detail::CvaeBind bind;
  loss_of(model, &tape, &bind);

  Rng pick(99);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const size_t pi = static_cast<size_t>(pick.uniform() * model.params.size());
    auto& [name, t] = model.params[std::min(pi, model.params.size() - 1)];
    const long e = std::min<long>(static_cast<long>(pick.uniform() * t.size()),
                                  t.size() - 1);
    CvaeModel pert = model;
    pert.tensor(name).data[e] += h;
    const double up = loss_of(pert, nullptr, nullptr);
    pert.tensor(name).data[e] -= 2 * h;
    const double dn = loss_of(pert, nullptr, nullptr);
    const double fd = (up - dn) / (2 * h);
    const double analytic = tape.grad(bind[name]).data[e];
    INFO(name << "[" << e << "] fd=" << fd << " analytic=" << analytic);
    REQUIRE(std::abs(fd - analytic) / (std::abs(fd) + std::abs(analytic) + 1e-8) <=
            1e-4);
  }
}

TEST_CASE("window extraction") {
  CvaeConfig cfg = small_cfg();
  TrialRecord trial;
  trial.dt = cfg.dt;
  TrialAgent a;
  a.goal = {5, 0};
  a.lambda = 0.4;
  for (int k = 0; k < 12; ++k) a.states.push_back({0.1 * k, 0, 0, 1});
  trial.agents = {a, a};

  auto wins = cvae_windows({trial}, cfg);
  // per agent: t runs over tau2-1 .. T-tau1-1 -> T - tau1 - tau2 + 1 windows
  REQUIRE(wins.size() == 2 * (12 - cfg.tau1 - cfg.tau2 + 1));
  for (const auto& w : wins) {
    REQUIRE(static_cast<int>(w.ctx.past.size()) == cfg.tau2);
    REQUIRE(static_cast<int>(w.future.size()) == cfg.tau1);
    // contiguity: future starts one step after past ends
    REQUIRE_THAT(w.future.front().x,
                 Catch::Matchers::WithinAbs(w.ctx.past.back().x + 0.1, 1e-12));
    REQUIRE(w.ctx.beta == a.goal);
  }
}

TEST_CASE("training behavior") {
  CvaeConfig cfg = small_cfg();
  Rng rng(11);

  SECTION("single-window overfit drives reconstruction near zero") {
    CvaeModel model = CvaeModel::init(cfg, rng);
    std::vector<CvaeWindow> wins = {cv_window(cfg, 0, 0, 0.5, 0.8)};
    Rng train_rng(21);
    auto report = train_cvae(model, wins, 300, 1, 3e-3, train_rng);
    REQUIRE(report.epoch_loss.back() < report.epoch_loss.front());

    // decode at the posterior mean
    auto [mu, logvar] = encode(model, wins[0].future, wins[0].ctx);
    Trajectory dec = decode(model, mu, wins[0].ctx);
    double max_err = 0.0;
    for (int k = 0; k < cfg.tau1; ++k)
      max_err = std::max(max_err, std::hypot(dec.states[k].x - wins[0].future[k].x,
                                             dec.states[k].y - wins[0].future[k].y));
    REQUIRE(max_err < 0.05);
    // continuity with the observed past
    REQUIRE(std::hypot(dec.states[0].x - wins[0].ctx.past.back().x,
                       dec.states[0].y - wins[0].ctx.past.back().y) < 0.3);
  }

  SECTION("corpus training: loss decreases, posterior sharpens, speed sensible") {
    CvaeModel model = CvaeModel::init(cfg, rng);
    std::vector<CvaeWindow> wins;
    Rng gen(5);
    for (int i = 0; i < 24; ++i)
      wins.push_back(cv_window(cfg, gen.normal(), gen.normal(),
                               gen.uniform(-3.0, 3.0), gen.uniform(0.5, 1.0)));
    Rng train_rng(22);
    auto report = train_cvae(model, wins, 60, 8, 3e-3, train_rng);
    REQUIRE(report.epoch_loss.back() < 0.5 * report.epoch_loss.front());

    // posterior variance shrinks below the prior once the latent carries speed
    auto [mu, logvar] = encode(model, wins[0].future, wins[0].ctx);
    double min_lv = 1e9;
    for (double lv : logvar.data) min_lv = std::min(min_lv, lv);
    REQUIRE(min_lv < 0.0);

    // decoded step displacement tracks the conditioning speed within 20%
    Rng srng(9);
    for (int i : {0, 5, 11}) {
      auto samples = sample_nominal(model, wins[i].ctx, 8, srng);
      const double v = wins[i].ctx.past.back().v;
      double mean_step = 0.0;
      int count = 0;
      for (const auto& tr : samples)
        for (int k = 1; k < cfg.tau1; ++k) {
          mean_step += std::hypot(tr.states[k].x - tr.states[k - 1].x,
                                  tr.states[k].y - tr.states[k - 1].y);
          ++count;
        }
      mean_step /= count;
      REQUIRE(mean_step > 0.8 * v * cfg.dt);
      REQUIRE(mean_step < 1.2 * v * cfg.dt);
    }
  }

  SECTION("training is deterministic given the seed") {
    std::vector<CvaeWindow> wins = {cv_window(cfg, 0, 0, 0.5, 0.8),
                                    cv_window(cfg, 1, 0, -0.5, 0.6)};
    auto run = [&]() {
      Rng init_rng(31);
      CvaeModel model = CvaeModel::init(cfg, init_rng);
      Rng train_rng(32);
      train_cvae(model, wins, 3, 2, 1e-3, train_rng);
      return model;
    };
    CvaeModel a = run();
    CvaeModel b = run();
    for (size_t i = 0; i < a.params.size(); ++i)
      REQUIRE(a.params[i].second.data == b.params[i].second.data);
  }

  SECTION("empty window set rejected") {
    CvaeModel model = CvaeModel::init(cfg, rng);
    Rng train_rng(1);
    REQUIRE_THROWS_AS(train_cvae(model, {}, 1, 1, 1e-3, train_rng), CvaeError);
  }
}

TEST_CASE("sampling determinism and shapes") {
  Rng rng(13);
  CvaeModel model = CvaeModel::init(small_cfg(), rng);
  CvaeWindow w = cv_window(model.cfg, 0.2, 0.4, 1.0, 0.7);

  Rng s1(101), s2(101);
  auto a = sample_nominal(model, w.ctx, 7, s1);
  auto b = sample_nominal(model, w.ctx, 7, s2);
  REQUIRE(a.size() == 7);
  for (int s = 0; s < 7; ++s) {
    REQUIRE(static_cast<int>(a[s].states.size()) == model.cfg.tau1);
    for (int k = 0; k < model.cfg.tau1; ++k) {
      REQUIRE(a[s].states[k].x == b[s].states[k].x);
      REQUIRE(a[s].states[k].y == b[s].states[k].y);
    }
  }
  REQUIRE_THROWS_AS(sample_nominal(model, w.ctx, 0, rng), CvaeError);
}

TEST_CASE("model checkpoint round-trip") {
  Rng rng(17);
  CvaeModel model = CvaeModel::init(small_cfg(), rng);
  const std::string path = "/tmp/mixgame_cvae_test.ckpt";
  model.save(path);
  CvaeModel loaded = CvaeModel::load(path);
  REQUIRE(loaded.cfg.tau1 == model.cfg.tau1);
  REQUIRE(loaded.cfg.hidden == model.cfg.hidden);
  for (size_t i = 0; i < model.params.size(); ++i) {
    REQUIRE(loaded.params[i].first == model.params[i].first);
    REQUIRE(loaded.params[i].second.data == model.params[i].second.data);
  }
  std::remove(path.c_str());
}
