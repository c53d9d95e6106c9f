#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mixgame/brne.hpp"
#include "mixgame/rng.hpp"

using namespace mixgame;

namespace {

Trajectory line_at(double y, int steps = 5) {
  Trajectory t;
  t.dt = 0.1;
  for (int k = 0; k < steps; ++k) t.states.push_back({0.1 * k, y, 0, 1});
  return t;
}

std::vector<WeightedStrategy> random_instance(Rng& rng, int n_agents, int K) {
  std::vector<WeightedStrategy> s(n_agents);
  for (int i = 0; i < n_agents; ++i) {
    std::vector<Trajectory> samples;
    for (int k = 0; k < K; ++k) samples.push_back(line_at(rng.normal()));
    s[i] = WeightedStrategy::uniform(samples);
  }
  return s;
}

double objective(const Eigen::VectorXd& h, const std::vector<double>& w) {
  double val = 0.0;
  const double K = static_cast<double>(w.size());
  for (size_t k = 0; k < w.size(); ++k) {
    val += w[k] * h(k);
    if (w[k] > 0.0) val += w[k] * std::log(w[k] * K);
  }
  return val;
}

}  // namespace

TEST_CASE("pair_cost_matrix") {
  std::vector<Trajectory> A = {line_at(0.0), line_at(1.0)};
  std::vector<Trajectory> B = {line_at(2.0), line_at(3.0), line_at(4.0)};

  SECTION("zero cost gives zero matrix") {
    auto M = pair_cost_matrix([](const Trajectory&, const Trajectory&) { return 0.0; },
                              A, B);
    REQUIRE(M.rows() == 2);
    REQUIRE(M.cols() == 3);
    REQUIRE(M.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("1x1 matrix is the single evaluation") {
    std::vector<Trajectory> a1 = {line_at(0.5)}, b1 = {line_at(2.5)};
    auto cost = [](const Trajectory& a, const Trajectory& b) {
      return a.states[0].y + 10 * b.states[0].y;
    };
    auto M = pair_cost_matrix(cost, a1, b1);
    REQUIRE(M(0, 0) == cost(a1[0], b1[0]));
  }
  SECTION("symmetric cost gives transposed matrices") {
    auto cost = [](const Trajectory& a, const Trajectory& b) {
      return std::abs(a.states[0].y - b.states[0].y);
    };
    auto Mab = pair_cost_matrix(cost, A, B);
    auto Mba = pair_cost_matrix(cost, B, A);
    REQUIRE((Mab - Mba.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("empty input rejected") {
    REQUIRE_THROWS_AS(
        pair_cost_matrix([](const Trajectory&, const Trajectory&) { return 0.0; }, {},
                         B),
        DynamicsError);
  }
}

TEST_CASE("kl_to_nominal") {
  WeightedStrategy s = WeightedStrategy::uniform({line_at(0), line_at(1)});
  REQUIRE(kl_to_nominal(s) == 0.0);

  s.weights = {1.0, 0.0};
  REQUIRE_THAT(kl_to_nominal(s), Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w = {rng.uniform(), rng.uniform(), rng.uniform()};
    double z = w[0] + w[1] + w[2];
    for (auto& x : w) x /= z;
    WeightedStrategy t;
    t.samples = {line_at(0), line_at(1), line_at(2)};
    t.weights = w;
    REQUIRE(kl_to_nominal(t) >= 0.0);
  }
}

TEST_CASE("expected_joint_cost matches brute force") {
  Rng rng(17);
  auto strategies = random_instance(rng, 3, 4);
  // perturb the weights away from uniform
  for (auto& s : strategies) {
    double z = 0.0;
    for (auto& w : s.weights) {
      w = rng.uniform(0.1, 1.0);
      z += w;
    }
    for (auto& w : s.weights) w /= z;
  }
  auto cost = [](const Trajectory& a, const Trajectory& b) {
    return std::sin(a.states[0].y) * std::cos(b.states[0].y) +
           0.3 * a.states[0].y * b.states[0].y;
  };
  double brute = 0.0;
  for (size_t i = 0; i < strategies.size(); ++i)
    for (size_t j = i + 1; j < strategies.size(); ++j)
      for (size_t k = 0; k < strategies[i].samples.size(); ++k)
        for (size_t kp = 0; kp < strategies[j].samples.size(); ++kp)
          brute += strategies[i].weights[k] * strategies[j].weights[kp] *
                   cost(strategies[i].samples[k], strategies[j].samples[kp]);
  REQUIRE_THAT(expected_joint_cost(strategies, cost),
               Catch::Matchers::WithinAbs(brute, 1e-12));

  REQUIRE(expected_joint_cost(
              strategies, [](const Trajectory&, const Trajectory&) { return 0.0; }) ==
          0.0);
}

TEST_CASE("brne_update basics") {
  SECTION("zero cost keeps weights uniform, one sweep") {
    Rng rng(5);
    auto strategies = random_instance(rng, 3, 5);
    SolveReport rep = brne_update(
        strategies, [](const Trajectory&, const Trajectory&) { return 0.0; });
    REQUIRE(rep.converged);
    REQUIRE(rep.iterations == 1);
    REQUIRE(rep.expected_cost_trace.size() == static_cast<size_t>(rep.iterations) + 1);
    for (const auto& s : strategies)
      for (double w : s.weights) REQUIRE(w == 0.2);
  }
  SECTION("hand-checked two-agent instance") {
    std::vector<WeightedStrategy> strategies = {
        WeightedStrategy::uniform({line_at(0), line_at(1)}),
        WeightedStrategy::uniform({line_at(10), line_at(11)})};
    // agent-1 rows against agent 2: [0,0] and [1,1]; symmetric for agent 2
    auto cost = [](const Trajectory& a, const Trajectory& b) {
      const double ya = a.states[0].y, yb = b.states[0].y;
      if (ya < 5)  // a belongs to agent 1
        return ya < 0.5 ? 0.0 : 1.0;
      return yb < 0.5 ? 0.0 : 1.0;  // transposed orientation
    };
    SolveReport rep = brne_update(strategies, cost);
    REQUIRE(rep.converged);
    REQUIRE_THAT(strategies[0].weights[0], Catch::Matchers::WithinAbs(0.7311, 1e-4));
    REQUIRE_THAT(strategies[0].weights[1], Catch::Matchers::WithinAbs(0.2689, 1e-4));
  }
  SECTION("symmetric instance ends symmetric") {
    Rng rng(29);
    std::vector<Trajectory> shared;
    for (int k = 0; k < 4; ++k) shared.push_back(line_at(rng.normal()));
    std::vector<WeightedStrategy> strategies = {WeightedStrategy::uniform(shared),
                                                WeightedStrategy::uniform(shared)};
    auto cost = [](const Trajectory& a, const Trajectory& b) {
      return std::abs(a.states[0].y - b.states[0].y) +
             0.5 * a.states[0].y * a.states[0].y + 0.5 * b.states[0].y * b.states[0].y;
    };
    SolveReport rep = brne_update(strategies, cost);
    REQUIRE(rep.converged);
    for (size_t k = 0; k < 4; ++k)
      REQUIRE_THAT(strategies[0].weights[k],
                   Catch::Matchers::WithinAbs(strategies[1].weights[k], 1e-3));
  }
  SECTION("weights stay normalized and non-negative") {
    Rng rng(31);
    auto strategies = random_instance(rng, 4, 6);
    auto cost = [](const Trajectory& a, const Trajectory& b) {
      return 3.0 * std::sin(5 * a.states[0].y + 2 * b.states[0].y);
    };
    brne_update(strategies, cost);
    for (const auto& s : strategies) {
      double sum = 0.0;
      for (double w : s.weights) {
        REQUIRE(w >= 0.0);
        sum += w;
      }
      REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
    }
  }
  SECTION("huge costs do not underflow to all-zero weights") {
    std::vector<WeightedStrategy> strategies = {
        WeightedStrategy::uniform({line_at(0), line_at(1)}),
        WeightedStrategy::uniform({line_at(10), line_at(11)})};
    auto cost = [](const Trajectory& a, const Trajectory& b) {
      (void)b;
      return a.states[0].y < 5 ? 5000.0 * a.states[0].y : 0.0;
    };
    brne_update(strategies, cost);
    double sum = strategies[0].weights[0] + strategies[0].weights[1];
    REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
    REQUIRE(strategies[0].weights[0] > 0.999);
  }
}

// Replays the sequential update with an independently coded oracle, checking
//(a) the per-agent objective w.h + KL never increases across that agent's own
// update given the opponents' weights at update time, and (b) the oracle's
// final weights match the library solver bit-for-bit semantics (1e-12).
TEST_CASE("descent property over random instances") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 3);   // 2..4 agents
    const int K = 2 + static_cast<int>(rng.uniform() * 4);   // 2..5 samples
    auto strategies = random_instance(rng, n, K);
    const double amp = std::exp(rng.uniform(-1.0, 2.0));
    auto cost = [amp](const Trajectory& a, const Trajectory& b) {
      return amp * (std::sin(3 * a.states[0].y) * std::cos(2 * b.states[0].y) +
                    0.2 * a.states[0].y * b.states[0].y);
    };

    // oracle replay
    std::vector<std::vector<double>> w(n, std::vector<double>(K, 1.0 / K));
    std::map<std::pair<int, int>, Eigen::MatrixXd> M;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        M[{i, j}] =
            pair_cost_matrix(cost, strategies[i].samples, strategies[j].samples);

    for (int sweep = 0; sweep < 100; ++sweep) {
      double max_tv = 0.0;
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd h = Eigen::VectorXd::Zero(K);
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          Eigen::Map<Eigen::VectorXd> vj(w[j].data(), K);
          h += j > i ? Eigen::VectorXd(M[{i, j}] * vj)
                     : Eigen::VectorXd(M[{j, i}].transpose() * vj);
        }
        const double before = objective(h, w[i]);
        const double lo = h.minCoeff();
        std::vector<double> nw(K);
        double z = 0.0;
        for (int k = 0; k < K; ++k) {
          nw[k] = std::exp(-(h(k) - lo));
          z += nw[k];
        }
        for (auto& x : nw) x /= z;
        const double after = objective(h, nw);
        REQUIRE(after <= before + 1e-9);
        double tv = 0.0;
        for (int k = 0; k < K; ++k) tv += std::abs(nw[k] - w[i][k]);
        max_tv = std::max(max_tv, 0.5 * tv);
        w[i] = nw;
      }
      if (max_tv < 1e-4) break;
    }

    auto lib = strategies;
    brne_update(lib, cost);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k)
        REQUIRE_THAT(lib[i].weights[k], Catch::Matchers::WithinAbs(w[i][k], 1e-12));
  }
}

TEST_CASE("constant cost shift leaves weights unchanged") {
  // Integer costs, K a power of two, single sweep: every intermediate is exact
  // in binary floating point, so the invariance is bitwise.
  std::vector<WeightedStrategy> strategies = {
      WeightedStrategy::uniform({line_at(0), line_at(1), line_at(2), line_at(3)}),
      WeightedStrategy::uniform({line_at(10), line_at(11), line_at(12), line_at(13)})};
  auto base = [](const Trajectory& a, const Trajectory& b) {
    return std::floor(a.states[0].y) + 2.0 * std::floor(b.states[0].y - 9.0);
  };
  for (double c : {0.0, 5.0, -3.0, 1024.0}) {
    auto shifted = [&](const Trajectory& a, const Trajectory& b) {
      return base(a, b) + c;
    };
    auto s0 = strategies;
    brne_update(s0, base, 1, 0.0);
    auto s1 = strategies;
    brne_update(s1, shifted, 1, 0.0);
    // Agent 1 updates against exact uniform weights: bitwise invariance.
    REQUIRE(s0[0].weights == s1[0].weights);
    // Agent 2 updates against agent 1's already-irrational weights, where the
    // shift is absorbed only up to rounding.
    for (int k = 0; k < 4; ++k)
      REQUIRE_THAT(s0[1].weights[k],
                   Catch::Matchers::WithinAbs(s1[1].weights[k], 1e-12));
  }
  // Converged solves agree to near machine precision.
  auto s0 = strategies;
  brne_update(s0, base);
  auto s1 = strategies;
  brne_update(s1, [&](const Trajectory& a, const Trajectory& b) {
    return base(a, b) + 7.25;
  });
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 4; ++k)
      REQUIRE_THAT(s0[i].weights[k],
                   Catch::Matchers::WithinAbs(s1[i].weights[k], 1e-13));
}

TEST_CASE("unrolled tape solve matches the plain solver") {
  Rng rng(47);
  const int n = 3, K = 4;
  auto strategies = random_instance(rng, n, K);
  auto cost = [](const Trajectory& a, const Trajectory& b) {
    return std::sin(2 * a.states[0].y) + std::cos(3 * b.states[0].y) +
           0.4 * a.states[0].y * b.states[0].y;
  };
  const int sweeps = 3;
  auto plain = strategies;
  brne_update(plain, cost, sweeps, 0.0);

  Tape tape;
  std::map<std::pair<int, int>, Tape::NodeId> M;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Eigen::MatrixXd mat =
          pair_cost_matrix(cost, strategies[i].samples, strategies[j].samples);
      Tensor t = Tensor::zeros({K, K});
      for (int r = 0; r < K; ++r)
        for (int cidx = 0; cidx < K; ++cidx) t.data[r * K + cidx] = mat(r, cidx);
      M[{i, j}] = tape.constant(std::move(t));
    }
  auto w = brne_unrolled(tape, std::vector<int>(n, K), M, sweeps);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k)
      REQUIRE_THAT(tape.value(w[i]).at(k),
                   Catch::Matchers::WithinAbs(plain[i].weights[k], 1e-12));
}

TEST_CASE("unrolled solve gradients match finite differences") {
  Rng rng(53);
  const int K = 4, sweeps = 3;
  Tensor M0 = Tensor::zeros({K, K});
  for (auto& v : M0.data) v = rng.normal();

  auto eval = [&](const Tensor& Mt, Tensor* grad) {
    Tape tape;
    auto Mp = tape.param(Mt);
    std::map<std::pair<int, int>, Tape::NodeId> M{{{0, 1}, Mp}};
    auto w = brne_unrolled(tape, {K, K}, M, sweeps);
    auto loss = tape.add(tape.sum(tape.square(w[0])), tape.sum(tape.square(w[1])));
    const double val = tape.value(loss).at(0);
    if (grad) {
      tape.backward(loss);
      *grad = tape.grad(Mp);
    }
    return val;
  };

  Tensor analytic;
  eval(M0, &analytic);
  const double h = 1e-5;
  for (long e = 0; e < M0.size(); ++e) {
    Tensor p = M0;
    p.data[e] += h;
    const double up = eval(p, nullptr);
    p.data[e] -= 2 * h;
    const double dn = eval(p, nullptr);
    const double fd = (up - dn) / (2 * h);
    INFO("entry " << e << " fd=" << fd << " analytic=" << analytic.data[e]);
    REQUIRE(std::abs(fd - analytic.data[e]) /
                (std::abs(fd) + std::abs(analytic.data[e]) + 1e-8) <=
            1e-4);
  }
}
