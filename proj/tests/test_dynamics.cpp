#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mixgame/dynamics.hpp"
#include "mixgame/strategy.hpp"
#include "mixgame/tracking.hpp"

using namespace mixgame;

namespace {

Trajectory straight_line(AgentState start, double v, int steps, double dt) {
  Trajectory t;
  t.dt = dt;
  AgentState s = start;
  for (int k = 0; k < steps; ++k) {
    s.x += dt * v * std::cos(s.psi);
    s.y += dt * v * std::sin(s.psi);
    s.v = v;
    t.states.push_back(s);
  }
  return t;
}

}  // namespace

TEST_CASE("unicycle step") {
  SECTION("straight-line motion") {
    AgentState s{0, 0, 0, 1};
    AgentState n = step(s, {0, 0}, 0.1);
    REQUIRE_THAT(n.x, Catch::Matchers::WithinAbs(0.1, 1e-12));
    REQUIRE(n.y == 0.0);
    REQUIRE(n.psi == 0.0);
    REQUIRE(n.v == 1.0);
  }
  SECTION("heading pi/2 moves along y") {
    AgentState s{0, 0, M_PI / 2, 1};
    AgentState n = step(s, {0, 0}, 0.1);
    REQUIRE_THAT(n.x, Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(n.y, Catch::Matchers::WithinAbs(0.1, 1e-12));
  }
  SECTION("velocity clamps at v_max") {
    AgentState s{0, 0, 0, 0.95};
    AgentState n = step(s, {0, 2.0}, 0.1);
    REQUIRE(n.v == 1.0);
  }
  SECTION("velocity clamps at v_min") {
    AgentState s{0, 0, 0, 0.55};
    AgentState n = step(s, {0, -2.0}, 0.1);
    REQUIRE(n.v == 0.5);
  }
  SECTION("non-finite input rejected") {
    AgentState s{std::nan(""), 0, 0, 1};
    REQUIRE_THROWS_AS(step(s, {0, 0}, 0.1), DynamicsError);
    REQUIRE_THROWS_AS(step(AgentState{0, 0, 0, 1}, {0, 0}, 0.0), DynamicsError);
  }
}

TEST_CASE("rollout") {
  SECTION("constant velocity covers v*t") {
    std::vector<Control> zeros(30);
    Trajectory t = rollout({0, 0, 0, 1}, zeros, 0.1);
    REQUIRE(t.length() == 31);
    REQUIRE_THAT(t.back().x, Catch::Matchers::WithinAbs(3.0, 1e-9));
  }
  SECTION("empty controls rejected") {
    REQUIRE_THROWS_AS(rollout({0, 0, 0, 1}, {}, 0.1), DynamicsError);
  }
  SECTION("constant omega accumulates heading") {
    std::vector<Control> u(30, Control{0.1, 0});
    Trajectory t = rollout({0, 0, 0, 1}, u, 0.1);
    REQUIRE_THAT(t.back().psi, Catch::Matchers::WithinAbs(0.3, 1e-9));
  }
  SECTION("semigroup: rollout over c1++c2 equals rollout c1 then c2") {
    std::vector<Control> c1 = {{0.2, 0.1}, {-0.3, 0.0}, {0.0, -0.2}};
    std::vector<Control> c2 = {{0.5, 0.3}, {0.1, -0.1}};
    std::vector<Control> cat = c1;
    cat.insert(cat.end(), c2.begin(), c2.end());
    Trajectory whole = rollout({0.3, -0.2, 0.4, 0.8}, cat, 0.1);
    Trajectory first = rollout({0.3, -0.2, 0.4, 0.8}, c1, 0.1);
    Trajectory second = rollout(first.back(), c2, 0.1);
    REQUIRE(whole.back().x == second.back().x);
    REQUIRE(whole.back().y == second.back().y);
    REQUIRE(whole.back().psi == second.back().psi);
    REQUIRE(whole.back().v == second.back().v);
  }
  SECTION("velocity stays within simulator bounds") {
    std::vector<Control> u(100);
    for (size_t i = 0; i < u.size(); ++i)
      u[i] = {std::sin(0.3 * i), std::cos(0.7 * i) * 2.0};
    Trajectory t = rollout({0, 0, 0, 0.7}, u, 0.1);
    for (const auto& s : t.states) {
      REQUIRE(s.v >= 0.5);
      REQUIRE(s.v <= 1.0);
    }
  }
}

TEST_CASE("strategy mean") {
  SECTION("single sample is its own mean") {
    Trajectory t = straight_line({0, 0, 0.3, 1}, 1.0, 10, 0.1);
    WeightedStrategy s = WeightedStrategy::uniform({t});
    Trajectory m = strategy_mean(s);
    REQUIRE(m.states[5].x == t.states[5].x);
    REQUIRE(m.states[5].psi == t.states[5].psi);
  }
  SECTION("mirrored arcs average to straight line") {
    std::vector<Control> left(20, Control{0.5, 0});
    std::vector<Control> right(20, Control{-0.5, 0});
    Trajectory tl = rollout({0, 0, 0, 1}, left, 0.1);
    Trajectory tr = rollout({0, 0, 0, 1}, right, 0.1);
    WeightedStrategy s = WeightedStrategy::uniform({tl, tr});
    Trajectory m = strategy_mean(s);
    for (const auto& st : m.states) {
      REQUIRE_THAT(st.y, Catch::Matchers::WithinAbs(0.0, 1e-12));
      REQUIRE_THAT(st.psi, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
  }
  SECTION("weights 0.75/0.25 over parallel lines") {
    Trajectory a = straight_line({0, 0, 0, 1}, 1.0, 10, 0.1);
    Trajectory b = straight_line({0, 1, 0, 1}, 1.0, 10, 0.1);
    WeightedStrategy s;
    s.samples = {a, b};
    s.weights = {0.75, 0.25};
    Trajectory m = strategy_mean(s);
    for (const auto& st : m.states)
      REQUIRE_THAT(st.y, Catch::Matchers::WithinAbs(0.25, 1e-12));
  }
}

TEST_CASE("track_mean") {
  const double dt = 0.1;
  SECTION("on-track strategy needs no control") {
    AgentState cur{0, 0, 0, 1};
    Trajectory ahead = straight_line({dt, 0, 0, 1}, 1.0, 30, dt);
    Control u = track_mean(WeightedStrategy::uniform({ahead}), cur, dt);
    REQUIRE(std::abs(u.omega) < 0.05);
    REQUIRE(std::abs(u.a) < 0.05);
  }
  SECTION("symmetric left/right arcs give near-zero turn") {
    std::vector<Control> left(30, Control{0.6, 0});
    std::vector<Control> right(30, Control{-0.6, 0});
    AgentState cur{0, 0, 0, 1};
    Trajectory tl = rollout(cur, left, dt);
    Trajectory tr = rollout(cur, right, dt);
    tl.states.erase(tl.states.begin());
    tr.states.erase(tr.states.begin());
    Control u = track_mean(WeightedStrategy::uniform({tl, tr}), cur, dt);
    REQUIRE(std::abs(u.omega) < 0.05);
  }
  SECTION("laterally offset mean turns toward it") {
    AgentState cur{0, 0, 0, 1};
    Trajectory off = straight_line({dt, 0.5, 0, 1}, 1.0, 30, dt);
    Control u = track_mean(WeightedStrategy::uniform({off}), cur, dt);
    REQUIRE(u.omega > 0.05);
  }
  SECTION("degenerate all-zero weights rejected") {
    Trajectory t = straight_line({0, 0, 0, 1}, 1.0, 10, dt);
    WeightedStrategy s;
    s.samples = {t};
    s.weights = {0.0};
    REQUIRE_THROWS_AS(track_mean(s, AgentState{0, 0, 0, 1}, dt), DynamicsError);
  }
  SECTION("frame equivariance under rigid rotation") {
    const double th = 0.83;
    auto rot = [&](AgentState s) {
      AgentState r;
      r.x = std::cos(th) * s.x - std::sin(th) * s.y;
      r.y = std::sin(th) * s.x + std::cos(th) * s.y;
      r.psi = wrap_angle(s.psi + th);
      r.v = s.v;
      return r;
    };
    AgentState cur{0, 0, 0, 1};
    std::vector<Control> arc(30, Control{0.4, 0.2});
    Trajectory t = rollout(cur, arc, dt);
    t.states.erase(t.states.begin());
    Control u0 = track_mean(WeightedStrategy::uniform({t}), cur, dt);
    Trajectory tr = t;
    for (auto& s : tr.states) s = rot(s);
    Control u1 = track_mean(WeightedStrategy::uniform({tr}), rot(cur), dt);
    REQUIRE_THAT(u1.omega, Catch::Matchers::WithinAbs(u0.omega, 1e-6));
    REQUIRE_THAT(u1.a, Catch::Matchers::WithinAbs(u0.a, 1e-6));
  }
}
