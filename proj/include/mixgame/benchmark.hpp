#ifndef MIXGAME_BENCHMARK_HPP
#define MIXGAME_BENCHMARK_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mixgame/brne.hpp"
#include "mixgame/cvae.hpp"
#include "mixgame/dataset.hpp"
#include "mixgame/inverse.hpp"
#include "mixgame/lqgame.hpp"
#include "mixgame/rng.hpp"
#include "mixgame/tracking.hpp"

namespace mixgame {

struct BenchmarkError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  int n_agents = 5;
  double circle_radius = 4.0;
  double dt = 0.1;
  int episode_max_steps = 300;
  double lambda_min = 0.1;
  double lambda_max = 0.9;
  double min_separation_deg = 15.0;
  double preferred_speed = 1.0;
  int horizon = 30;
  double social_distance = 0.7;
  double goal_tolerance = 0.2;
  GameWeights weights;
  Limits limits;
};

struct Scenario {
  ScenarioConfig cfg;
  std::vector<AgentSpec> specs;
};

// Agents uniformly on the circle (rejection-sampled for angular separation),
// goals antipodal, headings toward goal, initial speed at the preferred speed.
inline Scenario generate_scenario(const ScenarioConfig& cfg, Rng& rng) {
  const double min_sep = cfg.min_separation_deg * M_PI / 180.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> ang(cfg.n_agents);
    for (auto& a : ang) a = rng.uniform(-M_PI, M_PI);
    bool ok = true;
    for (size_t i = 0; i < ang.size() && ok; ++i)
      for (size_t j = i + 1; j < ang.size() && ok; ++j)
        if (std::abs(wrap_angle(ang[i] - ang[j])) < min_sep) ok = false;
    if (!ok) continue;

    Scenario s;
    s.cfg = cfg;
    for (double a : ang) {
      AgentSpec spec;
      const double px = cfg.circle_radius * std::cos(a);
      const double py = cfg.circle_radius * std::sin(a);
      spec.goal = {-px, -py};
      spec.lambda = rng.uniform(cfg.lambda_min, cfg.lambda_max);
      spec.preferred_speed = cfg.preferred_speed;
      spec.initial = {px, py, std::atan2(spec.goal[1] - py, spec.goal[0] - px),
                      clamp(cfg.preferred_speed, cfg.limits.v_min, cfg.limits.v_max)};
      s.specs.push_back(spec);
    }
    return s;
  }
  throw BenchmarkError("generate_scenario: could not place agents with the "
                       "required angular separation after 1000 tries");
}

enum class Policy { kGt, kOracle, kBlind, kCvaeOnly, kOurs };

inline const char* policy_name(Policy p) {
  switch (p) {
    case Policy::kGt: return "gt";
    case Policy::kOracle: return "oracle";
    case Policy::kBlind: return "blind";
    case Policy::kCvaeOnly: return "cvae";
    case Policy::kOurs: return "ours";
  }
  return "?";
}

inline Policy parse_policy(const std::string& s) {
  if (s == "gt") return Policy::kGt;
  if (s == "oracle") return Policy::kOracle;
  if (s == "blind") return Policy::kBlind;
  if (s == "cvae" || s == "cvae-only") return Policy::kCvaeOnly;
  if (s == "ours") return Policy::kOurs;
  throw BenchmarkError("unknown policy: " + s);
}

struct EpisodeRecord {
  std::vector<AgentSpec> specs;
  double dt = 0.1;
  double noise_sigma = 0.0;
  double social_distance = 0.7;
  GameWeights weights;
  int robot = 0;
  std::vector<std::vector<AgentState>> states;        // clean, [step][agent]
  std::vector<std::vector<AgentState>> noisy_states;  // observations, same shape
  std::vector<double> plan_times;  // robot planning wall time, seconds
  int solver_warnings = 0;
  bool aborted = false;
};

struct Metrics {
  double robot_runtime_cost = 0.0;
  double min_distance = 0.0;
  bool collided = false;
  double mean_plan_time = 0.0;
};

// Gaussian position noise; heading and speed recomputed from the noisy
// positions by finite differences rather than copied from the clean states.
inline std::vector<AgentState> add_noise(const std::vector<AgentState>& states,
                                         double sigma, double dt, Rng& rng) {
  if (sigma == 0.0) return states;
  std::vector<AgentState> noisy = states;
  for (auto& s : noisy) {
    s.x += sigma * rng.normal();
    s.y += sigma * rng.normal();
  }
  for (size_t k = 1; k < noisy.size(); ++k) {
    const double dx = noisy[k].x - noisy[k - 1].x;
    const double dy = noisy[k].y - noisy[k - 1].y;
    const double d = std::hypot(dx, dy);
    noisy[k].psi = d > 1e-12 ? std::atan2(dy, dx) : noisy[k - 1].psi;
    noisy[k].v = d / dt;
  }
  if (noisy.size() > 1) {
    noisy[0].psi = noisy[1].psi;
    noisy[0].v = noisy[1].v;
  }
  return noisy;
}

struct PlannerConfig {
  int K = 200;                    // nominal samples per agent
  double waypoint_distance = 3.0; // robot task waypoint distance along the goal ray
  int max_sweeps = 100;
  double tol = 1e-4;
};

// Last tau2 observed states, front-padded by repeating the first observation.
inline ConditioningContext make_context(const std::vector<AgentState>& history,
                                        int tau2, std::array<double, 2> beta) {
  if (history.empty()) throw BenchmarkError("make_context: empty history");
  ConditioningContext ctx;
  ctx.beta = beta;
  const int T = static_cast<int>(history.size());
  for (int k = 0; k < tau2; ++k) {
    const int idx = std::max(0, T - tau2 + k);
    ctx.past.push_back(history[idx]);
  }
  return ctx;
}

struct PlanResult {
  Control u;
  WeightedStrategy robot_strategy;
  SolveReport report;
};

// The sampling-based robot planner: nominal strategies from the generative
// model for every active agent, equilibrium reweighting under the learned
// pairwise cost (skipped when no cost net is supplied), then mean tracking.
inline PlanResult plan_robot(const CvaeModel& cvae, const CostNet* net,
                             const std::vector<std::vector<AgentState>>& histories,
                             const std::vector<const AgentSpec*>& specs, int robot,
                             const AgentState& robot_state, const ScenarioConfig& cfg,
                             const PlannerConfig& pc, Rng& rng) {
  const int n = static_cast<int>(histories.size());
  if (n == 0 || robot < 0 || robot >= n) throw BenchmarkError("plan_robot: bad robot index");

  std::vector<WeightedStrategy> strategies;
  strategies.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::array<double, 2> beta = specs[i]->goal;
    if (i == robot) {
      const AgentState& cur = histories[i].back();
      const double gx = specs[i]->goal[0] - cur.x;
      const double gy = specs[i]->goal[1] - cur.y;
      const double d = std::hypot(gx, gy);
      if (d > 1e-9) {
        const double step_len = std::min(pc.waypoint_distance, d);
        beta = {cur.x + step_len * gx / d, cur.y + step_len * gy / d};
      }
    }
    auto ctx = make_context(histories[i], cvae.cfg.tau2, beta);
    strategies.push_back(
        WeightedStrategy::uniform(sample_nominal(cvae, ctx, pc.K, rng)));
  }

  PlanResult out;
  if (net) {
    std::map<std::pair<int, int>, Eigen::MatrixXd> M;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        M[{i, j}] = net->pair_cost_matrix(strategies[i].samples, strategies[j].samples);
    out.report = brne_update(strategies, M, pc.max_sweeps, pc.tol);
  }
  out.robot_strategy = strategies[robot];
  out.u = track_mean(out.robot_strategy, robot_state, cfg.dt, cfg.limits);
  return out;
}

namespace detail {

inline LqGameProblem make_problem(const Scenario& scen,
                                  const std::vector<const AgentSpec*>& specs) {
  LqGameProblem p;
  p.horizon = scen.cfg.horizon;
  p.dt = scen.cfg.dt;
  p.social_distance = scen.cfg.social_distance;
  p.weights = scen.cfg.weights;
  p.limits = scen.cfg.limits;
  for (const auto* s : specs) p.specs.push_back(*s);
  return p;
}

}  // namespace detail

// Closed-loop episode: the game agents always play the true game (with the
// robot's assumed cost included); the robot follows the requested policy on
// its noisy observation history. Agents within goal tolerance freeze in place
// and drop out of the game.
inline EpisodeRecord run_episode(Policy policy, const Scenario& scen,
                                 double noise_sigma, Rng& rng,
                                 const CvaeModel* cvae = nullptr,
                                 const CostNet* net = nullptr,
                                 const PlannerConfig& pc = PlannerConfig{}) {
  using Clock = std::chrono::steady_clock;
  const ScenarioConfig& cfg = scen.cfg;
  const int n = static_cast<int>(scen.specs.size());
  const int robot = 0;
  if ((policy == Policy::kCvaeOnly || policy == Policy::kOurs) && !cvae)
    throw BenchmarkError("run_episode: policy requires a generative model");
  if (policy == Policy::kOurs && !net)
    throw BenchmarkError("run_episode: policy requires a cost net");

  EpisodeRecord rec;
  rec.specs = scen.specs;
  rec.dt = cfg.dt;
  rec.noise_sigma = noise_sigma;
  rec.social_distance = cfg.social_distance;
  rec.weights = cfg.weights;
  rec.robot = robot;

  std::vector<AgentState> cur(n);
  for (int i = 0; i < n; ++i) cur[i] = scen.specs[i].initial;
  rec.states.push_back(cur);

  auto observe = [&](const std::vector<AgentState>& clean) {
    std::vector<AgentState> obs = clean;
    if (noise_sigma > 0.0) {
      for (int i = 0; i < n; ++i) {
        obs[i].x += noise_sigma * rng.normal();
        obs[i].y += noise_sigma * rng.normal();
      }
      if (!rec.noisy_states.empty()) {
        const auto& prev = rec.noisy_states.back();
        for (int i = 0; i < n; ++i) {
          const double dx = obs[i].x - prev[i].x;
          const double dy = obs[i].y - prev[i].y;
          const double d = std::hypot(dx, dy);
          obs[i].psi = d > 1e-12 ? std::atan2(dy, dx) : prev[i].psi;
          obs[i].v = d / cfg.dt;
        }
      }
    }
    rec.noisy_states.push_back(std::move(obs));
  };
  observe(cur);

  std::vector<bool> frozen(n, false);
  MpcState env_warm, robot_warm;
  std::vector<int> prev_active;

  for (int t = 0; t < cfg.episode_max_steps; ++t) {
    for (int i = 0; i < n; ++i) {
      if (frozen[i]) continue;
      if (std::hypot(cur[i].x - scen.specs[i].goal[0],
                     cur[i].y - scen.specs[i].goal[1]) <= cfg.goal_tolerance) {
        frozen[i] = true;
        cur[i].v = 0.0;
      }
    }
    std::vector<int> active;
    for (int i = 0; i < n; ++i)
      if (!frozen[i]) active.push_back(i);
    if (active.empty()) break;
    if (active != prev_active) {
      env_warm.prev_controls.clear();
      robot_warm.prev_controls.clear();
      prev_active = active;
    }

    std::vector<Control> controls(n);
    const bool robot_in_game = !frozen[robot];
    const bool need_env_solve =
        policy == Policy::kGt ||
        std::any_of(active.begin(), active.end(), [&](int i) { return i != robot; });

    try {
      if (need_env_solve) {
        std::vector<const AgentSpec*> specs;
        std::vector<AgentState> states;
        for (int i : active) {
          specs.push_back(&scen.specs[i]);
          states.push_back(cur[i]);
        }
        const auto t0 = Clock::now();
        bool conv = true;
        auto us = mpc_step(detail::make_problem(scen, specs), states, &env_warm, &conv);
        const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
        if (!conv) ++rec.solver_warnings;
        for (size_t a = 0; a < active.size(); ++a) {
          if (active[a] != robot) controls[active[a]] = us[a];
          if (active[a] == robot && policy == Policy::kGt) {
            controls[robot] = us[a];
            rec.plan_times.push_back(elapsed);
          }
        }
      }

      if (robot_in_game && policy != Policy::kGt) {
        const auto& obs = rec.noisy_states.back();
        const auto t0 = Clock::now();
        switch (policy) {
          case Policy::kOracle: {
            // One cost-parameter draw per agent per replan from the training
            // prior; the robot knows its own true cost.
            std::vector<AgentSpec> assumed;
            std::vector<AgentState> states;
            for (int i : active) {
              AgentSpec s = scen.specs[i];
              if (i != robot) s.lambda = rng.uniform(cfg.lambda_min, cfg.lambda_max);
              assumed.push_back(s);
              states.push_back(obs[i]);
            }
            std::vector<const AgentSpec*> ptrs;
            for (const auto& s : assumed) ptrs.push_back(&s);
            bool conv = true;
            auto us = mpc_step(detail::make_problem(scen, ptrs), states, &robot_warm, &conv);
            if (!conv) ++rec.solver_warnings;
            for (size_t a = 0; a < active.size(); ++a)
              if (active[a] == robot) controls[robot] = us[a];
            break;
          }
          case Policy::kBlind: {
            // Pure navigation: single-agent solve with the safety term off.
            AgentSpec s = scen.specs[robot];
            s.lambda = 1.0;
            bool conv = true;
            auto us = mpc_step(detail::make_problem(scen, {&s}), {obs[robot]},
                               &robot_warm, &conv);
            if (!conv) ++rec.solver_warnings;
            controls[robot] = us[0];
            break;
          }
          case Policy::kCvaeOnly:
          case Policy::kOurs: {
            std::vector<std::vector<AgentState>> histories(active.size());
            std::vector<const AgentSpec*> specs;
            int robot_pos = 0;
            for (size_t a = 0; a < active.size(); ++a) {
              if (active[a] == robot) robot_pos = static_cast<int>(a);
              specs.push_back(&scen.specs[active[a]]);
              const int from = std::max(
                  0, static_cast<int>(rec.noisy_states.size()) - (cvae->cfg.tau2 + 1));
              for (size_t k = from; k < rec.noisy_states.size(); ++k)
                histories[a].push_back(rec.noisy_states[k][active[a]]);
            }
            auto plan = plan_robot(*cvae, policy == Policy::kOurs ? net : nullptr,
                                   histories, specs, robot_pos, cur[robot], cfg, pc, rng);
            controls[robot] = plan.u;
            break;
          }
          default:
            break;
        }
        rec.plan_times.push_back(
            std::chrono::duration<double>(Clock::now() - t0).count());
      }

      std::vector<AgentState> next = cur;
      for (int i : active)
        next[i] = step(cur[i], clamp_control(controls[i], cfg.limits), cfg.dt, cfg.limits);
      for (const auto& s : next)
        if (!s.finite()) throw DynamicsError("non-finite state");
      cur = std::move(next);
    } catch (const std::runtime_error&) {
      rec.aborted = true;
      break;
    }
    rec.states.push_back(cur);
    observe(cur);
  }
  return rec;
}

inline Metrics compute_metrics(const EpisodeRecord& rec, double collision_threshold) {
  const int n = static_cast<int>(rec.specs.size());
  Metrics m;
  m.min_distance = std::numeric_limits<double>::infinity();
  for (const auto& xs : rec.states)
    for (int j = 0; j < n; ++j)
      if (j != rec.robot) m.min_distance = std::min(m.min_distance, dist(xs[rec.robot], xs[j]));
  m.collided = m.min_distance < collision_threshold;

  // Runtime cost the game agents assume for the robot: one-step goal-directed
  // reference from the previous state, evaluated at the realized state.
  const AgentSpec& spec = rec.specs[rec.robot];
  double total = 0.0;
  int count = 0;
  for (size_t k = 1; k < rec.states.size(); ++k) {
    const AgentState ref =
        reference_trajectory(spec, rec.states[k - 1][rec.robot], 1, rec.dt).states[1];
    total += combined_cost(rec.states[k], rec.robot, ref, spec.lambda,
                           rec.social_distance, rec.weights);
    ++count;
  }
  m.robot_runtime_cost = count ? total / count : 0.0;

  if (!rec.plan_times.empty()) {
    for (double t : rec.plan_times) m.mean_plan_time += t;
    m.mean_plan_time /= rec.plan_times.size();
  }
  return m;
}

// Collision threshold: the smallest inter-agent distance observed anywhere in
// a set of all-game-agent calibration episodes.
inline double calibrate_collision_threshold(const ScenarioConfig& cfg, int episodes,
                                            Rng& rng) {
  double lo = std::numeric_limits<double>::infinity();
  for (int e = 0; e < episodes; ++e) {
    Scenario scen = generate_scenario(cfg, rng);
    EpisodeRecord rec = run_episode(Policy::kGt, scen, 0.0, rng);
    const int n = static_cast<int>(rec.specs.size());
    for (const auto& xs : rec.states)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) lo = std::min(lo, dist(xs[i], xs[j]));
  }
  if (!std::isfinite(lo)) throw BenchmarkError("calibration produced no distances");
  return lo;
}

// Demonstration data: every agent game-controlled, clean states recorded.
inline std::vector<TrialRecord> collect_dataset(int n_trials, const ScenarioConfig& cfg,
                                                Rng& rng) {
  std::vector<TrialRecord> trials;
  for (int t = 0; t < n_trials; ++t) {
    const std::uint64_t seed = rng.next_u64();
    Rng er(seed);
    Scenario scen = generate_scenario(cfg, er);
    EpisodeRecord rec = run_episode(Policy::kGt, scen, 0.0, er);
    TrialRecord trial;
    trial.trial_id = t;
    trial.seed = seed;
    trial.dt = cfg.dt;
    for (size_t i = 0; i < rec.specs.size(); ++i) {
      TrialAgent a;
      a.goal = rec.specs[i].goal;
      a.lambda = rec.specs[i].lambda;
      for (const auto& xs : rec.states) a.states.push_back(xs[i]);
      trial.agents.push_back(std::move(a));
    }
    trials.push_back(std::move(trial));
  }
  return trials;
}

// Linear-interpolation quantile of an unsorted sample.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw BenchmarkError("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - lo;
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

}  // namespace mixgame

#endif  // MIXGAME_BENCHMARK_HPP
