#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixgame/benchmark.hpp"
#include "mixgame/cvae.hpp"
#include "mixgame/inverse.hpp"

using namespace mixgame;
using nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int log_level() {
  static int level = [] {
    const char* env = std::getenv("MIXGAME_LOG");
    if (!env) return 1;
    const std::string v = env;
    if (v == "error") return 0;
    if (v == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[info] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::fprintf(stderr, "[debug] %s\n", msg.c_str());
}

std::string fmt(double v) {
  std::string s;
  detail::put_real(s, v);
  return s;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Every run records its fully resolved parameters next to the outputs.
void write_sidecar(const std::string& out_path, const ordered_json& cfg) {
  write_text(out_path + ".config.json", cfg.dump(2) + "\n");
}

ordered_json load_config_file(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) path = argv[i + 1];
    if (a.rfind("--config=", 0) == 0) path = a.substr(9);
  }
  if (path.empty()) return ordered_json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config parse error: ") + e.what());
  }
}

template <typename T>
void from_config(const ordered_json& cfg, const char* key, T& value) {
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  Rng r(base ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL));
  return r.next_u64();
}

// ---------------------------------------------------------------------------
// generate-data
// ---------------------------------------------------------------------------

int cmd_generate_data(const ordered_json& file_cfg, int trials, std::uint64_t seed,
                      const std::string& out, int agents) {
  ordered_json resolved{{"command", "generate-data"},
                        {"trials", trials},
                        {"seed", seed},
                        {"out", out},
                        {"agents", agents}};
  (void)file_cfg;
  ScenarioConfig cfg;
  cfg.n_agents = agents;
  Rng rng(seed);
  log_info("collecting " + std::to_string(trials) + " trials");
  auto data = collect_dataset(trials, cfg, rng);
  save_dataset(out, data);
  write_sidecar(out, resolved);

  std::size_t lo = SIZE_MAX, hi = 0, total = 0;
  for (const auto& t : data) {
    const std::size_t len = t.agents.front().states.size();
    lo = std::min(lo, len);
    hi = std::max(hi, len);
    total += len;
  }
  std::printf("trials=%d mean_length=%.1f min_length=%zu max_length=%zu\n", trials,
              static_cast<double>(total) / trials, lo, hi);
  return 0;
}

// ---------------------------------------------------------------------------
// train-nominal
// ---------------------------------------------------------------------------

int cmd_train_nominal(const std::string& data, const std::string& out, int epochs,
                      int batch, double lr, std::uint64_t seed, double noise_sigma,
                      int tau1, int tau2, int hidden, int latent) {
  ordered_json resolved{{"command", "train-nominal"}, {"data", data},
                        {"out", out},                 {"epochs", epochs},
                        {"batch", batch},             {"lr", lr},
                        {"seed", seed},               {"noise_sigma", noise_sigma},
                        {"tau1", tau1},               {"tau2", tau2},
                        {"hidden", hidden},           {"latent", latent}};
  std::vector<TrialRecord> trials;
  try {
    trials = load_dataset(data);
  } catch (const DatasetError& e) {
    throw UsageError(e.what());
  }
  if (trials.empty()) throw UsageError("dataset is empty: " + data);

  CvaeConfig cfg;
  cfg.tau1 = tau1;
  cfg.tau2 = tau2;
  cfg.hidden = hidden;
  cfg.latent = latent;
  cfg.dt = trials.front().dt;

  auto windows = cvae_windows(trials, cfg);
  log_info(std::to_string(windows.size()) + " training windows");
  Rng rng(seed);
  if (noise_sigma > 0.0) {
    // noisy-conditioning variant: perturb past observations, keep clean targets
    for (auto& w : windows) w.ctx.past = add_noise(w.ctx.past, noise_sigma, cfg.dt, rng);
  }

  CvaeModel model = CvaeModel::init(cfg, rng);
  std::string curve = "epoch,loss\n";
  auto report = train_cvae(model, windows, epochs, batch, lr, rng,
                           [&](int epoch, double loss) {
                             curve += std::to_string(epoch) + "," + fmt(loss) + "\n";
                             log_info("epoch " + std::to_string(epoch) +
                                      " loss " + fmt(loss));
                           });
  model.save(out);
  write_text(out + ".loss.csv", curve);
  write_sidecar(out, resolved);
  std::printf("final_loss=%s checkpoint=%s\n", fmt(report.epoch_loss.back()).c_str(),
              out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train-cost
// ---------------------------------------------------------------------------

int cmd_train_cost(const std::string& data, const std::string& cvae_path,
                   const std::string& out, int epochs, int batch, double lr, int K,
                   int sweeps, std::uint64_t seed, double holdout, int hidden) {
  ordered_json resolved{{"command", "train-cost"}, {"data", data},
                        {"cvae", cvae_path},       {"out", out},
                        {"epochs", epochs},        {"batch", batch},
                        {"lr", lr},                {"K", K},
                        {"sweeps", sweeps},        {"seed", seed},
                        {"holdout", holdout},      {"hidden", hidden}};
  std::vector<TrialRecord> trials;
  CvaeModel cvae;
  try {
    trials = load_dataset(data);
    cvae = CvaeModel::load(cvae_path);
  } catch (const DatasetError& e) {
    throw UsageError(e.what());
  } catch (const CvaeError& e) {
    throw UsageError(e.what());
  } catch (const CheckpointError& e) {
    throw UsageError(e.what());
  }
  if (trials.empty()) throw UsageError("dataset is empty: " + data);

  Rng rng(seed);
  std::vector<TrialRecord> train, hold;
  split_trials(trials, holdout, rng, train, hold);
  int skipped = 0;
  auto windows = window_dataset(train, cvae.cfg.tau1, cvae.cfg.tau2, 1, &skipped);
  log_info(std::to_string(windows.size()) + " windows (" + std::to_string(skipped) +
           " short trials skipped), " + std::to_string(hold.size()) +
           " held-out trials");
  if (windows.empty()) throw UsageError("no usable training windows");

  CostNet net = CostNet::init(cvae.cfg.tau1, hidden, rng);
  std::string curve = "epoch,loss\n";
  auto report = train_cost(net, cvae, windows, epochs, batch, lr, K, rng.fork(1),
                           sweeps, [&](int epoch, double loss, const CostNet& n) {
                             curve += std::to_string(epoch) + "," + fmt(loss) + "\n";
                             log_info("epoch " + std::to_string(epoch) +
                                      " loss " + fmt(loss));
                             n.save(out + ".epoch" + std::to_string(epoch));
                           });
  net.save(out);
  write_text(out + ".loss.csv", curve);
  write_sidecar(out, resolved);
  std::printf("final_loss=%s checkpoint=%s\n", fmt(report.epoch_loss.back()).c_str(),
              out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvalRow {
  Policy policy;
  int episode;
  std::uint64_t seed;
  Metrics metrics;
};

int cmd_evaluate(const std::string& policies_flag, int episodes, std::uint64_t seed,
                 double noise_sigma, const std::string& cvae_path,
                 const std::string& cost_path, const std::string& out, int workers,
                 double collision_threshold, int calibration_episodes, int K,
                 int agents, bool timing) {
  ordered_json resolved{{"command", "evaluate"},
                        {"policies", policies_flag},
                        {"episodes", episodes},
                        {"seed", seed},
                        {"noise_sigma", noise_sigma},
                        {"cvae", cvae_path},
                        {"cost", cost_path},
                        {"out", out},
                        {"workers", workers},
                        {"collision_threshold", collision_threshold},
                        {"calibration_episodes", calibration_episodes},
                        {"K", K},
                        {"agents", agents},
                        {"timing", timing}};
  std::vector<Policy> policies;
  {
    std::stringstream ss(policies_flag);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      try {
        policies.push_back(parse_policy(tok));
      } catch (const BenchmarkError& e) {
        throw UsageError(e.what());
      }
    }
  }
  if (policies.empty()) throw UsageError("no policies requested");

  const bool needs_cvae = std::any_of(policies.begin(), policies.end(), [](Policy p) {
    return p == Policy::kCvaeOnly || p == Policy::kOurs;
  });
  const bool needs_cost =
      std::any_of(policies.begin(), policies.end(),
                  [](Policy p) { return p == Policy::kOurs; });

  CvaeModel cvae;
  CostNet net;
  if (needs_cvae) {
    if (cvae_path.empty()) throw UsageError("--cvae is required for cvae/ours");
    try {
      cvae = CvaeModel::load(cvae_path);
    } catch (const std::runtime_error& e) {
      throw UsageError(e.what());
    }
  }
  if (needs_cost) {
    if (cost_path.empty()) throw UsageError("--cost is required for ours");
    try {
      net = CostNet::load(cost_path);
    } catch (const std::runtime_error& e) {
      throw UsageError(e.what());
    }
    if (net.tau1 != cvae.cfg.tau1)
      throw UsageError("cost net horizon does not match the generative model");
  }

  ScenarioConfig cfg;
  cfg.n_agents = agents;
  PlannerConfig pc;
  pc.K = K;

  if (collision_threshold <= 0.0) {
    Rng crng(mix_seed(seed, 0xca11b8a7, 0));
    collision_threshold =
        calibrate_collision_threshold(cfg, calibration_episodes, crng);
    log_info("calibrated collision threshold " + fmt(collision_threshold));
    resolved["collision_threshold"] = collision_threshold;
  }

  std::vector<EvalRow> rows(policies.size() * episodes);
  std::atomic<std::size_t> next_job{0};
  std::mutex log_mutex;
  auto worker_fn = [&] {
    for (;;) {
      const std::size_t job = next_job.fetch_add(1);
      if (job >= rows.size()) return;
      const std::size_t pi = job / episodes;
      const int e = static_cast<int>(job % episodes);
      const Policy policy = policies[pi];
      const std::uint64_t scen_seed = mix_seed(seed, 1, e);
      const std::uint64_t run_seed = mix_seed(seed, 100 + pi, e);
      Rng srng(scen_seed);
      Scenario scen = generate_scenario(cfg, srng);
      Rng rrng(run_seed);
      EpisodeRecord rec = run_episode(
          policy, scen, noise_sigma, rrng, needs_cvae ? &cvae : nullptr,
          policy == Policy::kOurs ? &net : nullptr, pc);
      rows[job] = {policy, e, run_seed, compute_metrics(rec, collision_threshold)};
      // wall-clock timing is the one nondeterministic column; optional for
      // byte-identical reruns
      if (!timing) rows[job].metrics.mean_plan_time = 0.0;
      {
        std::lock_guard<std::mutex> lk(log_mutex);
        log_debug(std::string(policy_name(policy)) + " episode " +
                  std::to_string(e) + " min_d " + fmt(rows[job].metrics.min_distance));
      }
    }
  };
  const int n_workers = std::max(1, workers);
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker_fn);
  worker_fn();
  for (auto& t : pool) t.join();

  std::string csv =
      "policy,episode,seed,noise_sigma,robot_runtime_cost,min_distance,collided,"
      "mean_plan_time\n";
  for (const auto& r : rows) {
    csv += std::string(policy_name(r.policy)) + "," + std::to_string(r.episode) + "," +
           std::to_string(r.seed) + "," + fmt(noise_sigma) + "," +
           fmt(r.metrics.robot_runtime_cost) + "," + fmt(r.metrics.min_distance) +
           "," + (r.metrics.collided ? "1" : "0") + "," +
           fmt(r.metrics.mean_plan_time) + "\n";
  }
  write_text(out, csv);

  ordered_json summary{{"noise_sigma", noise_sigma},
                       {"collision_threshold", collision_threshold},
                       {"episodes", episodes},
                       {"policies", ordered_json::object()}};
  for (std::size_t pi = 0; pi < policies.size(); ++pi) {
    std::vector<double> costs, dists, times;
    int collisions = 0;
    for (int e = 0; e < episodes; ++e) {
      const Metrics& m = rows[pi * episodes + e].metrics;
      costs.push_back(m.robot_runtime_cost);
      dists.push_back(m.min_distance);
      times.push_back(m.mean_plan_time);
      collisions += m.collided ? 1 : 0;
    }
    double mean_time = 0.0;
    for (double t : times) mean_time += t;
    mean_time /= times.size();
    summary["policies"][policy_name(policies[pi])] = {
        {"collision_rate", static_cast<double>(collisions) / episodes},
        {"robot_runtime_cost",
         {{"median", quantile(costs, 0.5)},
          {"q1", quantile(costs, 0.25)},
          {"q3", quantile(costs, 0.75)}}},
        {"min_distance",
         {{"median", quantile(dists, 0.5)},
          {"q1", quantile(dists, 0.25)},
          {"q3", quantile(dists, 0.75)}}},
        {"mean_plan_time", mean_time}};
  }
  write_text(out + ".summary.json", summary.dump(2) + "\n");
  write_sidecar(out, resolved);
  std::printf("episodes=%zu results=%s\n", rows.size(), out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& results, const std::string& out) {
  std::ifstream in(results);
  if (!in) throw UsageError("cannot open results file: " + results);
  std::string line;
  if (!std::getline(in, line) || line.rfind("policy,", 0) != 0)
    throw UsageError("not a results file: " + results);

  struct PolicyData {
    std::vector<double> costs, dists, times;
    int collisions = 0;
    int episodes = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, PolicyData> data;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) throw UsageError("malformed results row: " + line);
    if (!data.count(fields[0])) order.push_back(fields[0]);
    PolicyData& pd = data[fields[0]];
    pd.costs.push_back(std::stod(fields[4]));
    pd.dists.push_back(std::stod(fields[5]));
    pd.collisions += fields[6] == "1" ? 1 : 0;
    pd.times.push_back(std::stod(fields[7]));
    ++pd.episodes;
  }
  if (data.empty()) throw UsageError("results file has no data rows: " + results);

  ordered_json summary = ordered_json::object();
  for (const auto& name : order) {
    PolicyData pd = data[name];
    std::sort(pd.dists.begin(), pd.dists.end());
    std::sort(pd.costs.begin(), pd.costs.end());
    std::string dist_txt, cost_txt;
    for (double v : pd.dists) dist_txt += fmt(v) + "\n";
    for (double v : pd.costs) cost_txt += fmt(v) + "\n";
    write_text(out + "_" + name + "_min_distance.txt", dist_txt);
    write_text(out + "_" + name + "_runtime_cost.txt", cost_txt);
    summary[name] = {
        {"episodes", pd.episodes},
        {"collision_rate", static_cast<double>(pd.collisions) / pd.episodes},
        {"min_distance",
         {{"median", quantile(pd.dists, 0.5)},
          {"q1", quantile(pd.dists, 0.25)},
          {"q3", quantile(pd.dists, 0.75)}}},
        {"robot_runtime_cost",
         {{"median", quantile(pd.costs, 0.5)},
          {"q1", quantile(pd.costs, 0.25)},
          {"q3", quantile(pd.costs, 0.75)}}}};
  }
  write_text(out + "_summary.json", summary.dump(2) + "\n");
  std::printf("policies=%zu prefix=%s\n", data.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ordered_json file_cfg;
  try {
    file_cfg = load_config_file(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  CLI::App app{"Sampling-based multi-agent planning benchmark"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override)");

  // generate-data
  int gd_trials = 50, gd_agents = 5;
  std::uint64_t gd_seed = 0;
  std::string gd_out;
  from_config(file_cfg, "trials", gd_trials);
  from_config(file_cfg, "agents", gd_agents);
  from_config(file_cfg, "seed", gd_seed);
  from_config(file_cfg, "out", gd_out);
  auto* gen = app.add_subcommand("generate-data", "collect game-agent demonstrations");
  gen->add_option("--trials", gd_trials)->check(CLI::PositiveNumber);
  gen->add_option("--agents", gd_agents)->check(CLI::Range(2, 10));
  gen->add_option("--seed", gd_seed);
  gen->add_option("--out", gd_out)->required();
  gen->add_option("--config", config_path);

  // train-nominal
  std::string tn_data, tn_out;
  int tn_epochs = 50, tn_batch = 32, tn_tau1 = 30, tn_tau2 = 10, tn_hidden = 256,
      tn_latent = 4;
  double tn_lr = 1e-4, tn_noise = 0.0;
  std::uint64_t tn_seed = 0;
  from_config(file_cfg, "data", tn_data);
  from_config(file_cfg, "epochs", tn_epochs);
  from_config(file_cfg, "batch", tn_batch);
  from_config(file_cfg, "lr", tn_lr);
  from_config(file_cfg, "noise_sigma", tn_noise);
  from_config(file_cfg, "tau1", tn_tau1);
  from_config(file_cfg, "tau2", tn_tau2);
  from_config(file_cfg, "hidden", tn_hidden);
  from_config(file_cfg, "latent", tn_latent);
  from_config(file_cfg, "seed", tn_seed);
  from_config(file_cfg, "out", tn_out);
  auto* tn = app.add_subcommand("train-nominal", "train the generative model");
  tn->add_option("--data", tn_data)->required();
  tn->add_option("--out", tn_out)->required();
  tn->add_option("--epochs", tn_epochs)->check(CLI::PositiveNumber);
  tn->add_option("--batch", tn_batch)->check(CLI::PositiveNumber);
  tn->add_option("--lr", tn_lr)->check(CLI::PositiveNumber);
  tn->add_option("--noise-sigma", tn_noise)->check(CLI::NonNegativeNumber);
  tn->add_option("--tau1", tn_tau1)->check(CLI::PositiveNumber);
  tn->add_option("--tau2", tn_tau2)->check(CLI::PositiveNumber);
  tn->add_option("--hidden", tn_hidden)->check(CLI::PositiveNumber);
  tn->add_option("--latent", tn_latent)->check(CLI::PositiveNumber);
  tn->add_option("--seed", tn_seed);
  tn->add_option("--config", config_path);

  // train-cost
  std::string tc_data, tc_cvae, tc_out;
  int tc_epochs = 10, tc_batch = 48, tc_K = 100, tc_sweeps = 3, tc_hidden = 256;
  double tc_lr = 1e-4, tc_holdout = 0.1;
  std::uint64_t tc_seed = 0;
  from_config(file_cfg, "data", tc_data);
  from_config(file_cfg, "cvae", tc_cvae);
  from_config(file_cfg, "epochs", tc_epochs);
  from_config(file_cfg, "batch", tc_batch);
  from_config(file_cfg, "lr", tc_lr);
  from_config(file_cfg, "K", tc_K);
  from_config(file_cfg, "sweeps", tc_sweeps);
  from_config(file_cfg, "hidden", tc_hidden);
  from_config(file_cfg, "holdout", tc_holdout);
  from_config(file_cfg, "seed", tc_seed);
  from_config(file_cfg, "out", tc_out);
  auto* tc = app.add_subcommand("train-cost", "train the interaction cost");
  tc->add_option("--data", tc_data)->required();
  tc->add_option("--cvae", tc_cvae)->required();
  tc->add_option("--out", tc_out)->required();
  tc->add_option("--epochs", tc_epochs)->check(CLI::PositiveNumber);
  tc->add_option("--batch", tc_batch)->check(CLI::PositiveNumber);
  tc->add_option("--lr", tc_lr)->check(CLI::PositiveNumber);
  tc->add_option("--K", tc_K)->check(CLI::PositiveNumber);
  tc->add_option("--sweeps", tc_sweeps)->check(CLI::PositiveNumber);
  tc->add_option("--hidden", tc_hidden)->check(CLI::PositiveNumber);
  tc->add_option("--holdout", tc_holdout)->check(CLI::Range(0.0, 0.5));
  tc->add_option("--seed", tc_seed);
  tc->add_option("--config", config_path);

  // evaluate
  std::string ev_policies = "gt,oracle,blind,cvae,ours", ev_cvae, ev_cost, ev_out;
  int ev_episodes = 100, ev_workers = 1, ev_calibration = 20, ev_K = 200,
      ev_agents = 5;
  double ev_noise = 0.0, ev_threshold = 0.0;
  bool ev_timing = true;
  std::uint64_t ev_seed = 0;
  from_config(file_cfg, "policies", ev_policies);
  from_config(file_cfg, "episodes", ev_episodes);
  from_config(file_cfg, "noise_sigma", ev_noise);
  from_config(file_cfg, "cvae", ev_cvae);
  from_config(file_cfg, "cost", ev_cost);
  from_config(file_cfg, "workers", ev_workers);
  from_config(file_cfg, "collision_threshold", ev_threshold);
  from_config(file_cfg, "calibration_episodes", ev_calibration);
  from_config(file_cfg, "K", ev_K);
  from_config(file_cfg, "agents", ev_agents);
  from_config(file_cfg, "seed", ev_seed);
  from_config(file_cfg, "out", ev_out);
  auto* ev = app.add_subcommand("evaluate", "closed-loop policy evaluation");
  ev->add_option("--policies", ev_policies);
  ev->add_option("--episodes", ev_episodes)->check(CLI::PositiveNumber);
  ev->add_option("--noise-sigma", ev_noise)->check(CLI::NonNegativeNumber);
  ev->add_option("--cvae", ev_cvae);
  ev->add_option("--cost", ev_cost);
  ev->add_option("--out", ev_out)->required();
  ev->add_option("--workers", ev_workers)->check(CLI::PositiveNumber);
  ev->add_option("--collision-threshold", ev_threshold);
  ev->add_option("--calibration-episodes", ev_calibration)->check(CLI::PositiveNumber);
  ev->add_option("--K", ev_K)->check(CLI::PositiveNumber);
  ev->add_option("--agents", ev_agents)->check(CLI::Range(2, 10));
  ev->add_flag("--timing,!--no-timing", ev_timing,
               "record wall-clock plan times (disable for byte-identical reruns)");
  ev->add_option("--seed", ev_seed);
  ev->add_option("--config", config_path);

  // report
  std::string rp_results, rp_out;
  from_config(file_cfg, "results", rp_results);
  from_config(file_cfg, "out", rp_out);
  auto* rp = app.add_subcommand("report", "distribution files from results");
  rp->add_option("--results", rp_results)->required();
  rp->add_option("--out", rp_out)->required();
  rp->add_option("--config", config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen)
      return cmd_generate_data(file_cfg, gd_trials, gd_seed, gd_out, gd_agents);
    if (*tn)
      return cmd_train_nominal(tn_data, tn_out, tn_epochs, tn_batch, tn_lr, tn_seed,
                               tn_noise, tn_tau1, tn_tau2, tn_hidden, tn_latent);
    if (*tc)
      return cmd_train_cost(tc_data, tc_cvae, tc_out, tc_epochs, tc_batch, tc_lr,
                            tc_K, tc_sweeps, tc_seed, tc_holdout, tc_hidden);
    if (*ev)
      return cmd_evaluate(ev_policies, ev_episodes, ev_seed, ev_noise, ev_cvae,
                          ev_cost, ev_out, ev_workers, ev_threshold, ev_calibration,
                          ev_K, ev_agents, ev_timing);
    if (*rp) return cmd_report(rp_results, rp_out);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
