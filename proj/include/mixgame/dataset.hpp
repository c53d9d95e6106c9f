#ifndef MIXGAME_DATASET_HPP
#define MIXGAME_DATASET_HPP

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixgame/dynamics.hpp"

namespace mixgame {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrialAgent {
  std::array<double, 2> goal{0.0, 0.0};
  double lambda = 0.5;
  std::vector<AgentState> states;
};

struct TrialRecord {
  int trial_id = 0;
  std::uint64_t seed = 0;
  double dt = 0.1;
  std::vector<TrialAgent> agents;
};

namespace detail {

// 17 significant digits: enough for exact double round-trip, and a fixed
// format so identical data produces byte-identical files.
inline void put_real(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace detail

inline std::string trial_to_json_line(const TrialRecord& trial) {
  std::string s = "{\"trial_id\":" + std::to_string(trial.trial_id) +
                  ",\"seed\":" + std::to_string(trial.seed) + ",\"dt\":";
  detail::put_real(s, trial.dt);
  s += ",\"agents\":[";
  for (size_t i = 0; i < trial.agents.size(); ++i) {
    const TrialAgent& a = trial.agents[i];
    if (i) s += ',';
    s += "{\"goal\":[";
    detail::put_real(s, a.goal[0]);
    s += ',';
    detail::put_real(s, a.goal[1]);
    s += "],\"lambda\":";
    detail::put_real(s, a.lambda);
    s += ",\"states\":[";
    for (size_t k = 0; k < a.states.size(); ++k) {
      if (k) s += ',';
      s += '[';
      detail::put_real(s, a.states[k].x);
      s += ',';
      detail::put_real(s, a.states[k].y);
      s += ',';
      detail::put_real(s, a.states[k].psi);
      s += ',';
      detail::put_real(s, a.states[k].v);
      s += ']';
    }
    s += "]}";
  }
  s += "]}";
  return s;
}

inline void save_dataset(const std::string& path, const std::vector<TrialRecord>& trials) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open for writing: " + path);
  for (const auto& t : trials) out << trial_to_json_line(t) << '\n';
  if (!out) throw DatasetError("write failed: " + path);
}

inline TrialRecord trial_from_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("trial parse error: ") + e.what());
  }
  TrialRecord t;
  try {
    t.trial_id = j.at("trial_id").get<int>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.dt = j.at("dt").get<double>();
    for (const auto& ja : j.at("agents")) {
      TrialAgent a;
      a.goal = {ja.at("goal").at(0).get<double>(), ja.at("goal").at(1).get<double>()};
      a.lambda = ja.at("lambda").get<double>();
      for (const auto& js : ja.at("states")) {
        AgentState s{js.at(0).get<double>(), js.at(1).get<double>(),
                     js.at(2).get<double>(), js.at(3).get<double>()};
        if (!s.finite()) throw DatasetError("non-finite state in trial");
        a.states.push_back(s);
      }
      t.agents.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("trial schema error: ") + e.what());
  }
  return t;
}

inline std::vector<TrialRecord> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open: " + path);
  std::vector<TrialRecord> trials;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    trials.push_back(trial_from_json_line(line));
  }
  return trials;
}

}  // namespace mixgame

#endif  // MIXGAME_DATASET_HPP
