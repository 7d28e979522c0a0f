#ifndef CASMON_CONFIG_HPP
#define CASMON_CONFIG_HPP

#include "casmon/evaluation.hpp"
#include "casmon/monitor.hpp"
#include "casmon/simulator.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace casmon {

/// Everything a command needs besides its input paths.
struct RunConfig {
  MonitorConfig monitor;
  EvalSettings eval;
  std::uint64_t seed = 0;
  int verbosity = 0;  ///< 0 quiet, 1 progress on stderr
  bool timing = false;

  void validate() const {
    monitor.encoder.validate();
    monitor.estimator.validate();
    monitor.detector.validate();
    if (monitor.spines < 1 || monitor.spines > 64) throw ConfigError("k must be in [1, 64]");
    if (verbosity < 0 || verbosity > 2) throw ConfigError("verbosity must be in [0, 2]");
    eval.validate();
  }
};

namespace detail {

/// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  template <class T>
  bool read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return false;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
    return true;
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in " + where_);
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Parses a run configuration. Component seeds not given explicitly follow
/// the top-level seed, so one number fixes every random choice.
inline RunConfig parse_run_config(const Json& j) {
  RunConfig cfg;
  detail::ObjectReader top(j, "config");
  top.read("seed", cfg.seed);
  top.read("verbosity", cfg.verbosity);
  top.read("timing", cfg.timing);
  top.read("k", cfg.monitor.spines);
  bool encoder_seed = false, estimator_seed = false, bootstrap_seed = false;

  if (const Json* e = top.child("encoder")) {
    detail::ObjectReader r(*e, "encoder");
    auto& c = cfg.monitor.encoder;
    r.read("dim", c.dim);
    encoder_seed = r.read("seed", c.seed);
    r.read("meta_dims", c.meta_dims);
    if (const Json* s = r.child("exec_slots")) {
      detail::ObjectReader slots(*s, "encoder.exec_slots");
      slots.read("latency", c.exec_slots.latency);
      slots.read("tokens", c.exec_slots.tokens);
      slots.read("status", c.exec_slots.status);
      slots.read("error", c.exec_slots.error);
      slots.finish();
    }
    r.finish();
  }
  if (const Json* e = top.child("estimator")) {
    detail::ObjectReader r(*e, "estimator");
    auto& c = cfg.monitor.estimator;
    r.read("alpha", c.alpha);
    r.read("beta", c.beta);
    r.read("shrink", c.shrink);
    r.read("jitter", c.jitter);
    r.read("tensor_decay", c.tensor_decay);
    r.read("warmup", c.warmup);
    r.read("epsilon", c.epsilon);
    r.read("proj_dim", c.proj_dim);
    r.read("significance", c.significance);
    r.read("reservoir", c.reservoir);
    estimator_seed = r.read("seed", c.seed);
    r.finish();
  }
  if (const Json* e = top.child("detector")) {
    detail::ObjectReader r(*e, "detector");
    auto& c = cfg.monitor.detector;
    r.read("epsilon", c.epsilon);
    r.read("cache_min_turns", c.cache_min_turns);
    r.read("max_window", c.max_window);
    r.finish();
  }
  if (const Json* e = top.child("eval")) {
    detail::ObjectReader r(*e, "eval");
    r.read("fpr_budget", cfg.eval.fpr_budget);
    r.read("edr_k", cfg.eval.edr_k);
    r.read("resamples", cfg.eval.bootstrap.resamples);
    r.read("level", cfg.eval.bootstrap.level);
    r.read("max_redraws", cfg.eval.bootstrap.max_redraws);
    bootstrap_seed = r.read("seed", cfg.eval.bootstrap.seed);
    r.finish();
  }
  top.finish();

  if (!encoder_seed) cfg.monitor.encoder.seed = cfg.seed;
  if (!estimator_seed) cfg.monitor.estimator.seed = cfg.seed;
  if (!bootstrap_seed) cfg.eval.bootstrap.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

/// Re-applies a seed override to every component.
inline void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.monitor.encoder.seed = seed;
  cfg.monitor.estimator.seed = seed;
  cfg.eval.bootstrap.seed = seed;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// ---- scenarios ---------------------------------------------------------------

/// One scenario block plus how many consecutive seeds to generate from it.
struct ScenarioBatch {
  ScenarioConfig scenario;
  std::size_t count = 1;
};

inline ScenarioBatch parse_scenario(const Json& j, const std::string& where = "scenario") {
  ScenarioBatch b;
  auto& c = b.scenario;
  detail::ObjectReader r(j, where);
  std::string s;
  if (r.read("topology", s)) c.topology = topology_kind_from_string(s);
  if (r.read("attack", s)) c.attack = attack_kind_from_string(s);
  if (r.read("profile", s)) c.profile = profile_from_string(s);
  if (r.read("regime", s)) c.regime = regime_from_string(s);
  r.read("agent_count", c.agent_count);
  r.read("turns", c.turns);
  r.read("injection_turn", c.injection_turn);
  r.read("strength", c.strength);
  r.read("seed", c.seed);
  r.read("count", b.count);
  AgentId origin = 0;
  if (r.read("origin", origin)) c.origin = origin;
  std::vector<std::array<AgentId, 2>> edges;
  if (r.read("custom_edges", edges))
    for (const auto& e : edges) c.custom_edges.push_back({e[0], e[1]});
  r.finish();
  if (b.count < 1) throw ConfigError(where + ".count must be >= 1");
  c.validate();
  return b;
}

/// A scenario file is either one scenario object or {"scenarios": [...]}.
inline std::vector<ScenarioBatch> parse_scenario_file(const Json& j) {
  std::vector<ScenarioBatch> out;
  if (j.is_object() && j.contains("scenarios")) {
    if (j.size() != 1) throw ConfigError("a scenario list file holds only the 'scenarios' key");
    const Json& list = j.at("scenarios");
    if (!list.is_array() || list.empty()) throw ConfigError("'scenarios' must be a non-empty array");
    for (std::size_t k = 0; k < list.size(); ++k)
      out.push_back(parse_scenario(list[k], "scenarios[" + std::to_string(k) + "]"));
  } else {
    out.push_back(parse_scenario(j));
  }
  return out;
}

}  // namespace casmon

#endif  // CASMON_CONFIG_HPP
