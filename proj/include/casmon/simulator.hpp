#ifndef CASMON_SIMULATOR_HPP
#define CASMON_SIMULATOR_HPP

#include "casmon/event.hpp"
#include "casmon/paths.hpp"
#include "casmon/random.hpp"
#include "casmon/topology.hpp"
#include "casmon/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace casmon {

enum class TopologyKind { hub_and_spoke, hierarchical, decentralized, custom };
enum class AttackKind { none, intent, execution, coordination };
enum class StrengthProfile { gradual, abrupt };
enum class Regime { easy, hard };

inline const char* to_string(TopologyKind k) noexcept {
  switch (k) {
    case TopologyKind::hub_and_spoke: return "hub_and_spoke";
    case TopologyKind::hierarchical: return "hierarchical";
    case TopologyKind::decentralized: return "decentralized";
    case TopologyKind::custom: return "custom";
  }
  return "custom";
}
inline const char* to_string(AttackKind k) noexcept {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::intent: return "intent";
    case AttackKind::execution: return "execution";
    case AttackKind::coordination: return "coordination";
  }
  return "none";
}
inline const char* to_string(StrengthProfile p) noexcept { return p == StrengthProfile::gradual ? "gradual" : "abrupt"; }
inline const char* to_string(Regime r) noexcept { return r == Regime::easy ? "easy" : "hard"; }

inline TopologyKind topology_kind_from_string(std::string_view s) {
  if (s == "hub_and_spoke") return TopologyKind::hub_and_spoke;
  if (s == "hierarchical") return TopologyKind::hierarchical;
  if (s == "decentralized") return TopologyKind::decentralized;
  if (s == "custom") return TopologyKind::custom;
  throw ConfigError("invalid topology kind '" + std::string(s) + "'");
}
inline AttackKind attack_kind_from_string(std::string_view s) {
  if (s == "none") return AttackKind::none;
  if (s == "intent") return AttackKind::intent;
  if (s == "execution") return AttackKind::execution;
  if (s == "coordination") return AttackKind::coordination;
  throw ConfigError("invalid attack kind '" + std::string(s) + "'");
}
inline StrengthProfile profile_from_string(std::string_view s) {
  if (s == "gradual") return StrengthProfile::gradual;
  if (s == "abrupt") return StrengthProfile::abrupt;
  throw ConfigError("invalid strength profile '" + std::string(s) + "'");
}
inline Regime regime_from_string(std::string_view s) {
  if (s == "easy") return Regime::easy;
  if (s == "hard") return Regime::hard;
  throw ConfigError("invalid regime '" + std::string(s) + "'");
}

struct ScenarioConfig {
  TopologyKind topology = TopologyKind::decentralized;
  std::size_t agent_count = 6;
  std::vector<Edge> custom_edges;
  Turn turns = 48;
  AttackKind attack = AttackKind::none;
  Turn injection_turn = 16;
  StrengthProfile profile = StrengthProfile::gradual;
  Regime regime = Regime::easy;
  double strength = 1.0;  ///< scales planted signal up and echo noise down
  std::optional<AgentId> origin;  ///< injector; drawn from the seed when empty
  std::uint64_t seed = 0;

  void validate() const {
    if (agent_count < 3) throw ConfigError("scenario agent_count must be >= 3");
    if (turns < 2) throw ConfigError("scenario turns must be >= 2");
    if (attack != AttackKind::none && !(injection_turn >= 1 && injection_turn < turns))
      throw ConfigError("scenario injection_turn must lie in [1, turns)");
    if (origin && *origin >= agent_count) throw ConfigError("scenario origin out of range");
    if (!(strength > 0.0 && std::isfinite(strength))) throw ConfigError("scenario strength must be positive");
  }
};

struct TrueSpine {
  Path path;
  Channel channel = Channel::comm;
};

struct GroundTruth {
  bool is_attack = false;
  AttackKind attack = AttackKind::none;
  std::string expected_kind = "none";  ///< instant | multi_turn | none
  std::optional<Turn> onset_turn;
  std::vector<AgentId> origin;  ///< valid labels
  std::vector<AgentId> amplifier;
  std::vector<AgentId> bridge;
  std::vector<TrueSpine> spines;
  std::string family;  ///< bootstrap stratum
};

struct SimulatedTrace {
  TraceHeader header;
  std::vector<ChannelEvent> events;  ///< turn-ordered
  GroundTruth truth;
};

inline SystemTopology make_topology(TopologyKind kind, std::size_t n, const std::vector<Edge>& custom = {}) {
  std::vector<Edge> edges;
  switch (kind) {
    case TopologyKind::hub_and_spoke:
      for (AgentId j = 1; j < n; ++j) {
        edges.emplace_back(0, j);
        edges.emplace_back(j, 0);
      }
      break;
    case TopologyKind::hierarchical:
      for (AgentId j = 1; j < n; ++j) {
        edges.emplace_back((j - 1) / 2, j);
        edges.emplace_back(j, (j - 1) / 2);
      }
      break;
    case TopologyKind::decentralized:
      for (AgentId i = 0; i < n; ++i)
        for (AgentId j = 0; j < n; ++j)
          if (i != j) edges.emplace_back(i, j);
      break;
    case TopologyKind::custom:
      edges = custom;
      break;
  }
  return SystemTopology(n, std::move(edges));
}

namespace detail {

/// Regime-dependent generator constants.
struct RegimeParams {
  double activity;      ///< per-turn probability of benign traffic on an edge-channel
  double signal_scale;  ///< planted token-count scale per latent unit
  double echo_noise;    ///< target-side noise on planted latents
  double benign_copy;   ///< probability a benign target copies a source token
  double relay_gain;    ///< strength of relayed influence relative to the injection
  double relay_noise;   ///< echo noise on relayed links
};

inline RegimeParams regime_params(Regime r) {
  if (r == Regime::easy) return {0.35, 4.0, 0.15, 0.0, 0.5, 0.3};
  return {0.35, 1.6, 0.9, 0.15, 0.5, 1.4};
}

constexpr std::size_t kVocab = 64;
constexpr std::size_t kLatents = 8;
constexpr std::array<const char*, 5> kOps{"ask", "reply", "plan", "review", "note"};
constexpr std::array<const char*, 4> kTools{"search", "calc", "fetch", "shell"};

inline std::string word(std::size_t k) { return "w" + std::to_string(k); }

inline double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

/// Planted dependence on one (edge, channel, turn).
struct Plant {
  Edge edge;
  Channel channel;
  double strength;  ///< multiplier on signal_scale
  double noise;     ///< echo noise between the two views
};

class Generator {
 public:
  explicit Generator(const ScenarioConfig& cfg)
      : params_(regime_params(cfg.regime)), rng_(cfg.seed * 0x9E3779B97F4A7C15ull + 0x1234567ull) {}

  std::mt19937_64& rng() { return rng_; }

  std::vector<std::string> benign_words(std::size_t count) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < count; ++k) out.push_back(word(uniform_index(rng_, kVocab)));
    return out;
  }

  static std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) {
      if (!s.empty()) s += ' ';
      s += w;
    }
    return s;
  }

  /// Token counts carrying a latent vector: a fixed word per latent component.
  void add_signal(std::vector<std::string>& words, const std::array<double, kLatents>& z, double scale) {
    for (std::size_t k = 0; k < kLatents; ++k) {
      const double c = std::round(scale * (1.5 + z[k]));
      for (int r = 0; r < static_cast<int>(std::clamp(c, 0.0, 40.0)); ++r) words.push_back("sig" + std::to_string(k));
    }
  }

  ChannelEvent text_event(Turn t, const Edge& e, Channel c, const Plant* plant) {
    std::vector<std::string> src = benign_words(6 + uniform_index(rng_, 5));
    std::vector<std::string> tgt = benign_words(6 + uniform_index(rng_, 5));
    if (params_.benign_copy > 0.0)
      for (const auto& w : src)
        if (bernoulli(rng_, params_.benign_copy)) tgt.push_back(w);
    if (plant) {
      std::array<double, kLatents> z{}, zt{};
      for (std::size_t k = 0; k < kLatents; ++k) {
        z[k] = standard_normal(rng_);
        zt[k] = z[k] + plant->noise * standard_normal(rng_);
      }
      add_signal(src, z, params_.signal_scale * plant->strength);
      add_signal(tgt, zt, params_.signal_scale * plant->strength);
    }
    ChannelEvent ev;
    ev.turn = t;
    ev.src = e.first;
    ev.tgt = e.second;
    ev.channel = c;
    ev.payload = Json{{"source", join(src)}, {"target", join(tgt)}};
    ev.meta = Json{{"op", kOps[uniform_index(rng_, kOps.size())]}, {"recv_op", kOps[uniform_index(rng_, kOps.size())]}};
    if (c == Channel::tool) ev.meta["tool"] = kTools[uniform_index(rng_, kTools.size())];
    return ev;
  }

  Json exec_record(double latency, double tokens, bool ok) {
    return Json{{"latency", round3(latency)}, {"tokens", std::round(tokens)}, {"status", ok ? "ok" : "fail"}};
  }

  ChannelEvent exec_event(Turn t, const Edge& e, const Plant* plant) {
    auto draw = [&]() {
      return std::array<double, 2>{std::exp(0.4 * standard_normal(rng_)), 200.0 + 40.0 * standard_normal(rng_)};
    };
    auto src = draw();
    auto tgt = draw();
    bool src_ok = !bernoulli(rng_, 0.05), tgt_ok = !bernoulli(rng_, 0.05);
    if (plant) {
      // Shared latent runtime profile: latency, token use and outcome move together.
      const double s = plant->strength * params_.signal_scale / 4.0;
      const double z1 = standard_normal(rng_), z2 = standard_normal(rng_);
      src[0] = std::exp(s * z1);
      src[1] = 200.0 + 120.0 * s * z2;
      tgt[0] = std::exp(s * (z1 + plant->noise * standard_normal(rng_)));
      tgt[1] = 200.0 + 120.0 * s * (z2 + plant->noise * standard_normal(rng_));
      const bool fail = bernoulli(rng_, 0.5);
      src_ok = !fail;
      tgt_ok = bernoulli(rng_, plant->noise / 2.0) ? fail : !fail;
    }
    ChannelEvent ev;
    ev.turn = t;
    ev.src = e.first;
    ev.tgt = e.second;
    ev.channel = Channel::exec;
    ev.payload = Json{{"source", exec_record(src[0], src[1], src_ok)}, {"target", exec_record(tgt[0], tgt[1], tgt_ok)}};
    ev.meta = Json{{"op", "run"}};
    return ev;
  }

  ChannelEvent event(Turn t, const Edge& e, Channel c, const Plant* plant) {
    return c == Channel::exec ? exec_event(t, e, plant) : text_event(t, e, c, plant);
  }

 private:
  RegimeParams params_;
  std::mt19937_64 rng_;
};

inline std::vector<AgentId> pick_distinct(std::mt19937_64& rng, std::vector<AgentId> pool, std::size_t count) {
  std::vector<AgentId> out;
  while (!pool.empty() && out.size() < count) {
    const auto k = uniform_index(rng, pool.size());
    out.push_back(pool[k]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

/// Attack schedule: planted (edge, channel) flows with start turns and ramps.
struct Flow {
  Edge edge;
  Channel channel;
  Turn start;
  Turn ramp;       ///< turns to reach full strength (1 = immediate)
  double strength;
  Turn boost_at;   ///< abrupt strengthening turn (or -1)
  bool relay = false;
};

inline double flow_strength(const Flow& f, Turn t) {
  if (t < f.start) return 0.0;
  double s = f.strength * std::min(1.0, static_cast<double>(t - f.start + 1) / static_cast<double>(f.ramp));
  if (f.boost_at >= 0 && t >= f.boost_at) s *= 1.5;
  return s;
}

}  // namespace detail

/// Builds a labeled trace. Benign traffic is present on every edge-channel
/// with regime-dependent probability and carries independent source and
/// target content; attacks add flows whose source and target views share a
/// fresh latent every turn.
inline SimulatedTrace generate_trace(const ScenarioConfig& cfg) {
  cfg.validate();
  SimulatedTrace out;
  const std::size_t n = cfg.agent_count;
  SystemTopology topo = make_topology(cfg.topology, n, cfg.custom_edges);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("agent" + std::to_string(i));
  out.header = TraceHeader{Roster(names), topo};

  detail::Generator gen(cfg);
  auto& rng = gen.rng();
  GroundTruth& truth = out.truth;
  truth.attack = cfg.attack;
  truth.family = std::string(to_string(cfg.attack)) + "/" + to_string(cfg.topology);
  std::vector<detail::Flow> flows;
  const Turn inj = cfg.injection_turn;

  auto outs = [&](AgentId a, std::optional<AgentId> exclude = std::nullopt) {
    std::vector<AgentId> v;
    for (AgentId j : topo.out_neighbors(a))
      if (!exclude || j != *exclude) v.push_back(j);
    return v;
  };

  if (cfg.attack != AttackKind::none) {
    std::vector<AgentId> candidates;
    for (AgentId a = 0; a < n; ++a)
      if (topo.out_neighbors(a).size() >= 2) candidates.push_back(a);
    if (candidates.empty()) throw ConfigError("topology has no agent with two out-neighbours to inject at");
    AgentId origin = cfg.origin ? *cfg.origin : candidates[uniform_index(rng, candidates.size())];
    if (topo.out_neighbors(origin).size() < 2)
      throw ConfigError("scenario origin needs at least two out-neighbours");
    truth.is_attack = true;
    truth.onset_turn = inj;
    truth.origin = {origin};
    const bool abrupt = cfg.profile == StrengthProfile::abrupt;
    const double gain = detail::regime_params(cfg.regime).relay_gain;

    switch (cfg.attack) {
      case AttackKind::intent: {
        // Origin rewrites its messages; relays echo with a lag (ramping up
        // unless abrupt) and later leak the content into memory.
        truth.expected_kind = "instant";
        auto relays = detail::pick_distinct(rng, outs(origin), 3);
        for (AgentId r : relays) flows.push_back({{origin, r}, Channel::comm, inj, 1, 1.0, -1});
        AgentId amp = relays.front();
        std::size_t amp_fanout = 0;
        for (AgentId r : relays) {
          auto next = outs(r, origin);
          if (next.empty()) next = outs(r);
          auto chosen = detail::pick_distinct(rng, next, 2);
          if (chosen.size() > amp_fanout) {
            amp = r;
            amp_fanout = chosen.size();
          }
          if (chosen.empty()) truth.spines.push_back({{origin, r}, Channel::comm});
          for (AgentId x : chosen) {
            flows.push_back({{r, x}, Channel::comm, inj + 2, abrupt ? 1 : 8, gain, -1, true});
            flows.push_back({{r, x}, Channel::mem, inj + 6, abrupt ? 1 : 4, gain, -1, true});
            truth.spines.push_back({x == origin ? Path{origin, r} : Path{origin, r, x}, Channel::comm});
            truth.spines.push_back({{r, x}, Channel::mem});
          }
        }
        truth.amplifier = {amp};
        truth.bridge = relays;
        break;
      }
      case AttackKind::execution: {
        // Poisoned tool results reach the bridge and up to two more
        // neighbours; the bridge's executions then propagate and strengthen
        // abruptly at a relay turn.
        truth.expected_kind = "instant";
        auto targets = outs(origin);
        std::vector<AgentId> with_fanout;
        for (AgentId b : targets)
          if (!outs(b, origin).empty()) with_fanout.push_back(b);
        const AgentId bridge =
            with_fanout.empty() ? targets.front() : with_fanout[uniform_index(rng, with_fanout.size())];
        std::vector<AgentId> others;
        for (AgentId j : targets)
          if (j != bridge) others.push_back(j);
        std::vector<AgentId> poisoned = detail::pick_distinct(rng, others, 2);
        poisoned.insert(poisoned.begin(), bridge);
        for (AgentId j : poisoned) {
          flows.push_back({{origin, j}, Channel::tool, inj, 1, 1.0, -1});
          truth.spines.push_back({{origin, j}, Channel::tool});
        }
        const Turn relay_turn = inj + 3;
        auto next = outs(bridge, origin);
        if (next.empty()) next = outs(bridge);
        for (AgentId x : detail::pick_distinct(rng, next, 2)) {
          flows.push_back({{bridge, x}, Channel::exec, inj + 1, abrupt ? 1 : 3, gain, relay_turn, true});
          truth.spines.push_back({{bridge, x}, Channel::exec});
        }
        truth.amplifier = {bridge};
        truth.bridge = {bridge};
        break;
      }
      case AttackKind::coordination: {
        // The injector synchronizes its neighbours, each link on its own
        // channel so evidence spreads over all four; every neighbour passes
        // the coupling on one turn later on the same channel.
        truth.expected_kind = "instant";
        auto targets = outs(origin);
        for (std::size_t k = 0; k < targets.size(); ++k) {
          const Channel c = kChannels[k % kChannelCount];
          flows.push_back({{origin, targets[k]}, c, inj, 1, 1.0, -1});
          auto next = outs(targets[k], origin);
          if (next.empty()) next = outs(targets[k]);
          const AgentId x = next[uniform_index(rng, next.size())];
          flows.push_back({{targets[k], x}, c, inj + 1, 1, gain, -1, true});
          truth.spines.push_back({x == origin ? Path{origin, targets[k]} : Path{origin, targets[k], x}, c});
        }
        truth.amplifier = {origin};
        truth.bridge = targets;
        break;
      }
      case AttackKind::none: break;
    }
  }

  const auto params = detail::regime_params(cfg.regime);
  for (Turn t = 0; t < cfg.turns; ++t) {
    std::map<std::pair<Edge, Channel>, std::pair<double, double>> planted;  // strength, noise
    for (const auto& f : flows) {
      const double s = cfg.strength * detail::flow_strength(f, t);
      if (s <= 0.0) continue;
      const double noise = (f.relay ? params.relay_noise : params.echo_noise) / cfg.strength;
      auto [it, fresh] = planted.try_emplace({f.edge, f.channel}, s, noise);
      if (!fresh && s > it->second.first) it->second = {s, noise};
    }
    for (const Edge& e : topo.edges()) {
      for (Channel c : kChannels) {
        auto it = planted.find({e, c});
        if (it != planted.end()) {
          detail::Plant p{e, c, it->second.first, it->second.second};
          out.events.push_back(gen.event(t, e, c, &p));
        } else if (bernoulli(rng, params.activity)) {
          out.events.push_back(gen.event(t, e, c, nullptr));
        }
      }
    }
  }
  return out;
}

// ---- serialization ---------------------------------------------------------

inline std::string trace_text(const SimulatedTrace& tr) {
  std::string s = format_header_line(tr.header) + "\n";
  for (const auto& ev : tr.events) s += format_event_line(ev, tr.header.roster) + "\n";
  return s;
}

inline OrderedJson truth_record(const GroundTruth& g, const Roster& roster) {
  auto names = [&](const std::vector<AgentId>& ids) {
    OrderedJson a = OrderedJson::array();
    for (AgentId i : ids) a.push_back(roster.name(i));
    return a;
  };
  OrderedJson j;
  j["is_attack"] = g.is_attack;
  j["attack"] = to_string(g.attack);
  j["expected_kind"] = g.expected_kind;
  j["onset_turn"] = g.onset_turn ? OrderedJson(*g.onset_turn) : OrderedJson(nullptr);
  j["origin"] = names(g.origin);
  j["amplifier"] = names(g.amplifier);
  j["bridge"] = names(g.bridge);
  OrderedJson spines = OrderedJson::array();
  for (const auto& s : g.spines) spines.push_back({{"path", names(s.path)}, {"channel", to_string(s.channel)}});
  j["spines"] = std::move(spines);
  j["family"] = g.family;
  return j;
}

inline GroundTruth parse_truth(const Json& j, const Roster& roster) {
  auto ids = [&](const char* key) {
    std::vector<AgentId> out;
    if (!j.contains(key)) return out;
    for (const auto& v : j.at(key)) {
      auto id = v.is_string() ? roster.find(v.get<std::string>()) : std::optional<AgentId>(v.get<AgentId>());
      if (!id || *id >= roster.size()) throw ParseError(key, std::string("unknown agent in truth field '") + key + "'");
      out.push_back(*id);
    }
    return out;
  };
  GroundTruth g;
  try {
    g.is_attack = j.at("is_attack").get<bool>();
    g.attack = attack_kind_from_string(j.value("attack", "none"));
    g.expected_kind = j.value("expected_kind", "none");
    if (j.contains("onset_turn") && !j.at("onset_turn").is_null()) g.onset_turn = j.at("onset_turn").get<Turn>();
    g.origin = ids("origin");
    g.amplifier = ids("amplifier");
    g.bridge = ids("bridge");
    if (j.contains("spines")) {
      for (const auto& s : j.at("spines")) {
        TrueSpine ts;
        for (const auto& v : s.at("path")) {
          auto id = roster.find(v.get<std::string>());
          if (!id) throw ParseError("spines", "unknown agent in truth spine");
          ts.path.push_back(*id);
        }
        auto c = channel_from_string(s.at("channel").get<std::string>());
        if (!c) throw ParseError("spines", "unknown channel in truth spine");
        ts.channel = *c;
        g.spines.push_back(std::move(ts));
      }
    }
    g.family = j.value("family", std::string(to_string(g.attack)));
  } catch (const Json::exception& e) {
    throw ParseError("truth", std::string("malformed truth record: ") + e.what());
  }
  if (g.is_attack && !g.onset_turn) throw ParseError("onset_turn", "attack truth record lacks onset_turn");
  return g;
}

}  // namespace casmon

#endif  // CASMON_SIMULATOR_HPP
