#ifndef CASMON_MONITOR_HPP
#define CASMON_MONITOR_HPP

#include "casmon/attribution.hpp"
#include "casmon/detector.hpp"
#include "casmon/encoder.hpp"
#include "casmon/estimator.hpp"
#include "casmon/event.hpp"
#include "casmon/influence.hpp"
#include "casmon/paths.hpp"
#include "casmon/spectral.hpp"
#include "casmon/trace.hpp"

#include <chrono>
#include <optional>
#include <vector>

namespace casmon {

struct MonitorConfig {
  EncoderConfig encoder;
  EstimatorConfig estimator;
  DetectorConfig detector;
  std::size_t spines = 3;  ///< K
};

/// Everything the monitor learned about one turn.
struct TurnOutput {
  Turn turn = 0;
  std::size_t buckets = 0;
  SpectralSignals signals;
  bool watch = false;
  WeakLinkResult weak;
  DetectorEvent event = DetectorEvent::none;
  std::optional<Declaration> declaration;
  std::optional<AttributionReport> report;
  double elapsed_ms = 0.0;
};

/// Online pipeline: encode, estimate, normalize, spectral signals, detect,
/// attribute on declaration.
class Monitor {
 public:
  Monitor(const TraceHeader& header, MonitorConfig cfg)
      : cfg_(cfg),
        topo_(header.topology),
        encoder_(cfg.encoder),
        estimator_(topo_, cfg.encoder.dim, cfg.estimator),
        detector_(cfg.detector) {
    if (cfg_.spines == 0) throw ConfigError("spine count K must be positive");
  }

  const SystemTopology& topology() const noexcept { return topo_; }
  const InfluenceEstimator& estimator() const noexcept { return estimator_; }
  const CascadeDetector& detector() const noexcept { return detector_; }
  const InfluenceCache& cache() const noexcept { return cache_; }

  /// Processes one observed turn. Turns skipped since the last observed one
  /// are processed as empty turns first, so the result may hold several.
  std::vector<TurnOutput> process(const TurnEvents& te) {
    std::vector<TurnOutput> out;
    if (last_turn_ && te.turn <= *last_turn_)
      throw ParseError("turn", "turn " + std::to_string(te.turn) + " is not after turn " + std::to_string(*last_turn_));
    if (last_turn_)
      for (Turn t = *last_turn_ + 1; t < te.turn; ++t) out.push_back(step(t, {}));
    out.push_back(step(te.turn, te.events));
    return out;
  }

  TurnOutput step(Turn turn, std::span<const ChannelEvent> events) {
    const auto start = std::chrono::steady_clock::now();
    const double eps = cfg_.estimator.epsilon;
    TurnOutput o;
    o.turn = turn;

    const TurnBatch batch = normalize_turn(events, topo_, encoder_, turn);
    o.buckets = batch.buckets.size();
    estimator_.process(batch);
    const NormalizedInfluence norm = normalize(estimator_.tensor(), eps);

    o.signals = compute_signals(leading_spectrum(norm.unified), prev_ ? &*prev_ : nullptr, eps);
    o.signals.turn = turn;
    apply_spread(o.signals, channel_spread(norm.channels, eps));
    o.watch = watch(o.signals);
    o.weak = weak_link(norm.unified, topo_, eps);

    cache_.put(turn, cached_turn(norm));
    o.event = detector_.step(o.signals, o.weak, turn);
    if (o.event == DetectorEvent::instant_cascade || o.event == DetectorEvent::multi_turn_cascade) {
      o.declaration = detector_.last_declaration();
      o.report = attribute(cache_, o.declaration->t_w, o.declaration->t0, topo_, cfg_.spines, eps);
    }
    cache_.trim(turn, detector_.retention(), detector_.watch_onset());

    prev_ = o.signals;
    last_turn_ = turn;
    o.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return o;
  }

 private:
  MonitorConfig cfg_;
  SystemTopology topo_;
  HashedEncoder encoder_;
  InfluenceEstimator estimator_;
  CascadeDetector detector_;
  InfluenceCache cache_;
  std::optional<SpectralSignals> prev_;
  std::optional<Turn> last_turn_;
};

// ---- records -------------------------------------------------------------

inline OrderedJson channel_record(const std::array<double, kChannelCount>& values) {
  OrderedJson j = OrderedJson::object();
  for (Channel c : kChannels) j[to_string(c)] = values[index_of(c)];
  return j;
}

inline OrderedJson signals_record(const SpectralSignals& s) {
  OrderedJson j;
  j["turn"] = s.turn;
  j["lambda1"] = s.lambda1;
  j["lambda2"] = s.lambda2;
  j["energy"] = s.energy;
  j["amp"] = s.amp;
  j["ratio"] = s.ratio;
  j["gap"] = s.gap;
  j["gap_contraction"] = s.gap_contraction;
  j["phase"] = s.phase;
  j["phase_shift"] = s.phase_shift;
  j["channel_energies"] = channel_record(s.channel_energies);
  j["channel_shares"] = channel_record(s.channel_shares);
  j["entropy"] = s.entropy;
  j["cross_channel"] = s.cross_channel;
  return j;
}

/// One diagnostics line per turn. Timing is opt-in so that default output is
/// reproducible byte for byte.
inline OrderedJson diagnostics_record(const TurnOutput& o, bool timing) {
  OrderedJson j = signals_record(o.signals);
  j["watch"] = o.watch;
  j["bottleneck"] = o.weak.bottleneck;
  j["energy_scale"] = o.weak.energy_scale;
  j["weak_link"] = o.weak.feasible;
  j["buckets"] = o.buckets;
  j["event"] = to_string(o.event);
  if (timing) j["elapsed_ms"] = o.elapsed_ms;
  return j;
}

inline OrderedJson alert_record(const Declaration& d) {
  OrderedJson j;
  j["turn"] = d.turn;
  j["kind"] = to_string(d.kind);
  j["t_w"] = d.t_w;
  j["t0"] = d.t0;
  j["W"] = d.window;
  j["signals_snapshot"] = signals_record(d.signals);
  return j;
}

inline OrderedJson report_record(const AttributionReport& r, const Roster& roster) {
  auto names = [&](const std::vector<AgentId>& ids) {
    OrderedJson a = OrderedJson::array();
    for (AgentId i : ids) a.push_back(roster.name(i));
    return a;
  };
  OrderedJson j;
  j["cascade"] = true;
  j["interval"] = {r.t_w, r.t0};
  j["origin"] = roster.name(r.origin);
  j["amplifier"] = roster.name(r.amplifier);
  j["bridge"] = roster.name(r.bridge);
  j["rankings"] = {{"origin", names(r.origin_ranking)},
                   {"amplifier", names(r.amplifier_ranking)},
                   {"bridge", names(r.bridge_ranking)}};
  OrderedJson spines = OrderedJson::array();
  for (const Spine& s : r.spines) {
    OrderedJson sj;
    sj["path"] = names(s.path);
    sj["bottleneck"] = s.bottleneck;
    sj["channel"] = to_string(s.channel);
    spines.push_back(std::move(sj));
  }
  j["spines"] = std::move(spines);
  return j;
}

inline OrderedJson no_cascade_record() {
  OrderedJson j;
  j["cascade"] = false;
  return j;
}

}  // namespace casmon

#endif  // CASMON_MONITOR_HPP
