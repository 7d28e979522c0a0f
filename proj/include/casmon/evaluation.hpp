#ifndef CASMON_EVALUATION_HPP
#define CASMON_EVALUATION_HPP

#include "casmon/monitor.hpp"
#include "casmon/simulator.hpp"
#include "casmon/spectral.hpp"
#include "casmon/trace.hpp"
#include "casmon/types.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace casmon {

/// A metric was asked for on data that cannot define it (e.g. one class only).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

struct TraceResult {
  std::string id;
  double score = 0.0;
  std::optional<Turn> first_alert;
  std::optional<CascadeKind> alert_kind;
  std::optional<AttributionReport> report;
  GroundTruth truth;
  Turn length = 0;  ///< turns processed
};

/// Strongest propagation evidence over a run of per-turn signals.
inline double trace_score(std::span<const SpectralSignals> signals) {
  double best = 0.0;
  for (const auto& s : signals) best = std::max(best, propagation_evidence(s));
  return best;
}

/// Runs the monitor over a whole trace. Detection continues after the first
/// declaration so the score covers the full trace; the first declaration
/// carries the alert turn, kind and report.
inline TraceResult run_trace(const Trace& trace, const MonitorConfig& cfg, GroundTruth truth, std::string id) {
  TraceResult r;
  r.id = std::move(id);
  r.truth = std::move(truth);
  Monitor monitor(trace.header, cfg);
  for (const auto& te : trace.turns) {
    for (auto& o : monitor.process(te)) {
      r.score = std::max(r.score, propagation_evidence(o.signals));
      r.length = o.turn + 1;
      if (o.declaration && !r.first_alert) {
        r.first_alert = o.declaration->turn;
        r.alert_kind = o.declaration->kind;
        r.report = std::move(o.report);
      }
    }
  }
  return r;
}

/// Groups a simulated event list into turns, as a reader would.
inline Trace as_trace(const SimulatedTrace& sim) {
  Trace t;
  t.header = sim.header;
  for (const auto& ev : sim.events) {
    if (t.turns.empty() || t.turns.back().turn != ev.turn) t.turns.push_back(TurnEvents{ev.turn, {}});
    t.turns.back().events.push_back(ev);
  }
  return t;
}

/// A trace to evaluate with its truth.
struct EvalJob {
  std::string id;
  Trace trace;
  GroundTruth truth;
};

/// Runs every job; results come back in job order whatever the thread count.
inline std::vector<TraceResult> run_all(const std::vector<EvalJob>& jobs, const MonitorConfig& cfg,
                                        unsigned threads = 1) {
  std::vector<TraceResult> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        out[k] = run_trace(jobs[k].trace, cfg, jobs[k].truth, jobs[k].id);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---- detection metrics -------------------------------------------------------

namespace detail {

inline void split_scores(const std::vector<TraceResult>& results, std::vector<double>& pos, std::vector<double>& neg) {
  for (const auto& r : results) (r.truth.is_attack ? pos : neg).push_back(r.score);
  if (pos.empty() || neg.empty()) throw UndefinedMetric("metric needs both attack and benign traces");
}

}  // namespace detail

/// Mann-Whitney AUROC with ties counted half.
inline double auroc(const std::vector<TraceResult>& results) {
  std::vector<double> pos, neg;
  detail::split_scores(results, pos, neg);
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(lo, neg.end(), p);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Highest TPR over thresholds t (flag when score > t) whose FPR fits the budget.
inline double tpr_at_fpr(const std::vector<TraceResult>& results, double budget) {
  std::vector<double> pos, neg;
  detail::split_scores(results, pos, neg);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto above = [](const std::vector<double>& v, double t) {
    return static_cast<double>(v.end() - std::upper_bound(v.begin(), v.end(), t));
  };
  std::vector<double> thresholds(pos);
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  double best = 0.0;
  // Flag everything, then every observed score as a cut.
  if (1.0 <= budget) best = 1.0;
  for (double t : thresholds) {
    const double fpr = above(neg, t) / static_cast<double>(neg.size());
    if (fpr <= budget) best = std::max(best, above(pos, t) / static_cast<double>(pos.size()));
  }
  return best;
}

/// Fraction of attack traces first alerted within [onset, onset + k].
inline double edr_at_k(const std::vector<TraceResult>& results, Turn k) {
  std::size_t attacks = 0, early = 0;
  for (const auto& r : results) {
    if (!r.truth.is_attack) continue;
    ++attacks;
    const Turn onset = r.truth.onset_turn.value_or(0);
    if (r.first_alert && *r.first_alert >= onset && *r.first_alert <= onset + k) ++early;
  }
  if (attacks == 0) throw UndefinedMetric("EDR needs attack traces");
  return static_cast<double>(early) / static_cast<double>(attacks);
}

/// Fraction of benign traces with at least one declaration.
inline double false_declaration_rate(const std::vector<TraceResult>& results) {
  std::size_t benign = 0, fired = 0;
  for (const auto& r : results) {
    if (r.truth.is_attack) continue;
    ++benign;
    fired += r.first_alert ? 1 : 0;
  }
  if (benign == 0) throw UndefinedMetric("false declaration rate needs benign traces");
  return static_cast<double>(fired) / static_cast<double>(benign);
}

// ---- attribution metrics -----------------------------------------------------

struct AttributionMetrics {
  double origin_acc1 = 0.0, amplifier_acc1 = 0.0, bridge_acc1 = 0.0;
  double origin_mrr = 0.0, amplifier_mrr = 0.0, bridge_mrr = 0.0;
  double joint_acc1 = 0.0;
  double spine_jaccard_at_3 = 0.0;
  double channel_acc = 0.0;
  double lag = 0.0;                ///< mean t0 - onset over declarations at or after onset
  std::size_t evaluated = 0;       ///< declared attack traces
  std::size_t undeclared = 0;      ///< attack traces without a declaration
  std::size_t premature = 0;       ///< declarations with t0 before onset (left out of the lag)
  std::size_t spines_scored = 0;
};

/// Reciprocal rank of the best-placed valid label (0 when none appears).
inline double reciprocal_rank(const std::vector<AgentId>& ranking, const std::vector<AgentId>& valid) {
  for (std::size_t k = 0; k < ranking.size(); ++k)
    if (std::find(valid.begin(), valid.end(), ranking[k]) != valid.end()) return 1.0 / static_cast<double>(k + 1);
  return 0.0;
}

using EdgeSet = std::set<Edge>;

inline EdgeSet path_edges(const Path& p) {
  EdgeSet out;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) out.insert({p[k], p[k + 1]});
  return out;
}

/// |P ∩ T| / |P ∪ T| over edge sets; two empty sets count as a match.
inline double jaccard(const EdgeSet& a, const EdgeSet& b) {
  std::size_t inter = 0;
  for (const auto& e : a) inter += b.count(e);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// A predicted spine's channel is correct when it equals the channel of a
/// true spine sharing the most edges with it (all ties are valid labels).
inline bool spine_channel_correct(const Spine& predicted, const std::vector<TrueSpine>& truth) {
  const EdgeSet p = path_edges(predicted.path);
  std::size_t best = 0;
  std::vector<std::size_t> overlap(truth.size(), 0);
  for (std::size_t q = 0; q < truth.size(); ++q) {
    for (const auto& e : path_edges(truth[q].path)) overlap[q] += p.count(e);
    best = std::max(best, overlap[q]);
  }
  if (best == 0) return false;
  for (std::size_t q = 0; q < truth.size(); ++q)
    if (overlap[q] == best && truth[q].channel == predicted.channel) return true;
  return false;
}

inline AttributionMetrics attribution_metrics(const std::vector<TraceResult>& results) {
  AttributionMetrics m;
  double lag_sum = 0.0;
  std::size_t lag_n = 0, spine_ok = 0;
  for (const auto& r : results) {
    if (!r.truth.is_attack) continue;
    if (!r.report) {
      ++m.undeclared;
      continue;
    }
    const auto& rep = *r.report;
    const auto& g = r.truth;
    ++m.evaluated;
    auto hit = [](AgentId top, const std::vector<AgentId>& valid) {
      return std::find(valid.begin(), valid.end(), top) != valid.end();
    };
    const bool o = hit(rep.origin, g.origin), a = hit(rep.amplifier, g.amplifier), b = hit(rep.bridge, g.bridge);
    m.origin_acc1 += o;
    m.amplifier_acc1 += a;
    m.bridge_acc1 += b;
    m.joint_acc1 += o && a && b;
    m.origin_mrr += reciprocal_rank(rep.origin_ranking, g.origin);
    m.amplifier_mrr += reciprocal_rank(rep.amplifier_ranking, g.amplifier);
    m.bridge_mrr += reciprocal_rank(rep.bridge_ranking, g.bridge);

    EdgeSet predicted, truth;
    for (std::size_t k = 0; k < rep.spines.size() && k < 3; ++k)
      for (const auto& e : path_edges(rep.spines[k].path)) predicted.insert(e);
    for (const auto& s : g.spines)
      for (const auto& e : path_edges(s.path)) truth.insert(e);
    m.spine_jaccard_at_3 += jaccard(predicted, truth);

    for (const auto& s : rep.spines) {
      ++m.spines_scored;
      spine_ok += spine_channel_correct(s, g.spines);
    }
    const Turn onset = g.onset_turn.value_or(0);
    if (rep.t0 >= onset) {
      lag_sum += static_cast<double>(rep.t0 - onset);
      ++lag_n;
    } else {
      ++m.premature;
    }
  }
  if (m.evaluated == 0) throw UndefinedMetric("attribution metrics need declared attack traces");
  const auto n = static_cast<double>(m.evaluated);
  for (double* x : {&m.origin_acc1, &m.amplifier_acc1, &m.bridge_acc1, &m.origin_mrr, &m.amplifier_mrr,
                    &m.bridge_mrr, &m.joint_acc1, &m.spine_jaccard_at_3})
    *x /= n;
  m.channel_acc = m.spines_scored ? static_cast<double>(spine_ok) / static_cast<double>(m.spines_scored) : 0.0;
  m.lag = lag_n ? lag_sum / static_cast<double>(lag_n) : 0.0;
  return m;
}

// ---- bootstrap ---------------------------------------------------------------

struct BootstrapConfig {
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::size_t max_redraws = 100;  ///< per resample

  void validate() const {
    if (resamples < 100) throw ConfigError("bootstrap resamples must be >= 100");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap level must be in (0, 1)");
  }
};

struct Interval {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t redraws = 0;
};

/// Linear-interpolation percentile (Hyndman-Fan type 7) of sorted data.
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw UndefinedMetric("percentile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

using Metric = std::function<double(const std::vector<TraceResult>&)>;

/// Percentile bootstrap over traces, resampling with replacement inside each
/// scenario family so every resample keeps the family mix. A resample on
/// which the metric is undefined is redrawn, up to `max_redraws` times.
inline Interval bootstrap_ci(const Metric& metric, const std::vector<TraceResult>& results,
                             const BootstrapConfig& cfg) {
  cfg.validate();
  Interval out;
  out.point = metric(results);
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t k = 0; k < results.size(); ++k) strata[results[k].truth.family].push_back(k);

  std::mt19937_64 rng(cfg.seed);
  std::vector<double> stats;
  stats.reserve(cfg.resamples);
  std::vector<TraceResult> sample;
  sample.reserve(results.size());
  for (std::size_t b = 0; b < cfg.resamples; ++b) {
    for (std::size_t attempt = 0;; ++attempt) {
      sample.clear();
      for (const auto& [family, idx] : strata)
        for (std::size_t k = 0; k < idx.size(); ++k) sample.push_back(results[idx[uniform_index(rng, idx.size())]]);
      try {
        stats.push_back(metric(sample));
        break;
      } catch (const UndefinedMetric&) {
        ++out.redraws;
        if (attempt + 1 >= cfg.max_redraws)
          throw UndefinedMetric("bootstrap: metric undefined after " + std::to_string(cfg.max_redraws) + " redraws");
      }
    }
  }
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - cfg.level) / 2.0;
  out.lo = percentile_sorted(stats, tail);
  out.hi = percentile_sorted(stats, 1.0 - tail);
  return out;
}

// ---- report ------------------------------------------------------------------

struct EvalSettings {
  double fpr_budget = 0.05;
  Turn edr_k = 5;
  BootstrapConfig bootstrap;

  void validate() const {
    if (!(fpr_budget >= 0.0 && fpr_budget <= 1.0)) throw ConfigError("eval.fpr_budget must be in [0, 1]");
    if (edr_k < 0) throw ConfigError("eval.edr_k must be >= 0");
    bootstrap.validate();
  }
};

inline OrderedJson trace_row(const TraceResult& r) {
  OrderedJson j;
  j["id"] = r.id;
  j["family"] = r.truth.family;
  j["is_attack"] = r.truth.is_attack;
  j["score"] = r.score;
  j["first_alert"] = r.first_alert ? OrderedJson(*r.first_alert) : OrderedJson(nullptr);
  j["alert_kind"] = r.alert_kind ? OrderedJson(to_string(*r.alert_kind)) : OrderedJson(nullptr);
  j["onset_turn"] = r.truth.onset_turn ? OrderedJson(*r.truth.onset_turn) : OrderedJson(nullptr);
  if (r.report) {
    j["origin"] = r.report->origin;
    j["t0"] = r.report->t0;
  }
  return j;
}

inline OrderedJson interval_record(const Interval& i) {
  return OrderedJson{{"point", i.point}, {"lo", i.lo}, {"hi", i.hi}, {"redraws", i.redraws}};
}

/// Aggregate metrics, bootstrap intervals and per-trace rows. A metric that is
/// undefined on the corpus is reported as null.
inline OrderedJson evaluation_report(const std::vector<TraceResult>& results, const EvalSettings& s) {
  s.validate();
  std::vector<std::pair<std::string, Metric>> metrics{
      {"auroc", [](const auto& r) { return auroc(r); }},
      {"tpr_at_fpr", [&](const auto& r) { return tpr_at_fpr(r, s.fpr_budget); }},
      {"edr_at_k", [&](const auto& r) { return edr_at_k(r, s.edr_k); }},
      {"false_declaration_rate", [](const auto& r) { return false_declaration_rate(r); }},
      {"origin_acc1", [](const auto& r) { return attribution_metrics(r).origin_acc1; }},
      {"amplifier_acc1", [](const auto& r) { return attribution_metrics(r).amplifier_acc1; }},
      {"bridge_acc1", [](const auto& r) { return attribution_metrics(r).bridge_acc1; }},
      {"origin_mrr", [](const auto& r) { return attribution_metrics(r).origin_mrr; }},
      {"amplifier_mrr", [](const auto& r) { return attribution_metrics(r).amplifier_mrr; }},
      {"bridge_mrr", [](const auto& r) { return attribution_metrics(r).bridge_mrr; }},
      {"joint_acc1", [](const auto& r) { return attribution_metrics(r).joint_acc1; }},
      {"spine_jaccard_at_3", [](const auto& r) { return attribution_metrics(r).spine_jaccard_at_3; }},
      {"channel_acc", [](const auto& r) { return attribution_metrics(r).channel_acc; }},
      {"attribution_lag", [](const auto& r) { return attribution_metrics(r).lag; }},
  };
  const double tail = (1.0 - s.bootstrap.level) / 2.0;
  auto percent = [](double p) { return std::round(p * 1e8) / 1e6; };
  OrderedJson j;
  j["traces"] = results.size();
  j["fpr_budget"] = s.fpr_budget;
  j["edr_k"] = s.edr_k;
  j["bootstrap"] = {{"resamples", s.bootstrap.resamples},
                    {"level", s.bootstrap.level},
                    {"seed", s.bootstrap.seed},
                    {"percentiles", {percent(tail), percent(1.0 - tail)}}};
  OrderedJson m = OrderedJson::object();
  for (const auto& [name, fn] : metrics) {
    try {
      m[name] = interval_record(bootstrap_ci(fn, results, s.bootstrap));
    } catch (const UndefinedMetric&) {
      m[name] = nullptr;
    }
  }
  j["metrics"] = std::move(m);
  try {
    const auto a = attribution_metrics(results);
    j["attribution_counts"] = {{"evaluated", a.evaluated},
                               {"undeclared", a.undeclared},
                               {"premature", a.premature},
                               {"spines_scored", a.spines_scored}};
  } catch (const UndefinedMetric&) {
    j["attribution_counts"] = nullptr;
  }
  OrderedJson rows = OrderedJson::array();
  for (const auto& r : results) rows.push_back(trace_row(r));
  j["per_trace"] = std::move(rows);
  return j;
}

}  // namespace casmon

#endif  // CASMON_EVALUATION_HPP
