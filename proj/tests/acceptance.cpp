// Acceptance run: one PASS/FAIL line per criterion. Every tolerance and
// corpus size is fixed here; nothing is read from the environment.

#include "casmon/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <unistd.h>

using namespace casmon;
namespace fs = std::filesystem;

namespace {

// ---- pinned targets ------------------------------------------------------------

constexpr double kCmiRelTol = 0.10;
constexpr double kIndependentMax = 0.05;
constexpr double kEstimatorSeconds = 10.0;
constexpr double kSpectrumTol = 1e-6;
constexpr int kFuzzMatrices = 10000;
constexpr int kDigraphs = 500;
constexpr int kIntervals = 200;
constexpr int kScalings = 10;
constexpr std::size_t kBenign = 200;
constexpr std::size_t kAttacks = 200;
constexpr double kAurocMin = 0.95;
constexpr double kTprMin = 0.85;
constexpr double kFprBudget = 0.05;
constexpr double kEdrMin = 0.80;
constexpr Turn kEdrK = 5;
constexpr double kFdrMax = 0.05;
constexpr double kOriginMin = 0.90;
constexpr double kChannelMin = 0.85;
constexpr double kMedianMsMax = 2.0;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// ---- 1. estimator ---------------------------------------------------------------

double gaussian_stream_score(double rho, std::size_t n, std::uint64_t seed) {
  // Cumulative covariance and no shrinkage: the stationary accuracy profile.
  EstimatorConfig cfg;
  cfg.beta = 0.0;
  cfg.shrink = 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  EdgeChannelState st(1, 1, 1, cfg.reservoir, seed + 17);
  double score = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = g(rng), b = g(rng), h = g(rng);
    score = score_edge_channel(Vector::Constant(1, a), Vector::Constant(1, rho * a + std::sqrt(1 - rho * rho) * b),
                               Vector::Constant(1, h), st, cfg);
  }
  return score;
}

Verdict criterion1() {
  Verdict v;
  for (double rho : {0.3, 0.6, 0.9}) {
    double mean = 0.0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) mean += gaussian_stream_score(rho, 20000, seed) / 4.0;
    const double truth = -0.5 * std::log(1 - rho * rho);
    const double rel = std::abs(mean - truth) / truth;
    v.detail << " rho=" << rho << " rel_err=" << std::setprecision(3) << rel;
    v.require(rel <= kCmiRelTol, "relative error at rho " + std::to_string(rho));
  }
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) worst = std::max(worst, gaussian_stream_score(0.0, 2000, seed));
  v.detail << " independent_max=" << worst;
  v.require(worst < kIndependentMax, "independent streams");

  ScenarioConfig sc;
  sc.attack = AttackKind::intent;
  sc.turns = 2000;
  sc.injection_turn = 1000;
  sc.seed = 1;
  const auto sim = generate_trace(sc);
  const Trace tr = as_trace(sim);
  EncoderConfig ec;  // d = 32
  HashedEncoder enc(ec);
  InfluenceEstimator est(tr.header.topology, ec.dim, EstimatorConfig{});
  const auto start = std::chrono::steady_clock::now();
  for (const auto& te : tr.turns) est.process(normalize_turn(te.events, tr.header.topology, enc, te.turn));
  const double secs = seconds_since(start);
  v.detail << " runtime_2000_turns=" << secs << "s";
  v.require(secs < kEstimatorSeconds, "runtime");
  return v;
}

// ---- 2. spectral ----------------------------------------------------------------

LeadingSpectrum eigen_oracle(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.transpose() * m);
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return {ev[0], ev.size() > 1 ? ev[1] : 0.0};
}

bool invariants_hold(const SpectralSignals& s) {
  const double eps = kEpsilon;
  bool ok = s.lambda1 >= s.lambda2 && s.lambda2 >= 0.0 && s.ratio >= 0.0 && s.ratio <= 1.0 + eps &&
            s.gap >= -eps && s.gap <= 1.0 && s.entropy >= 0.0 && s.entropy <= 1.0 + 1e-12 && s.amp >= 0.0 &&
            std::isfinite(s.amp) && std::isfinite(s.phase);
  double total = 0.0, shares = 0.0;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    total += s.channel_energies[c];
    shares += s.channel_shares[c];
  }
  if (total > 0.0) ok = ok && std::abs(shares - 1.0) <= 1e-6;
  ok = ok && s.phase_shift == (s.phase > s.gap_contraction) && s.cross_channel == (s.entropy >= 0.5);
  ok = ok && !(s.first && (s.amp != 1.0 || s.gap_contraction != 0.0 || s.phase != 0.0));
  return ok;
}

Verdict criterion2() {
  Verdict v;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int bad = 0, oracle_bad = 0, oracle_checked = 0;
  double worst = 0.0;
  SpectralSignals prev;
  bool have_prev = false;
  for (int k = 0; k < kFuzzMatrices; ++k) {
    if (k % 10 == 0) have_prev = false;  // sequences of ten turns
    const auto n = static_cast<Eigen::Index>(1 + rng() % 16);
    const double density = 0.1 + 0.9 * U(rng);
    std::array<Matrix, kChannelCount> ch;
    Matrix raw = Matrix::Zero(n, n);
    for (auto& c : ch) {
      c = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          if (i != j && U(rng) < density) c(i, j) = U(rng) * std::pow(10.0, 4.0 * U(rng) - 2.0);
      raw += c;
    }
    const Matrix unified = normalize_matrix(raw);
    for (auto& c : ch) c = normalize_matrix(c);
    const auto sp = leading_spectrum(unified);
    auto s = compute_signals(sp, have_prev ? &prev : nullptr);
    apply_spread(s, channel_spread(ch));
    bad += !invariants_hold(s);
    prev = s;
    have_prev = true;
    const auto want = eigen_oracle(unified);
    const double err = std::max(std::abs(sp.lambda1 - want.lambda1), std::abs(sp.lambda2 - want.lambda2));
    worst = std::max(worst, err);
    oracle_bad += err > kSpectrumTol;
    ++oracle_checked;
  }
  v.detail << " fuzzed=" << kFuzzMatrices << " invariant_violations=" << bad << " oracle_checked=" << oracle_checked
           << " max_abs_err=" << std::scientific << std::setprecision(2) << worst;
  v.require(bad == 0, "invariants");
  v.require(oracle_bad == 0, "spectrum oracle");
  return v;
}

// ---- 3. weak link ---------------------------------------------------------------

Verdict criterion3() {
  Verdict v;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < kDigraphs; ++trial) {
    const std::size_t n = 2 + rng() % 6;
    const double density = 0.15 + 0.7 * U(rng);
    std::vector<Edge> edges;
    Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (AgentId i = 0; i < n; ++i)
      for (AgentId j = 0; j < n; ++j)
        if (i != j && U(rng) < density) {
          edges.emplace_back(i, j);
          w(i, j) = trial % 2 ? U(rng) : std::floor(U(rng) * 3) / 3;
        }
    const SystemTopology topo(n, edges);
    const std::size_t cap = topo.diameter();
    // Exhaustive simple-path enumeration up to the diameter.
    double best = 0.0;
    bool any = false;
    std::vector<AgentId> path;
    std::vector<bool> on(n, false);
    std::function<void(AgentId, double)> dfs = [&](AgentId u, double b) {
      if (path.size() >= 2) {
        best = any ? std::max(best, b) : b;
        any = true;
      }
      if (path.size() - 1 == cap) return;
      for (AgentId x = 0; x < n; ++x)
        if (!on[x] && topo.has_edge(u, x)) {
          on[x] = true;
          path.push_back(x);
          dfs(x, path.size() == 2 ? w(u, x) : std::min(b, w(u, x)));
          path.pop_back();
          on[x] = false;
        }
    };
    for (AgentId s = 0; s < n; ++s) {
      path = {s};
      on.assign(n, false);
      on[s] = true;
      dfs(s, 0.0);
    }
    double sum = 0.0, sq = 0.0;
    for (auto [i, j] : edges) {
      sum += w(i, j);
      sq += w(i, j) * w(i, j);
    }
    const double scale = sq / (sum + kEpsilon);
    const auto r = weak_link(w, topo);
    if (r.bottleneck != best || r.feasible != (best >= scale)) ++mismatches;
  }
  v.detail << " digraphs=" << kDigraphs << " mismatches=" << mismatches;
  v.require(mismatches == 0, "bottleneck or feasibility");
  return v;
}

// ---- 4. detector ----------------------------------------------------------------

SpectralSignals scripted(bool watch_on, bool phase, bool cross, double gap) {
  SpectralSignals s;
  s.first = false;
  s.lambda1_prev = 1.0;
  s.lambda1 = watch_on ? 1.2 : 0.8;
  s.amp = watch_on ? 1.3 : 0.9;
  s.gap_contraction = watch_on ? 0.05 : -0.05;
  s.gap = gap;
  s.phase_shift = phase;
  s.cross_channel = cross;
  return s;
}

Verdict criterion4() {
  Verdict v;
  int mismatches = 0;
  // Five flags at the onset turn: Watch, phase, cross-channel, weak link, and
  // whether Watch also holds on the next turn (majority of a 4-turn window).
  for (double gap : {0.25, 0.4, 1.0}) {
    const auto window = static_cast<Turn>(std::ceil(1.0 / (gap + kEpsilon)));
    for (int bits = 0; bits < 32; ++bits) {
      const bool w = bits & 1, ph = bits & 2, cr = bits & 4, link = bits & 8, second = bits & 16;
      // Reference.
      std::optional<std::pair<CascadeKind, Turn>> want;
      DetectorEvent want_onset = DetectorEvent::none;
      if (w) {
        if ((ph || cr) && link) {
          want = {CascadeKind::instant, 1};
          want_onset = DetectorEvent::instant_cascade;
        } else if (window == 1) {
          want_onset = DetectorEvent::candidate_discarded;
        } else {
          want_onset = DetectorEvent::watch_started;
          const int held = 1 + (second ? 1 : 0);
          if (2 * held >= window && (ph || cr)) want = {CascadeKind::multi_turn, window};
        }
      }
      // Implementation.
      CascadeDetector d;
      WeakLinkResult wl;
      wl.feasible = link;
      d.step(scripted(false, false, false, gap), wl, 0);
      std::optional<std::pair<CascadeKind, Turn>> got;
      DetectorEvent onset_event = DetectorEvent::none;
      for (Turn t = 1; t <= 8; ++t) {
        const auto s = t == 1 ? scripted(w, ph, cr, gap) : scripted(t == 2 && second, false, false, gap);
        const auto ev = d.step(s, wl, t);
        if (t == 1) onset_event = ev;
        if (!got && (ev == DetectorEvent::instant_cascade || ev == DetectorEvent::multi_turn_cascade))
          got = {d.last_declaration()->kind, t};
      }
      if (got != want || onset_event != want_onset) ++mismatches;
      if (got && got->first == CascadeKind::multi_turn && d.last_declaration()->t_w != 1) ++mismatches;
    }
  }
  v.detail << " combinations=32x3 mismatches=" << mismatches;
  v.require(mismatches == 0, "truth table");
  return v;
}

// ---- 5. attribution -------------------------------------------------------------

Verdict criterion5() {
  Verdict v;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int mismatches = 0, scale_breaks = 0;
  for (int trial = 0; trial < kIntervals; ++trial) {
    const std::size_t n = 2 + rng() % 5;
    std::vector<Edge> edges;
    for (AgentId i = 0; i < n; ++i)
      for (AgentId j = 0; j < n; ++j)
        if (i != j && U(rng) < 0.5) edges.emplace_back(i, j);
    if (edges.empty()) edges.emplace_back(0, 1);
    const SystemTopology topo(n, edges);
    const auto N = static_cast<Eigen::Index>(n);
    const std::size_t len = 1 + rng() % 5;
    std::vector<CachedTurn> frames;
    for (std::size_t t = 0; t < len; ++t) {
      CachedTurn f;
      f.raw = Matrix::Zero(N, N);
      for (auto& c : f.channels) {
        c = Matrix::Zero(N, N);
        for (auto [i, j] : edges) c(i, j) = U(rng) < 0.7 ? U(rng) : 0.0;
        f.raw += c;
      }
      for (auto [i, j] : edges) f.raw(i, j) += 1e-3;
      f.unified = normalize_matrix(f.raw);
      for (auto& c : f.channels) c = normalize_matrix(c);
      frames.push_back(std::move(f));
    }
    std::vector<const CachedTurn*> ptr;
    for (const auto& f : frames) ptr.push_back(&f);
    const auto r = attribute(ptr, topo, 3);

    // Direct evaluation.
    std::vector<double> o(n, 0.0), a(n, 0.0), b(n, 0.0);
    Matrix amax = frames[0].unified;
    for (std::size_t t = 0; t < len; ++t) {
      const auto& f = frames[t];
      for (AgentId i = 0; i < n; ++i) {
        double out = 0, in = 0, rout = 0, rin = 0;
        for (AgentId j = 0; j < n; ++j) {
          out += f.unified(i, j);
          in += f.unified(j, i);
          rout += f.raw(i, j);
          rin += f.raw(j, i);
        }
        if (t == 0) o[i] = out;
        a[i] += out / (in + kEpsilon);
        b[i] += rout * rin;
      }
      amax = amax.cwiseMax(f.unified);
    }
    auto first_max = [](const std::vector<double>& x) {
      return static_cast<AgentId>(std::max_element(x.begin(), x.end()) - x.begin());
    };
    const auto wl = weak_link(amax, topo);
    if (r.origin != first_max(o) || r.amplifier != first_max(a) || r.bridge != first_max(b) || r.spines.empty() ||
        r.spines[0].bottleneck != wl.bottleneck)
      ++mismatches;

    for (int s = 0; s < kScalings; ++s) {
      const double k = std::pow(10.0, 6.0 * U(rng) - 3.0);
      std::vector<CachedTurn> scaled;
      for (const auto& f : frames) {
        CachedTurn g{k * f.unified, k * f.raw, {}};
        for (std::size_t c = 0; c < kChannelCount; ++c) g.channels[c] = k * f.channels[c];
        scaled.push_back(std::move(g));
      }
      std::vector<const CachedTurn*> sp;
      for (const auto& f : scaled) sp.push_back(&f);
      const auto q = attribute(sp, topo, 3, k * kEpsilon);
      if (q.origin != r.origin || q.amplifier != r.amplifier || q.bridge != r.bridge) ++scale_breaks;
    }
  }
  v.detail << " intervals=" << kIntervals << " mismatches=" << mismatches << " scalings=" << kIntervals * kScalings
           << " argmax_changes=" << scale_breaks;
  v.require(mismatches == 0, "direct evaluation");
  v.require(scale_breaks == 0, "scale invariance");
  return v;
}

// ---- 6 & 7. end to end ----------------------------------------------------------

/// Easy-regime corpus: benign and attack traces spread over every topology,
/// attacks also over every kind, with fixed seeds.
std::vector<EvalJob> easy_corpus() {
  const TopologyKind topos[] = {TopologyKind::decentralized, TopologyKind::hierarchical, TopologyKind::hub_and_spoke};
  const AttackKind kinds[] = {AttackKind::intent, AttackKind::execution, AttackKind::coordination};
  std::vector<EvalJob> jobs;
  auto add = [&](AttackKind kind, TopologyKind topo, std::uint64_t seed) {
    ScenarioConfig c;
    c.attack = kind;
    c.topology = topo;
    c.regime = Regime::easy;
    c.seed = seed;
    if (topo == TopologyKind::hierarchical) c.agent_count = 7;
    const auto sim = generate_trace(c);
    jobs.push_back({scenario_id(c), as_trace(sim), sim.truth});
  };
  for (std::size_t k = 0; k < kBenign; ++k) add(AttackKind::none, topos[k % 3], 1000 + k);
  for (std::size_t k = 0; k < kAttacks; ++k) add(kinds[(k / 3) % 3], topos[k % 3], 2000 + k);
  return jobs;
}

Verdict criterion6(const std::vector<TraceResult>& results, double secs) {
  Verdict v;
  const double a = auroc(results), t = tpr_at_fpr(results, kFprBudget), e = edr_at_k(results, kEdrK),
               f = false_declaration_rate(results);
  double lag = 0.0;
  std::size_t fired = 0;
  for (const auto& r : results)
    if (r.truth.is_attack && r.first_alert) {
      lag += static_cast<double>(*r.first_alert - *r.truth.onset_turn);
      ++fired;
    }
  v.detail << std::setprecision(3) << " auroc=" << a << " tpr@5%=" << t << " edr@5=" << e << " fdr=" << f
           << " attacks_alerted=" << fired << "/" << kAttacks << " mean_alert_delay=" << (fired ? lag / fired : 0.0)
           << " wall=" << secs << "s";
  v.require(a >= kAurocMin, "auroc");
  v.require(t >= kTprMin, "tpr at 5% fpr");
  v.require(e >= kEdrMin, "edr@5");
  v.require(f <= kFdrMax, "false declaration rate");
  return v;
}

Verdict criterion7(const std::vector<TraceResult>& results) {
  Verdict v;
  const auto m = attribution_metrics(results);
  v.detail << std::setprecision(3) << " declared=" << m.evaluated << " origin_acc1=" << m.origin_acc1
           << " channel_acc=" << m.channel_acc << " spines=" << m.spines_scored;
  v.require(m.origin_acc1 >= kOriginMin, "origin acc@1");
  v.require(m.channel_acc >= kChannelMin, "channel accuracy");
  return v;
}

// ---- 8. metric oracles ----------------------------------------------------------

std::vector<TraceResult> labeled(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<TraceResult> out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    TraceResult r;
    r.score = s[k];
    r.truth.is_attack = y[k] == 1;
    r.truth.family = "f";
    out.push_back(r);
  }
  return out;
}

Verdict criterion8() {
  Verdict v;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<std::vector<TraceResult>> sets{labeled({0.9, 0.8, 0.4, 0.1}, {1, 0, 1, 0}),
                                             labeled({1, 1, 1, 1}, {1, 0, 1, 0}), labeled({2, 1}, {1, 0}),
                                             labeled({0.1, 0.2, 0.2, 0.3, 0.3}, {1, 0, 1, 0, 1})};
  for (int k = 0; k < 300; ++k) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      y.push_back(i < 2 ? static_cast<int>(i) : static_cast<int>(U(rng) < 0.5));
      s.push_back(k % 2 ? std::round(U(rng) * 5) / 5 : U(rng));
    }
    sets.push_back(labeled(s, y));
  }
  int auroc_bad = 0, tpr_bad = 0;
  for (const auto& r : sets) {
    double wins = 0, pairs = 0;
    for (const auto& p : r)
      for (const auto& q : r)
        if (p.truth.is_attack && !q.truth.is_attack) {
          wins += p.score > q.score ? 1.0 : p.score == q.score ? 0.5 : 0.0;
          pairs += 1;
        }
    auroc_bad += std::abs(auroc(r) - wins / pairs) > 1e-12;
    for (double budget : {0.0, 0.05, 0.25, 1.0}) {
      std::vector<double> cuts{-std::numeric_limits<double>::infinity()};
      for (const auto& x : r) cuts.push_back(x.score);
      double best = 0.0;
      for (double c : cuts) {
        double tp = 0, fp = 0, np = 0, nn = 0;
        for (const auto& x : r) {
          (x.truth.is_attack ? np : nn) += 1;
          if (x.score > c) (x.truth.is_attack ? tp : fp) += 1;
        }
        if (fp / nn <= budget) best = std::max(best, tp / np);
      }
      tpr_bad += tpr_at_fpr(r, budget) != best;
    }
  }
  const bool hand = auroc(sets[0]) == 0.75;

  BootstrapConfig bc;
  bc.seed = 42;
  const Metric m = [](const auto& x) { return auroc(x); };
  const auto i1 = bootstrap_ci(m, sets[20], bc), i2 = bootstrap_ci(m, sets[20], bc);
  const bool deterministic = i1.lo == i2.lo && i1.hi == i2.hi;
  std::vector<double> grid(101);
  for (int k = 0; k <= 100; ++k) grid[k] = k;
  const bool pct = percentile_sorted(grid, 0.025) == 2.5 && percentile_sorted(grid, 0.975) == 97.5;
  EvalSettings es;
  const auto rep = evaluation_report(sets[20], es);
  const bool reported = rep["bootstrap"]["percentiles"] == OrderedJson::parse("[2.5, 97.5]");

  v.detail << " sets=" << sets.size() << " auroc_mismatch=" << auroc_bad << " tpr_mismatch=" << tpr_bad
           << " hand_case=" << hand << " bootstrap_deterministic=" << deterministic << " percentiles_2.5/97.5="
           << (pct && reported);
  v.require(auroc_bad == 0 && hand, "auroc oracle");
  v.require(tpr_bad == 0, "tpr oracle");
  v.require(deterministic, "bootstrap determinism");
  v.require(pct && reported, "percentiles");
  return v;
}

// ---- 9. online equivalence and determinism ---------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string dir_digest(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = slurp(e.path());
  std::string all;
  for (const auto& [name, body] : files) all += name + "\n" + body;
  return all;
}

Verdict criterion9() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / ("casmon_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<ScenarioBatch> batches;
  for (auto kind : {AttackKind::none, AttackKind::intent, AttackKind::execution, AttackKind::coordination}) {
    ScenarioBatch b;
    b.scenario.attack = kind;
    b.scenario.topology = TopologyKind::hub_and_spoke;
    b.scenario.seed = 50;
    b.count = 3;
    batches.push_back(b);
  }
  simulate_to_dir(batches, std::nullopt, root / "a");
  simulate_to_dir(batches, std::nullopt, root / "b");
  const bool sim_same = dir_digest(root / "a") == dir_digest(root / "b");

  RunConfig cfg = parse_run_config(Json::object());
  cfg.timing = false;
  int stream_diff = 0, repeat_diff = 0, traces = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    if (!e.path().string().ends_with(".trace.jsonl")) continue;
    ++traces;
    auto run = [&](bool whole) {
      std::ifstream in(e.path(), std::ios::binary);
      std::ostringstream alerts, diag;
      const auto r = whole ? detect_whole(in, cfg, alerts, diag) : detect_stream(in, cfg, alerts, diag);
      return alerts.str() + "\n" + diag.str() + "\n" + r.report.dump();
    };
    const std::string s1 = run(false), s2 = run(false), w = run(true);
    stream_diff += s1 != w;
    repeat_diff += s1 != s2;
  }
  const bool eval_same =
      eval_dirs(root / "a", root / "a", cfg).dump() == eval_dirs(root / "a", root / "a", cfg, 2).dump();
  fs::remove_all(root);
  v.detail << " traces=" << traces << " stream_vs_whole_diffs=" << stream_diff << " repeat_diffs=" << repeat_diff
           << " simulate_identical=" << sim_same << " eval_identical=" << eval_same;
  v.require(stream_diff == 0, "stream vs whole");
  v.require(repeat_diff == 0 && sim_same && eval_same, "repeat determinism");
  return v;
}

// ---- 10. overhead -----------------------------------------------------------------

Verdict criterion10() {
  Verdict v;
  ScenarioConfig sc;
  sc.agent_count = 8;
  sc.attack = AttackKind::intent;
  sc.turns = 200;
  sc.seed = 7;
  const auto sim = generate_trace(sc);
  // Dense traffic: every edge and every channel active on every turn.
  detail::Generator gen(sc);
  MonitorConfig mc;
  mc.encoder.dim = 32;
  Monitor m(sim.header, mc);
  std::vector<double> ms;
  OrderedJson last;
  for (Turn t = 0; t < sc.turns; ++t) {
    TurnEvents te{t, {}};
    for (const auto& e : sim.header.topology.edges())
      for (Channel c : kChannels) te.events.push_back(gen.event(t, e, c, nullptr));
    for (const auto& o : m.process(te)) {
      ms.push_back(o.elapsed_ms);
      last = diagnostics_record(o, true);
    }
  }
  std::sort(ms.begin(), ms.end());
  const double median = ms[ms.size() / 2];
  v.detail << std::setprecision(3) << " agents=8 d=32 events_per_turn=" << sim.header.topology.edges().size() * 4
           << " median_ms=" << median << " p90_ms=" << ms[ms.size() * 9 / 10]
           << " in_diagnostics=" << last.contains("elapsed_ms");
  v.require(median <= kMedianMsMax, "median per-turn cost");
  v.require(last.contains("elapsed_ms"), "diagnostics field");
  return v;
}

}  // namespace

int main() {
  std::vector<std::pair<int, Verdict>> verdicts;
  auto report = [&](int id, Verdict v) {
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << " " << v.detail.str() << std::endl;
    verdicts.emplace_back(id, std::move(v));
  };
  report(1, criterion1());
  report(2, criterion2());
  report(3, criterion3());
  report(4, criterion4());
  report(5, criterion5());
  {
    const auto start = std::chrono::steady_clock::now();
    const auto results = run_all(easy_corpus(), MonitorConfig{});
    const double secs = seconds_since(start);
    report(6, criterion6(results, secs));
    report(7, criterion7(results));
  }
  report(8, criterion8());
  report(9, criterion9());
  report(10, criterion10());
  int failed = 0;
  for (const auto& [id, v] : verdicts) failed += !v.pass;
  std::cout << "acceptance: " << verdicts.size() - failed << "/" << verdicts.size() << " criteria pass" << std::endl;
  return failed == 0 ? 0 : 1;
}
