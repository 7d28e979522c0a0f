#ifndef CASMON_DETECTOR_HPP
#define CASMON_DETECTOR_HPP

#include "casmon/influence.hpp"
#include "casmon/paths.hpp"
#include "casmon/spectral.hpp"
#include "casmon/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace casmon {

struct DetectorConfig {
  double epsilon = kEpsilon;
  std::size_t cache_min_turns = 64;
  /// Upper clamp on the persistence window. The window grows without bound as
  /// the gap closes; the clamp keeps a candidate resolvable.
  std::size_t max_window = 64;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1e-2)) throw ConfigError("detector.epsilon must be in (0, 0.01)");
    if (cache_min_turns < 1) throw ConfigError("detector.cache_min_turns must be >= 1");
    if (max_window < 1) throw ConfigError("detector.max_window must be >= 1");
  }
};

enum class DetectorEvent { none, watch_started, instant_cascade, multi_turn_cascade, candidate_discarded };
enum class CascadeKind { instant, multi_turn };

inline const char* to_string(DetectorEvent e) noexcept {
  switch (e) {
    case DetectorEvent::none: return "none";
    case DetectorEvent::watch_started: return "watch_started";
    case DetectorEvent::instant_cascade: return "instant_cascade";
    case DetectorEvent::multi_turn_cascade: return "multi_turn_cascade";
    case DetectorEvent::candidate_discarded: return "candidate_discarded";
  }
  return "none";
}

inline const char* to_string(CascadeKind k) noexcept { return k == CascadeKind::instant ? "instant" : "multi_turn"; }

/// W = ceil(1 / (g + eps)), clamped to [1, max_window].
inline std::size_t persistence_window(double gap, double eps, std::size_t max_window) {
  const double inv = 1.0 / (gap + eps);
  if (!(inv > 1.0)) return 1;
  if (inv >= static_cast<double>(max_window)) return max_window;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(inv)));
}

/// Flags recorded for one turn of an open candidate.
struct TurnFlags {
  Turn turn = 0;
  bool watch = false;
  bool phase_shift = false;
  bool cross_channel = false;
};

struct Declaration {
  Turn turn = 0;
  CascadeKind kind = CascadeKind::instant;
  Turn t_w = 0;
  Turn t0 = 0;
  std::size_t window = 1;
  SpectralSignals signals;
};

/// Watch / instant / multi-turn confirmation state machine.
class CascadeDetector {
 public:
  explicit CascadeDetector(DetectorConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const DetectorConfig& config() const noexcept { return cfg_; }
  bool active() const noexcept { return t_w_.has_value(); }
  std::optional<Turn> watch_onset() const noexcept { return t_w_; }
  std::optional<Turn> confirmation_turn() const noexcept { return t0_; }
  std::optional<std::size_t> window() const noexcept { return window_; }
  const std::vector<TurnFlags>& flags() const noexcept { return flags_; }
  const std::optional<Declaration>& last_declaration() const noexcept { return last_; }

  /// Turns the cache must keep: the open candidate's interval plus headroom.
  std::size_t retention() const noexcept {
    return std::max(cfg_.cache_min_turns, 2 * window_.value_or(0));
  }

  DetectorEvent step(const SpectralSignals& s, const WeakLinkResult& weak, Turn turn) {
    const bool w = watch(s);
    const TurnFlags f{turn, w, s.phase_shift, s.cross_channel};
    if (!t_w_) {
      if (!w) return DetectorEvent::none;
      if ((s.phase_shift || s.cross_channel) && weak.feasible) {
        declare(turn, CascadeKind::instant, turn, turn, 1, s);
        return DetectorEvent::instant_cascade;
      }
      const std::size_t win = persistence_window(s.gap, cfg_.epsilon, cfg_.max_window);
      if (win == 1) return DetectorEvent::candidate_discarded;
      t_w_ = turn;
      window_ = win;
      t0_ = turn + static_cast<Turn>(win) - 1;
      flags_.assign(1, f);
      return DetectorEvent::watch_started;
    }

    flags_.push_back(f);
    if (turn < *t0_) return DetectorEvent::none;

    std::size_t held = 0;
    bool transition = false;
    for (const auto& x : flags_) {
      held += x.watch ? 1 : 0;
      transition = transition || x.phase_shift || x.cross_channel;
    }
    const bool majority = 2 * held >= *window_;
    if (majority && transition) {
      declare(turn, CascadeKind::multi_turn, *t_w_, *t0_, *window_, s);
      reset();
      return DetectorEvent::multi_turn_cascade;
    }
    reset();
    return DetectorEvent::candidate_discarded;
  }

 private:
  void declare(Turn turn, CascadeKind kind, Turn t_w, Turn t0, std::size_t win, const SpectralSignals& s) {
    last_ = Declaration{turn, kind, t_w, t0, win, s};
  }

  void reset() {
    t_w_.reset();
    t0_.reset();
    window_.reset();
    flags_.clear();
  }

  DetectorConfig cfg_;
  std::optional<Turn> t_w_;
  std::optional<Turn> t0_;
  std::optional<std::size_t> window_;
  std::vector<TurnFlags> flags_;
  std::optional<Declaration> last_;
};

/// Matrices kept per turn for attribution.
struct CachedTurn {
  Matrix unified;
  Matrix raw;
  std::array<Matrix, kChannelCount> channels;
};

inline CachedTurn cached_turn(const NormalizedInfluence& n) { return {n.unified, n.raw, n.channels}; }

/// Turn-keyed influence history with bounded retention.
class InfluenceCache {
 public:
  void put(Turn turn, CachedTurn entry) { turns_[turn] = std::move(entry); }

  /// Keeps the last `retain` turns up to `now`, and every turn from `pin` on.
  void trim(Turn now, std::size_t retain, std::optional<Turn> pin = std::nullopt) {
    Turn floor = now - static_cast<Turn>(retain) + 1;
    if (pin) floor = std::min(floor, *pin);
    turns_.erase(turns_.begin(), turns_.lower_bound(floor));
  }

  bool contains(Turn t) const { return turns_.count(t) != 0; }
  const CachedTurn& at(Turn t) const { return turns_.at(t); }
  std::size_t size() const noexcept { return turns_.size(); }
  std::optional<Turn> oldest() const {
    if (turns_.empty()) return std::nullopt;
    return turns_.begin()->first;
  }

  std::vector<Turn> missing(Turn from, Turn to) const {
    std::vector<Turn> out;
    for (Turn t = from; t <= to; ++t)
      if (!contains(t)) out.push_back(t);
    return out;
  }

 private:
  std::map<Turn, CachedTurn> turns_;
};

}  // namespace casmon

#endif  // CASMON_DETECTOR_HPP
