#ifndef CASMON_TRACE_HPP
#define CASMON_TRACE_HPP

#include "casmon/encoder.hpp"
#include "casmon/event.hpp"
#include "casmon/topology.hpp"

#include <compare>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace casmon {

/// Key of a directed edge-channel triplet.
struct TripletKey {
  AgentId src = 0;
  AgentId tgt = 0;
  Channel channel = Channel::comm;

  friend auto operator<=>(const TripletKey&, const TripletKey&) = default;
};

/// Key of an agent-channel history slot.
struct AgentChannelKey {
  AgentId agent = 0;
  Channel channel = Channel::comm;

  friend auto operator<=>(const AgentChannelKey&, const AgentChannelKey&) = default;
};

/// Averaged source/target features of all events on one triplet in one turn.
struct Bucket {
  Vector source;
  Vector target;
  std::size_t count = 0;
};

/// Normalized events of one turn, grouped by feasible triplet.
struct TurnBatch {
  Turn turn = 0;
  std::map<TripletKey, Bucket> buckets;
  /// Mean target-side vector over every event affecting the agent on the channel.
  std::map<AgentChannelKey, Vector> target_states;
};

/// Expands broadcasts over the structural out-neighbours of the sender and
/// drops events whose (src, tgt) pair is not a structural edge.
inline std::vector<ChannelEvent> expand_events(std::span<const ChannelEvent> events,
                                               const SystemTopology& topo) {
  std::vector<ChannelEvent> out;
  out.reserve(events.size());
  for (const auto& ev : events) {
    if (ev.src >= topo.agent_count()) continue;
    if (ev.is_broadcast()) {
      for (AgentId j : topo.out_neighbors(ev.src)) {
        ChannelEvent directed = ev;
        directed.tgt = j;
        out.push_back(std::move(directed));
      }
    } else if (topo.has_edge(ev.src, *ev.tgt)) {
      out.push_back(ev);
    }
  }
  return out;
}

/// Builds the per-turn triplet buckets. Events are assumed to share `turn`.
inline TurnBatch normalize_turn(std::span<const ChannelEvent> events, const SystemTopology& topo,
                                const FeatureEncoder& encoder, Turn turn) {
  TurnBatch batch;
  batch.turn = turn;
  std::map<AgentChannelKey, std::pair<Vector, std::size_t>> target_sums;
  auto add = [&](const EncodedEvent& enc, AgentId src, AgentId tgt, Channel channel) {
    auto [it, fresh] = batch.buckets.try_emplace(TripletKey{src, tgt, channel});
    if (fresh) {
      it->second.source = enc.source;
      it->second.target = enc.target;
    } else {
      it->second.source += enc.source;
      it->second.target += enc.target;
    }
    ++it->second.count;

    auto [ts, ts_fresh] = target_sums.try_emplace(AgentChannelKey{tgt, channel});
    if (ts_fresh) {
      ts->second = {enc.target, 1};
    } else {
      ts->second.first += enc.target;
      ++ts->second.second;
    }
  };
  // Same result as encoding expand_events(events, topo) one by one; the
  // encoding does not depend on the target, so a broadcast is encoded once.
  for (const auto& ev : events) {
    if (ev.src >= topo.agent_count()) continue;
    if (ev.is_broadcast()) {
      const auto& outs = topo.out_neighbors(ev.src);
      if (outs.empty()) continue;
      const EncodedEvent enc = encoder.encode(ev);
      for (AgentId j : outs) add(enc, ev.src, j, ev.channel);
    } else if (topo.has_edge(ev.src, *ev.tgt)) {
      add(encoder.encode(ev), ev.src, *ev.tgt, ev.channel);
    }
  }
  for (auto& [key, bucket] : batch.buckets) {
    const double inv = 1.0 / static_cast<double>(bucket.count);
    bucket.source *= inv;
    bucket.target *= inv;
  }
  for (auto& [key, sum] : target_sums) {
    batch.target_states.emplace(key, sum.first / static_cast<double>(sum.second));
  }
  return batch;
}

inline TurnBatch normalize_turn(std::span<const ChannelEvent> events, const SystemTopology& topo,
                                const FeatureEncoder& encoder) {
  return normalize_turn(events, topo, encoder, events.empty() ? Turn{0} : events.front().turn);
}

/// All events of one turn, in arrival order.
struct TurnEvents {
  Turn turn = 0;
  std::vector<ChannelEvent> events;
};

/// Incremental reader over the line-delimited wire format.
///
/// Feed lines one at a time; a turn is released once the first record of a
/// later turn arrives (or on `finish`). Records for a turn that was already
/// released are rejected.
class TraceReader {
 public:
  /// Returns the turn completed by this line, if any. Blank lines are ignored.
  std::optional<TurnEvents> feed(std::string_view line) {
    ++line_number_;
    if (line.find_first_not_of(" \t\r\n") == std::string_view::npos) return std::nullopt;
    try {
      if (!header_) {
        header_ = parse_header_line(line);
        return std::nullopt;
      }
      ChannelEvent ev = parse_event_line(line, header_->roster);
      if (last_released_ && ev.turn <= *last_released_)
        throw ParseError("turn", "turn " + std::to_string(ev.turn) + " arrives after turn " +
                                     std::to_string(*last_released_) + " was closed");
      std::optional<TurnEvents> released;
      if (pending_ && ev.turn < pending_->turn)
        throw ParseError("turn", "turn " + std::to_string(ev.turn) + " arrives after turn " +
                                     std::to_string(pending_->turn));
      if (pending_ && ev.turn > pending_->turn) {
        last_released_ = pending_->turn;
        released = std::move(pending_);
        pending_.reset();
      }
      if (!pending_) pending_ = TurnEvents{ev.turn, {}};
      pending_->events.push_back(std::move(ev));
      return released;
    } catch (const ParseError& e) {
      throw ParseError(e.field(), "line " + std::to_string(line_number_) + ": " + e.what());
    }
  }

  /// Releases the last open turn at end of input.
  std::optional<TurnEvents> finish() {
    if (!header_) throw ParseError("roster", "trace has no header line");
    if (!pending_) return std::nullopt;
    last_released_ = pending_->turn;
    auto out = std::move(pending_);
    pending_.reset();
    return out;
  }

  bool has_header() const noexcept { return header_.has_value(); }
  const TraceHeader& header() const { return header_.value(); }
  std::size_t line_number() const noexcept { return line_number_; }

 private:
  std::optional<TraceHeader> header_;
  std::optional<TurnEvents> pending_;
  std::optional<Turn> last_released_;
  std::size_t line_number_ = 0;
};

/// A fully loaded trace.
struct Trace {
  TraceHeader header;
  std::vector<TurnEvents> turns;
};

inline Trace read_trace(std::istream& in) {
  TraceReader reader;
  Trace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (auto t = reader.feed(line)) trace.turns.push_back(std::move(*t));
  }
  if (auto t = reader.finish()) trace.turns.push_back(std::move(*t));
  trace.header = reader.header();
  return trace;
}

}  // namespace casmon

#endif  // CASMON_TRACE_HPP
