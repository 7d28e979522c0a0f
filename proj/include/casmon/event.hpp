#ifndef CASMON_EVENT_HPP
#define CASMON_EVENT_HPP

#include "casmon/topology.hpp"
#include "casmon/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace casmon {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Maps wire-level agent names to dense ids.
class Roster {
 public:
  Roster() = default;
  explicit Roster(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!index_.emplace(names_[i], i).second)
        throw ParseError("roster", "duplicate roster name '" + names_[i] + "'");
    }
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(AgentId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::optional<AgentId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, AgentId> index_;
};

/// First line of a trace: the agent roster and the structural edges.
struct TraceHeader {
  Roster roster;
  SystemTopology topology;
};

/// One interaction record. `tgt` is empty for a broadcast ("*").
struct ChannelEvent {
  Turn turn = 0;
  AgentId src = 0;
  std::optional<AgentId> tgt;
  Channel channel = Channel::comm;
  Json payload;
  Json meta = Json::object();

  bool is_broadcast() const noexcept { return !tgt.has_value(); }
  friend bool operator==(const ChannelEvent&, const ChannelEvent&) = default;
};

namespace detail {

inline Json parse_record(std::string_view line) {
  Json record;
  try {
    record = Json::parse(line.begin(), line.end());
  } catch (const Json::parse_error& e) {
    throw ParseError("record", std::string("malformed record: ") + e.what());
  }
  if (!record.is_object()) throw ParseError("record", "record is not a JSON object");
  return record;
}

inline const Json& require(const Json& record, const char* field) {
  auto it = record.find(field);
  if (it == record.end()) throw ParseError(field, std::string("missing field '") + field + "'");
  return *it;
}

inline AgentId resolve_agent(const Json& value, const Roster& roster, const char* field) {
  if (value.is_string()) {
    auto id = roster.find(value.get<std::string>());
    if (!id) throw ParseError(field, "unknown agent '" + value.get<std::string>() + "' in '" + field + "'");
    return *id;
  }
  if (value.is_number_unsigned() && value.get<std::size_t>() < roster.size()) return value.get<std::size_t>();
  throw ParseError(field, std::string("field '") + field + "' is not a roster name");
}

}  // namespace detail

/// Parses the roster/edges header line. Edge endpoints may be roster names or indices.
inline TraceHeader parse_header_line(std::string_view line) {
  Json record = detail::parse_record(line);
  const Json& roster_json = detail::require(record, "roster");
  if (!roster_json.is_array() || roster_json.empty())
    throw ParseError("roster", "'roster' must be a non-empty array of names");
  std::vector<std::string> names;
  for (const auto& n : roster_json) {
    if (!n.is_string()) throw ParseError("roster", "roster entries must be strings");
    names.push_back(n.get<std::string>());
  }
  Roster roster(std::move(names));

  const Json& edges_json = detail::require(record, "edges");
  if (!edges_json.is_array()) throw ParseError("edges", "'edges' must be an array of pairs");
  std::vector<Edge> edges;
  for (const auto& e : edges_json) {
    if (!e.is_array() || e.size() != 2) throw ParseError("edges", "each edge must be a pair [i, j]");
    edges.emplace_back(detail::resolve_agent(e[0], roster, "edges"),
                       detail::resolve_agent(e[1], roster, "edges"));
  }
  try {
    SystemTopology topo(roster.size(), std::move(edges));
    return TraceHeader{std::move(roster), std::move(topo)};
  } catch (const ConfigError& e) {
    throw ParseError("edges", e.what());
  }
}

/// Parses one event record against the roster declared in the header.
inline ChannelEvent parse_event_line(std::string_view line, const Roster& roster) {
  Json record = detail::parse_record(line);
  ChannelEvent ev;

  const Json& turn = detail::require(record, "turn");
  if (!turn.is_number_integer()) throw ParseError("turn", "'turn' must be an integer");
  if (turn.get<std::int64_t>() < 0) throw ParseError("turn", "'turn' must be nonnegative");
  ev.turn = turn.get<std::int64_t>();

  ev.src = detail::resolve_agent(detail::require(record, "src"), roster, "src");

  const Json& tgt = detail::require(record, "tgt");
  if (tgt.is_string() && tgt.get<std::string>() == "*") {
    ev.tgt.reset();
  } else {
    ev.tgt = detail::resolve_agent(tgt, roster, "tgt");
    if (*ev.tgt == ev.src) throw ParseError("tgt", "'tgt' equals 'src'");
  }

  const Json& channel = detail::require(record, "channel");
  if (!channel.is_string()) throw ParseError("channel", "'channel' must be a string");
  auto c = channel_from_string(channel.get<std::string>());
  if (!c) throw ParseError("channel", "unknown channel '" + channel.get<std::string>() + "'");
  ev.channel = *c;

  const Json& payload = detail::require(record, "payload");
  if (!payload.is_string() && !payload.is_object())
    throw ParseError("payload", "'payload' must be a string or an object");
  ev.payload = payload;

  if (auto it = record.find("meta"); it != record.end()) {
    if (!it->is_object()) throw ParseError("meta", "'meta' must be an object");
    ev.meta = *it;
  }
  return ev;
}

inline std::string format_header_line(const TraceHeader& header) {
  OrderedJson out;
  out["roster"] = header.roster.names();
  OrderedJson edges = OrderedJson::array();
  for (auto [i, j] : header.topology.edges()) edges.push_back({i, j});
  out["edges"] = std::move(edges);
  return out.dump();
}

inline std::string format_event_line(const ChannelEvent& ev, const Roster& roster) {
  OrderedJson out;
  out["turn"] = ev.turn;
  out["src"] = roster.name(ev.src);
  out["tgt"] = ev.tgt ? roster.name(*ev.tgt) : std::string("*");
  out["channel"] = std::string(to_string(ev.channel));
  out["payload"] = ev.payload;
  if (!ev.meta.empty()) out["meta"] = ev.meta;
  return out.dump();
}

}  // namespace casmon

#endif  // CASMON_EVENT_HPP
