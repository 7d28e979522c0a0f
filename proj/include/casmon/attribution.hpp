#ifndef CASMON_ATTRIBUTION_HPP
#define CASMON_ATTRIBUTION_HPP

#include "casmon/detector.hpp"
#include "casmon/paths.hpp"
#include "casmon/topology.hpp"
#include "casmon/types.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace casmon {

class AttributionError : public Error {
 public:
  AttributionError(std::vector<Turn> missing, const std::string& what)
      : Error(what), missing_(std::move(missing)) {}
  const std::vector<Turn>& missing() const noexcept { return missing_; }

 private:
  std::vector<Turn> missing_;
};

struct Spine {
  Path path;
  double bottleneck = 0.0;
  Channel channel = Channel::comm;
};

struct AttributionReport {
  AgentId origin = 0;
  AgentId amplifier = 0;
  AgentId bridge = 0;
  std::vector<AgentId> origin_ranking;
  std::vector<AgentId> amplifier_ranking;
  std::vector<AgentId> bridge_ranking;
  std::vector<double> origin_scores;
  std::vector<double> amplifier_scores;
  std::vector<double> bridge_scores;
  std::vector<Spine> spines;
  Turn t_w = 0;
  Turn t0 = 0;
};

/// Agent ids ordered by descending score, lowest id first on ties.
inline std::vector<AgentId> rank_desc(const std::vector<double>& scores) {
  std::vector<AgentId> order(scores.size());
  std::iota(order.begin(), order.end(), AgentId{0});
  std::stable_sort(order.begin(), order.end(), [&](AgentId a, AgentId b) { return scores[a] > scores[b]; });
  return order;
}

/// Dominant channel of a path: largest summed per-channel interval maximum.
inline Channel dominant_channel(const Path& path, const std::array<Matrix, kChannelCount>& channel_max) {
  std::size_t best = 0;
  double best_sum = -1.0;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k)
      sum += channel_max[c](static_cast<Eigen::Index>(path[k]), static_cast<Eigen::Index>(path[k + 1]));
    if (sum > best_sum) {
      best_sum = sum;
      best = c;
    }
  }
  return kChannels[best];
}

/// Roles and spines from the interval `frames` (first frame is the onset turn).
inline AttributionReport attribute(const std::vector<const CachedTurn*>& frames, const SystemTopology& topo,
                                   std::size_t k, double eps = kEpsilon) {
  if (frames.empty()) throw AttributionError({}, "attribution interval is empty");
  if (k == 0) throw ConfigError("spine count K must be positive");
  const auto n = static_cast<Eigen::Index>(topo.agent_count());

  std::vector<double> origin(static_cast<std::size_t>(n), 0.0);
  std::vector<double> amp(static_cast<std::size_t>(n), 0.0);
  std::vector<double> bridge(static_cast<std::size_t>(n), 0.0);
  const Vector onset_rows = frames.front()->unified.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) origin[static_cast<std::size_t>(i)] = onset_rows[i];

  Matrix unified_max = frames.front()->unified;
  std::array<Matrix, kChannelCount> channel_max = frames.front()->channels;
  for (const CachedTurn* f : frames) {
    const Vector rows = f->unified.rowwise().sum();
    const Vector cols = f->unified.colwise().sum().transpose();
    const Vector raw_rows = f->raw.rowwise().sum();
    const Vector raw_cols = f->raw.colwise().sum().transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      amp[static_cast<std::size_t>(i)] += rows[i] / (cols[i] + eps);
      bridge[static_cast<std::size_t>(i)] += raw_rows[i] * raw_cols[i];
    }
    unified_max = unified_max.cwiseMax(f->unified);
    for (std::size_t c = 0; c < kChannelCount; ++c) channel_max[c] = channel_max[c].cwiseMax(f->channels[c]);
  }

  AttributionReport r;
  r.origin_ranking = rank_desc(origin);
  r.amplifier_ranking = rank_desc(amp);
  r.bridge_ranking = rank_desc(bridge);
  r.origin = r.origin_ranking.front();
  r.amplifier = r.amplifier_ranking.front();
  r.bridge = r.bridge_ranking.front();
  r.origin_scores = std::move(origin);
  r.amplifier_scores = std::move(amp);
  r.bridge_scores = std::move(bridge);
  for (auto& p : top_k_paths(unified_max, topo, k))
    r.spines.push_back({p.path, p.bottleneck, dominant_channel(p.path, channel_max)});
  return r;
}

/// Attribution over [t_w, t0] read from the cache; every turn must be present.
inline AttributionReport attribute(const InfluenceCache& cache, Turn t_w, Turn t0, const SystemTopology& topo,
                                   std::size_t k, double eps = kEpsilon) {
  if (t0 < t_w) throw AttributionError({}, "attribution interval ends before it starts");
  const auto missing = cache.missing(t_w, t0);
  if (!missing.empty()) {
    std::string list;
    for (Turn t : missing) list += (list.empty() ? "" : ",") + std::to_string(t);
    throw AttributionError(missing, "influence cache is missing turns " + list);
  }
  std::vector<const CachedTurn*> frames;
  for (Turn t = t_w; t <= t0; ++t) frames.push_back(&cache.at(t));
  AttributionReport r = attribute(frames, topo, k, eps);
  r.t_w = t_w;
  r.t0 = t0;
  return r;
}

}  // namespace casmon

#endif  // CASMON_ATTRIBUTION_HPP
