#ifndef CASMON_PATHS_HPP
#define CASMON_PATHS_HPP

#include "casmon/topology.hpp"
#include "casmon/types.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

namespace casmon {

using Path = std::vector<AgentId>;

/// Widest length-capped path versus the energy-weighted edge scale.
struct WeakLinkResult {
  double bottleneck = 0.0;    ///< B: best min-edge weight over simple paths
  double energy_scale = 0.0;  ///< sum w^2 / (sum w + eps) over structural edges
  bool feasible = true;       ///< B >= energy_scale
  Path witness;               ///< a simple path attaining B (empty without edges)
};

namespace detail {

/// Drops cycles from a walk, keeping the first visit of each node.
inline Path simplify_walk(const Path& walk) {
  Path out;
  for (AgentId v : walk) {
    auto it = std::find(out.begin(), out.end(), v);
    if (it != out.end()) out.erase(it + 1, out.end());
    else out.push_back(v);
  }
  return out;
}

inline double path_bottleneck(const Matrix& w, const Path& p) {
  double b = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < p.size(); ++k)
    b = std::min(b, w(static_cast<Eigen::Index>(p[k]), static_cast<Eigen::Index>(p[k + 1])));
  return p.size() < 2 ? 0.0 : b;
}

}  // namespace detail

/// Bottleneck (widest-path) dynamic program over (node, hops) states with
/// hops <= diameter. A bottleneck-optimal walk can always be shortened to a
/// simple path of no smaller bottleneck, so the walk optimum equals the
/// simple-path optimum.
inline WeakLinkResult weak_link(const Matrix& weights, const SystemTopology& topo, double eps = kEpsilon) {
  WeakLinkResult out;
  const auto& edges = topo.edges();
  if (edges.empty()) return out;

  double sum = 0.0, sum_sq = 0.0;
  for (auto [i, j] : edges) {
    const double w = weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    sum += w;
    sum_sq += w * w;
  }
  out.energy_scale = sum_sq / (sum + eps);

  const std::size_t n = topo.agent_count();
  const std::size_t hops = std::max<std::size_t>(topo.diameter(), 1);
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  constexpr AgentId kNoPred = std::numeric_limits<AgentId>::max();
  // best[h][v]: widest walk with exactly h edges ending at v; pred for recovery.
  std::vector<std::vector<double>> best(hops + 1, std::vector<double>(n, kNone));
  std::vector<std::vector<AgentId>> pred(hops + 1, std::vector<AgentId>(n, kNoPred));
  for (std::size_t h = 1; h <= hops; ++h) {
    for (auto [i, j] : edges) {
      const double w = weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double cand = h == 1 ? w : std::min(best[h - 1][i], w);
      if (cand > best[h][j] || (cand == best[h][j] && i < pred[h][j])) {
        best[h][j] = cand;
        pred[h][j] = i;
      }
    }
  }

  double top = kNone;
  std::size_t top_h = 0;
  AgentId top_v = 0;
  for (std::size_t h = 1; h <= hops; ++h)
    for (AgentId v = 0; v < n; ++v)
      if (best[h][v] > top) {
        top = best[h][v];
        top_h = h;
        top_v = v;
      }

  Path walk{top_v};
  AgentId cur = top_v;
  for (std::size_t h = top_h; h >= 1; --h) {
    cur = pred[h][cur];
    walk.push_back(cur);
  }
  std::reverse(walk.begin(), walk.end());

  out.bottleneck = top;
  out.witness = detail::simplify_walk(walk);
  out.feasible = out.bottleneck >= out.energy_scale;
  return out;
}

/// A ranked propagation path.
struct RankedPath {
  Path path;
  double bottleneck = 0.0;
};

/// The `k` best simple paths (1..diameter edges, positive weights only) by
/// min-edge weight, ties broken by the lexicographically smaller node
/// sequence. Best-first expansion: extending a path never raises its
/// bottleneck, so paths leave the queue in rank order.
inline std::vector<RankedPath> top_k_paths(const Matrix& weights, const SystemTopology& topo, std::size_t k) {
  struct Entry {
    double bottleneck;
    Path path;
  };
  auto lower = [](const Entry& a, const Entry& b) {
    if (a.bottleneck != b.bottleneck) return a.bottleneck < b.bottleneck;
    return a.path > b.path;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower)> queue(lower);
  const std::size_t max_edges = topo.diameter();
  auto weight = [&](AgentId i, AgentId j) {
    return weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  };
  for (auto [i, j] : topo.edges())
    if (weight(i, j) > 0.0) queue.push({weight(i, j), {i, j}});

  std::vector<RankedPath> out;
  while (!queue.empty() && out.size() < k) {
    Entry top = queue.top();
    queue.pop();
    if (top.path.size() - 1 < max_edges) {
      const AgentId last = top.path.back();
      for (AgentId next : topo.out_neighbors(last)) {
        if (weight(last, next) <= 0.0) continue;
        if (std::find(top.path.begin(), top.path.end(), next) != top.path.end()) continue;
        Entry ext{std::min(top.bottleneck, weight(last, next)), top.path};
        ext.path.push_back(next);
        queue.push(std::move(ext));
      }
    }
    out.push_back({std::move(top.path), top.bottleneck});
  }
  return out;
}

}  // namespace casmon

#endif  // CASMON_PATHS_HPP
