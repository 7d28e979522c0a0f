#ifndef CASMON_TOPOLOGY_HPP
#define CASMON_TOPOLOGY_HPP

#include "casmon/types.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace casmon {

using Edge = std::pair<AgentId, AgentId>;

/// Structural possibility graph over a dense agent id range [0, N).
///
/// Edges are directed, deduplicated and kept sorted, so iteration order is
/// stable. The diameter (longest finite shortest-path length) is computed
/// once at construction; a topology with no edges has diameter 0.
class SystemTopology {
 public:
  SystemTopology() = default;

  SystemTopology(std::size_t agent_count, std::vector<Edge> edges)
      : agent_count_(agent_count), edges_(std::move(edges)) {
    if (agent_count_ == 0) throw ConfigError("topology: agent_count must be positive");
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    adjacency_.assign(agent_count_ * agent_count_, false);
    out_.assign(agent_count_, {});
    for (auto [i, j] : edges_) {
      if (i >= agent_count_ || j >= agent_count_)
        throw ConfigError("topology: edge endpoint out of range (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
      if (i == j) throw ConfigError("topology: self-loop on agent " + std::to_string(i));
      adjacency_[i * agent_count_ + j] = true;
      out_[i].push_back(j);
    }
    diameter_ = compute_diameter();
  }

  std::size_t agent_count() const noexcept { return agent_count_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<AgentId>& out_neighbors(AgentId i) const { return out_.at(i); }
  std::size_t diameter() const noexcept { return diameter_; }

  bool has_edge(AgentId i, AgentId j) const noexcept {
    return i < agent_count_ && j < agent_count_ && adjacency_[i * agent_count_ + j];
  }

  /// Boolean mask with 1 on structural edges.
  Matrix mask() const {
    Matrix m = Matrix::Zero(agent_count_, agent_count_);
    for (auto [i, j] : edges_) m(i, j) = 1.0;
    return m;
  }

 private:
  std::size_t compute_diameter() const {
    std::size_t best = 0;
    constexpr auto kUnseen = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(agent_count_);
    for (AgentId s = 0; s < agent_count_; ++s) {
      std::fill(dist.begin(), dist.end(), kUnseen);
      dist[s] = 0;
      std::deque<AgentId> queue{s};
      while (!queue.empty()) {
        AgentId u = queue.front();
        queue.pop_front();
        for (AgentId v : out_[u]) {
          if (dist[v] != kUnseen) continue;
          dist[v] = dist[u] + 1;
          best = std::max(best, dist[v]);
          queue.push_back(v);
        }
      }
    }
    return best;
  }

  std::size_t agent_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<bool> adjacency_;
  std::vector<std::vector<AgentId>> out_;
  std::size_t diameter_ = 0;
};

}  // namespace casmon

#endif  // CASMON_TOPOLOGY_HPP
