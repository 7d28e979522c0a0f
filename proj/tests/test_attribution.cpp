#include "casmon/attribution.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace casmon;

namespace {

CachedTurn frame(const Matrix& unified, const Matrix& raw, std::array<Matrix, 4> channels) {
  return CachedTurn{unified, raw, std::move(channels)};
}

std::array<Matrix, 4> zeros(Eigen::Index n) {
  return {Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};
}

std::vector<const CachedTurn*> ptrs(const std::vector<CachedTurn>& v) {
  std::vector<const CachedTurn*> out;
  for (const auto& f : v) out.push_back(&f);
  return out;
}

/// First index of the maximum.
AgentId argmax(const std::vector<double>& v) {
  AgentId best = 0;
  for (AgentId i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct Direct {
  AgentId origin, amplifier, bridge;
  double top_bottleneck;
};

/// Straight transcription of the role formulas and the spine objective.
Direct direct(const std::vector<CachedTurn>& frames, const SystemTopology& topo) {
  const auto n = topo.agent_count();
  std::vector<double> o(n, 0.0), a(n, 0.0), b(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) o[i] += frames[0].unified(i, j);
  Matrix amax = frames[0].unified;
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < n; ++i) {
      double out = 0, in = 0, rout = 0, rin = 0;
      for (std::size_t j = 0; j < n; ++j) {
        out += f.unified(i, j);
        in += f.unified(j, i);
        rout += f.raw(i, j);
        rin += f.raw(j, i);
      }
      a[i] += out / (in + kEpsilon);
      b[i] += rout * rin;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) amax(i, j) = std::max(amax(i, j), f.unified(i, j));
  }
  return {argmax(o), argmax(a), argmax(b), weak_link(amax, topo).bottleneck};
}

std::vector<CachedTurn> random_interval(std::mt19937_64& rng, const SystemTopology& topo) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(topo.agent_count());
  const std::size_t len = 1 + rng() % 5;
  std::vector<CachedTurn> frames;
  for (std::size_t t = 0; t < len; ++t) {
    auto ch = zeros(n);
    for (auto [i, j] : topo.edges())
      for (auto& c : ch) c(i, j) = U(rng) < 0.7 ? U(rng) : 0.0;
    Matrix raw = ch[0] + ch[1] + ch[2] + ch[3];
    // Keep every structural edge strictly positive in the unified matrix.
    for (auto [i, j] : topo.edges()) raw(i, j) += 1e-3;
    std::array<Matrix, 4> norm;
    for (std::size_t c = 0; c < 4; ++c) norm[c] = normalize_matrix(ch[c]);
    frames.push_back(frame(normalize_matrix(raw), raw, norm));
  }
  return frames;
}

SystemTopology random_topology(std::mt19937_64& rng) {
  const std::size_t n = 3 + rng() % 4;
  std::vector<Edge> edges;
  for (AgentId i = 0; i < n; ++i)
    for (AgentId j = 0; j < n; ++j)
      if (i != j && rng() % 2) edges.emplace_back(i, j);
  if (edges.empty()) edges.emplace_back(0, 1);
  return SystemTopology(n, edges);
}

}  // namespace

TEST(Attribution, SingleFrameOriginIsDominantRow) {
  SystemTopology topo(3, {{0, 1}, {1, 2}, {2, 0}, {2, 1}});
  Matrix u = Matrix::Zero(3, 3);
  u(0, 1) = 0.2;
  u(1, 2) = 0.3;
  u(2, 0) = 0.5;
  u(2, 1) = 0.4;
  std::vector<CachedTurn> f{frame(u, u, zeros(3))};
  const auto r = attribute(ptrs(f), topo, 3);
  EXPECT_EQ(r.origin, 2u);
  EXPECT_EQ(r.origin_ranking, (std::vector<AgentId>{2, 1, 0}));
}

TEST(Attribution, HandEvaluatedRoles) {
  // Two turns, three agents on a complete graph.
  SystemTopology topo(3, {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}});
  Matrix u1(3, 3), u2(3, 3), r1(3, 3), r2(3, 3);
  u1 << 0, 0.6, 0.2, 0.1, 0, 0.1, 0.1, 0.1, 0;
  u2 << 0, 0.2, 0.1, 0.1, 0, 0.7, 0.1, 0.1, 0;
  r1 << 0, 2, 1, 1, 0, 1, 0, 1, 0;
  r2 << 0, 1, 0, 1, 0, 3, 1, 1, 0;
  std::vector<CachedTurn> f{frame(u1, r1, zeros(3)), frame(u2, r2, zeros(3))};
  const auto r = attribute(ptrs(f), topo, 2);
  // Origin: onset row sums 0.8, 0.2, 0.2.
  EXPECT_EQ(r.origin, 0u);
  EXPECT_NEAR(r.origin_scores[0], 0.8, 1e-12);
  // Amplifier: out/in summed over turns.
  //   agent 0: 0.8/0.2 + 0.3/0.2 = 5.5; agent 1: 0.2/0.7 + 0.8/0.3 = 2.952; agent 2: 0.2/0.3 + 0.2/0.8 = 0.917
  EXPECT_EQ(r.amplifier, 0u);
  EXPECT_NEAR(r.amplifier_scores[0], 5.5, 1e-6);
  EXPECT_NEAR(r.amplifier_scores[1], 0.2 / 0.7 + 0.8 / 0.3, 1e-6);
  // Bridge: raw out*in summed. agent 0: 3*1 + 1*2 = 5; agent 1: 2*3 + 4*2 = 14; agent 2: 1*2 + 2*3 = 8
  EXPECT_EQ(r.bridge, 1u);
  EXPECT_NEAR(r.bridge_scores[1], 14.0, 1e-12);
  EXPECT_NEAR(r.bridge_scores[2], 8.0, 1e-12);
  // Interval maximum: best single edge is 1->2 at 0.7, then 0->1 at 0.6.
  ASSERT_EQ(r.spines.size(), 2u);
  EXPECT_EQ(r.spines[0].path, (Path{1, 2}));
  EXPECT_DOUBLE_EQ(r.spines[0].bottleneck, 0.7);
  EXPECT_EQ(r.spines[1].path, (Path{0, 1}));
}

TEST(Attribution, SpineChannelIsChannelArgmax) {
  SystemTopology topo(3, {{0, 1}, {1, 2}});
  Matrix u = topo.mask();
  auto ch = zeros(3);
  ch[0](0, 1) = 0.6;  // comm
  ch[0](1, 2) = 0.5;
  ch[1](0, 1) = 0.9;  // mem is larger on one edge but smaller in sum
  ch[3](1, 2) = 0.3;
  std::vector<CachedTurn> f{frame(u, u, ch)};
  const auto r = attribute(ptrs(f), topo, 3);
  ASSERT_EQ(r.spines.size(), 3u);
  // Equal bottlenecks: the prefix [0,1] sorts ahead of [0,1,2].
  EXPECT_EQ(r.spines[0].path, (Path{0, 1}));
  EXPECT_EQ(r.spines[0].channel, Channel::mem);
  EXPECT_EQ(r.spines[1].path, (Path{0, 1, 2}));
  EXPECT_EQ(r.spines[1].channel, Channel::comm);
  EXPECT_EQ(dominant_channel({0, 1}, ch), Channel::mem);
}

TEST(Attribution, KLimitsSpines) {
  SystemTopology topo(3, {{0, 1}, {1, 2}, {2, 0}});
  std::vector<CachedTurn> f{frame(topo.mask(), topo.mask(), zeros(3))};
  EXPECT_EQ(attribute(ptrs(f), topo, 1).spines.size(), 1u);
  EXPECT_EQ(attribute(ptrs(f), topo, 4).spines.size(), 4u);
  EXPECT_THROW(attribute(ptrs(f), topo, 0), ConfigError);
}

TEST(Attribution, RandomIntervalsMatchDirectEvaluation) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const auto topo = random_topology(rng);
    const auto frames = random_interval(rng, topo);
    const auto r = attribute(ptrs(frames), topo, 3);
    const Direct d = direct(frames, topo);
    EXPECT_EQ(r.origin, d.origin);
    EXPECT_EQ(r.amplifier, d.amplifier);
    EXPECT_EQ(r.bridge, d.bridge);
    ASSERT_FALSE(r.spines.empty());
    EXPECT_EQ(r.spines[0].bottleneck, d.top_bottleneck);
    for (std::size_t k = 1; k < r.spines.size(); ++k) EXPECT_GE(r.spines[k - 1].bottleneck, r.spines[k].bottleneck);
    for (const auto& s : r.spines) {
      EXPECT_LE(s.path.size() - 1, topo.diameter());
      for (std::size_t k = 0; k + 1 < s.path.size(); ++k) EXPECT_TRUE(topo.has_edge(s.path[k], s.path[k + 1]));
    }
  }
}

TEST(Attribution, RoleArgmaxScaleInvariant) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto topo = random_topology(rng);
    const auto frames = random_interval(rng, topo);
    const auto base = attribute(ptrs(frames), topo, 3);
    for (int s = 0; s < 10; ++s) {
      const double k = std::pow(10.0, U(rng));
      std::vector<CachedTurn> scaled;
      for (const auto& f : frames) {
        std::array<Matrix, 4> ch;
        for (std::size_t c = 0; c < 4; ++c) ch[c] = k * f.channels[c];
        scaled.push_back(frame(k * f.unified, k * f.raw, ch));
      }
      // Scaling eps with the data keeps the amplifier ratio degree 0.
      const auto r = attribute(ptrs(scaled), topo, 3, k * kEpsilon);
      EXPECT_EQ(r.origin, base.origin);
      EXPECT_EQ(r.amplifier, base.amplifier);
      EXPECT_EQ(r.bridge, base.bridge);
    }
  }
}

TEST(Attribution, CacheIntervalAndMissingTurns) {
  SystemTopology topo(3, {{0, 1}, {1, 2}});
  InfluenceCache cache;
  for (Turn t : {4, 5, 7}) cache.put(t, frame(topo.mask(), topo.mask(), zeros(3)));
  const auto r = attribute(cache, 4, 5, topo, 3);
  EXPECT_EQ(r.t_w, 4);
  EXPECT_EQ(r.t0, 5);
  try {
    attribute(cache, 4, 8, topo, 3);
    FAIL();
  } catch (const AttributionError& e) {
    EXPECT_EQ(e.missing(), (std::vector<Turn>{6, 8}));
    EXPECT_NE(std::string(e.what()).find("6,8"), std::string::npos);
  }
}

TEST(Attribution, InstantCascadeUsesSingleTurnFormulas) {
  std::mt19937_64 rng(13);
  const auto topo = random_topology(rng);
  auto frames = random_interval(rng, topo);
  frames.resize(1);
  const auto r = attribute(ptrs(frames), topo, 2);
  const Vector rows = frames[0].unified.rowwise().sum(), cols = frames[0].unified.colwise().sum().transpose();
  const Vector rr = frames[0].raw.rowwise().sum(), rc = frames[0].raw.colwise().sum().transpose();
  for (AgentId i = 0; i < topo.agent_count(); ++i) {
    EXPECT_NEAR(r.amplifier_scores[i], rows[i] / (cols[i] + kEpsilon), 1e-12);
    EXPECT_NEAR(r.bridge_scores[i], rr[i] * rc[i], 1e-12);
  }
}

TEST(Attribution, DeterministicTieBreak) {
  SystemTopology topo(3, {{0, 1}, {1, 0}, {1, 2}, {2, 1}});
  std::vector<CachedTurn> f{frame(topo.mask(), topo.mask(), zeros(3))};
  const auto r = attribute(ptrs(f), topo, 4);
  EXPECT_EQ(r.origin, 1u);  // row sums 1, 2, 1
  EXPECT_EQ(r.origin_ranking, (std::vector<AgentId>{1, 0, 2}));
  EXPECT_EQ(r.spines[0].path, (Path{0, 1}));
  EXPECT_EQ(r.spines[1].path, (Path{0, 1, 2}));
}
