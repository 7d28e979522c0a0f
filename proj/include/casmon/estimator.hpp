#ifndef CASMON_ESTIMATOR_HPP
#define CASMON_ESTIMATOR_HPP

#include "casmon/influence.hpp"
#include "casmon/random.hpp"
#include "casmon/trace.hpp"
#include "casmon/types.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

namespace casmon {

/// Streaming conditional-dependence estimator parameters.
struct EstimatorConfig {
  double alpha = 0.3;         ///< target-history EMA rate
  double beta = 0.05;         ///< covariance decay; 0 gives the cumulative average
  double shrink = 0.1;        ///< correlation shrinkage toward the identity
  double jitter = 1e-6;       ///< diagonal jitter before factorization
  double tensor_decay = 0.2;  ///< cumulative tensor smoothing rate
  std::size_t warmup = 8;     ///< observations per triplet before scores are emitted
  double epsilon = kEpsilon;
  std::size_t proj_dim = 4;        ///< compact projection width per block
  double significance = 1e-4;      ///< null-rejection level of the evidence gate; 0 disables
  std::size_t reservoir = 256;     ///< rank-sketch capacity per dimension
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("estimator.alpha must be in (0, 1]");
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("estimator.beta must be in [0, 1)");
    if (!(shrink >= 0.0 && shrink < 1.0)) throw ConfigError("estimator.shrink must be in [0, 1)");
    if (!(jitter >= 0.0 && jitter < 1.0)) throw ConfigError("estimator.jitter must be in [0, 1)");
    if (!(tensor_decay > 0.0 && tensor_decay < 1.0))
      throw ConfigError("estimator.tensor_decay must be in (0, 1)");
    if (!(epsilon > 0.0 && epsilon < 1e-2)) throw ConfigError("estimator.epsilon must be in (0, 1e-2)");
    if (proj_dim == 0 || proj_dim > 32) throw ConfigError("estimator.proj_dim must be in [1, 32]");
    if (!(significance >= 0.0 && significance < 1.0))
      throw ConfigError("estimator.significance must be in [0, 1)");
    if (reservoir < 8) throw ConfigError("estimator.reservoir must be at least 8");
  }
};

/// h <- (1 - alpha) h + alpha v; an absent observation leaves h unchanged.
inline Vector update_history(const Vector& prev, const std::optional<Vector>& v_bar, double alpha) {
  if (!v_bar) return prev;
  return (1.0 - alpha) * prev + alpha * (*v_bar);
}

/// Per-dimension reservoir used to map a value to a standard-normal score
/// through its empirical rank.
class RankSketch {
 public:
  explicit RankSketch(std::size_t capacity = 256) : capacity_(capacity) { samples_.reserve(capacity); }

  /// Rank of `x` against the retained samples (ties count half, `x` itself
  /// counts half), mapped through the standard-normal quantile. Then `x` is
  /// offered to the reservoir.
  double normal_score(double x, std::mt19937_64& rng) {
    const auto lo = std::lower_bound(samples_.begin(), samples_.end(), x);
    const auto hi = std::upper_bound(lo, samples_.end(), x);
    const auto less = static_cast<double>(lo - samples_.begin());
    const auto equal = static_cast<double>(hi - lo);
    const double q = (less + 0.5 * equal + 0.5) / static_cast<double>(samples_.size() + 1);
    offer(x, rng);
    // Double precision throughout; the default policy promotes to long double.
    using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
    static const boost::math::normal_distribution<double, Policy> kStd;
    return boost::math::quantile(kStd, q);
  }

  std::size_t size() const noexcept { return samples_.size(); }
  std::uint64_t seen() const noexcept { return seen_; }

 private:
  // Samples are kept sorted. Evicting the element at a uniform position is
  // the classic reservoir rule; the slot order carries no information.
  void offer(double x, std::mt19937_64& rng) {
    ++seen_;
    if (samples_.size() < capacity_) {
      samples_.insert(std::upper_bound(samples_.begin(), samples_.end(), x), x);
      return;
    }
    const std::uint64_t slot = uniform_index(rng, seen_);
    if (slot >= capacity_) return;
    samples_.erase(samples_.begin() + static_cast<std::ptrdiff_t>(slot));
    samples_.insert(std::upper_bound(samples_.begin(), samples_.end(), x), x);
  }

  std::size_t capacity_;
  std::vector<double> samples_;
  std::uint64_t seen_ = 0;
};

/// Streaming state of one edge-channel triplet over the concatenated
/// (u, v, h) compact vector.
class EdgeChannelState {
 public:
  EdgeChannelState(std::size_t dim_u, std::size_t dim_v, std::size_t dim_h, std::size_t reservoir = 256,
                   std::uint64_t seed = 0)
      : dim_u_(dim_u), dim_v_(dim_v), dim_h_(dim_h), rng_(seed) {
    const std::size_t p = dim_u + dim_v + dim_h;
    sketches_.assign(p, RankSketch(reservoir));
    mean_ = Vector::Zero(static_cast<Eigen::Index>(p));
    cov_ = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  }

  std::size_t dim_u() const noexcept { return dim_u_; }
  std::size_t dim_v() const noexcept { return dim_v_; }
  std::size_t dim_h() const noexcept { return dim_h_; }
  std::size_t dim() const noexcept { return dim_u_ + dim_v_ + dim_h_; }
  std::uint64_t count() const noexcept { return count_; }
  std::uint64_t singular_blocks() const noexcept { return singular_; }
  const Matrix& covariance() const noexcept { return cov_; }

  /// Effective sample size of the exponentially weighted covariance.
  double effective_samples() const noexcept { return weight_sq_ > 0.0 ? 1.0 / weight_sq_ : 0.0; }

  /// Rank-normalizes `x` and folds it into the smoothed mean/covariance.
  void observe(const Vector& x, double beta) {
    Vector z(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) z[k] = sketches_[static_cast<std::size_t>(k)].normal_score(x[k], rng_);
    ++count_;
    // Bias-corrected exponential weighting: the normalized weights are
    // proportional to (1 - beta)^age from the first observation on.
    decay_pow_ *= 1.0 - beta;
    const double w = beta > 0.0 ? beta / (1.0 - decay_pow_) : 1.0 / static_cast<double>(count_);
    const Vector delta = z - mean_;
    mean_ += w * delta;
    cov_.selfadjointView<Eigen::Lower>().rankUpdate(delta, w);
    cov_ *= 1.0 - w;
    cov_.triangularView<Eigen::StrictlyUpper>() = cov_.transpose();
    weight_sq_ = (1.0 - w) * (1.0 - w) * weight_sq_ + w * w;
  }

  void note_singular() noexcept { ++singular_; }

 private:
  std::size_t dim_u_, dim_v_, dim_h_;
  std::vector<RankSketch> sketches_;
  std::mt19937_64 rng_;
  Vector mean_;
  Matrix cov_;
  double weight_sq_ = 0.0;
  double decay_pow_ = 1.0;
  std::uint64_t count_ = 0;
  std::uint64_t singular_ = 0;
};

namespace detail {

template <class M>
std::optional<double> log_det_spd(const M& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::LLT<M> llt(m);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto diag = llt.matrixLLT().diagonal();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < diag.size(); ++k) {
    if (!(diag[k] > 0.0)) return std::nullopt;
    acc += std::log(diag[k]);
  }
  return 2.0 * acc;
}

// Stack-allocated storage for the usual triplet sizes (three blocks of at
// most five dimensions); larger layouts use the heap.
constexpr Eigen::Index kSmallTriplet = 16;
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kSmallTriplet, kSmallTriplet>;

// One Cholesky factor L of the covariance reordered as [H | U | V] gives
// both conditionals: V given (H, U) from the diagonal of L_VV, and V given H
// as L_VU L_VU^T + L_VV L_VV^T. Then I = 1/2 (ld S_V|H - ld S_V|HU).
template <class M>
std::optional<double> gaussian_cmi_impl(const Matrix& sigma, Eigen::Index a, Eigen::Index b, Eigen::Index c) {
  const Eigen::Index p = a + b + c;
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, 1, 0, M::MaxRowsAtCompileTime, 1> order(p);
  for (Eigen::Index k = 0; k < c; ++k) order[k] = a + b + k;
  for (Eigen::Index k = 0; k < a + b; ++k) order[c + k] = k;
  M s(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i) s(i, j) = sigma(order[i], order[j]);
  Eigen::LLT<M> llt(s);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const M& l = llt.matrixLLT();
  if (!(l.diagonal().array() > 0.0).all()) return std::nullopt;
  if (a == 0 || b == 0) return 0.0;
  const auto lvu = l.block(c + a, c, b, a);
  const auto lvv = l.block(c + a, c + a, b, b).template triangularView<Eigen::Lower>();
  M v_given_h = lvu * lvu.transpose();
  v_given_h.noalias() += M(lvv) * M(lvv).transpose();
  const auto ld_vh = log_det_spd<M>(v_given_h);
  if (!ld_vh) return std::nullopt;
  double ld_vhu = 0.0;
  for (Eigen::Index k = c + a; k < p; ++k) ld_vhu += 2.0 * std::log(l(k, k));
  return 0.5 * (*ld_vh - ld_vhu);
}

}  // namespace detail

/// Gaussian conditional mutual information I(U;V|H) in nats for a joint
/// covariance laid out as [U | V | H], from a single Cholesky factorization.
/// Returns nullopt if the covariance is not positive definite.
inline std::optional<double> gaussian_cmi(const Matrix& sigma, std::size_t du, std::size_t dv, std::size_t dh) {
  const auto a = static_cast<Eigen::Index>(du), b = static_cast<Eigen::Index>(dv),
             c = static_cast<Eigen::Index>(dh);
  if (sigma.rows() != a + b + c || sigma.cols() != a + b + c)
    throw Error("gaussian_cmi: block sizes do not match the covariance");
  if (a + b + c <= detail::kSmallTriplet) return detail::gaussian_cmi_impl<detail::SmallMatrix>(sigma, a, b, c);
  return detail::gaussian_cmi_impl<Matrix>(sigma, a, b, c);
}

/// Converts a covariance to a correlation matrix, shrinks it toward the
/// identity and adds diagonal jitter. Dimensions with no variance are
/// decoupled.
inline Matrix regularized_correlation(const Matrix& cov, double shrink, double jitter) {
  const Eigen::Index p = cov.rows();
  Vector inv_sd(p);
  for (Eigen::Index k = 0; k < p; ++k) inv_sd[k] = cov(k, k) > 1e-12 ? 1.0 / std::sqrt(cov(k, k)) : 0.0;
  Matrix out(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i)
      out(i, j) = i == j ? 1.0 + jitter : (1.0 - shrink) * inv_sd[i] * cov(i, j) * inv_sd[j];
  return out;
}

/// Upper `alpha` quantile of chi-square with `dof` degrees of freedom (0 when
/// the gate is off).
inline double evidence_critical_value(std::size_t dof, double alpha) {
  if (alpha <= 0.0) return 0.0;
  boost::math::chi_squared_distribution<double> chi2(static_cast<double>(dof));
  return boost::math::quantile(boost::math::complement(chi2, alpha));
}

/// Smallest CMI (nats) distinguishable from independence at level `alpha`
/// for a `du x dv` cross block estimated from `n_eff` samples; the plug-in
/// statistic 2 n I is asymptotically chi-square with du*dv degrees of freedom.
inline double evidence_threshold(std::size_t du, std::size_t dv, double n_eff, double alpha) {
  if (alpha <= 0.0 || n_eff <= 0.0) return 0.0;
  return evidence_critical_value(du * dv, alpha) / (2.0 * n_eff);
}

/// Scores one observation of a triplet given the precomputed chi-square
/// critical value of the evidence gate.
inline double score_edge_channel(const Vector& u, const Vector& v, const Vector& h_prev,
                                 EdgeChannelState& state, const EstimatorConfig& cfg, double critical) {
  if (static_cast<std::size_t>(u.size()) != state.dim_u() || static_cast<std::size_t>(v.size()) != state.dim_v() ||
      static_cast<std::size_t>(h_prev.size()) != state.dim_h())
    throw Error("score_edge_channel: vector dimensions do not match the triplet state");
  if (!u.allFinite() || !v.allFinite() || !h_prev.allFinite())
    throw Error("score_edge_channel: non-finite input vector");

  Vector x(static_cast<Eigen::Index>(state.dim()));
  x << u, v, h_prev;
  state.observe(x, cfg.beta);
  if (state.count() < cfg.warmup) return 0.0;

  const Matrix sigma = regularized_correlation(state.covariance(), cfg.shrink, cfg.jitter);
  auto cmi = gaussian_cmi(sigma, state.dim_u(), state.dim_v(), state.dim_h());
  if (!cmi) {
    state.note_singular();
    return 0.0;
  }
  const double score = std::max(0.0, *cmi);
  const double n_eff = state.effective_samples();
  if (n_eff > 0.0 && score < critical / (2.0 * n_eff)) return 0.0;
  return score;
}

/// Scores one observation of a triplet. Updates `state` first; returns 0
/// during warmup, below the evidence threshold, or when a block is singular.
inline double score_edge_channel(const Vector& u, const Vector& v, const Vector& h_prev,
                                 EdgeChannelState& state, const EstimatorConfig& cfg) {
  return score_edge_channel(u, v, h_prev, state, cfg,
                            evidence_critical_value(state.dim_u() * state.dim_v(), cfg.significance));
}

/// Count-sketch projection from the encoder width to the compact width:
/// input k lands in output k mod out_dim with a seeded sign, so inputs that
/// are adjacent in the encoder layout (the exec slots) stay separated and no
/// single large-valued input leaks into every output. Identity when the
/// encoder width does not exceed the compact width.
class CompactProjection {
 public:
  CompactProjection() = default;
  CompactProjection(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
    if (in_dim <= out_dim) {
      matrix_ = Matrix::Identity(static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(in_dim));
      return;
    }
    std::mt19937_64 rng(seed ^ 0xC0FFEEull);
    matrix_ = Matrix::Zero(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim));
    for (Eigen::Index c = 0; c < matrix_.cols(); ++c)
      matrix_(c % matrix_.rows(), c) = (rng() >> 63) ? 1.0 : -1.0;
  }

  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  Vector apply(const Vector& x) const { return matrix_ * x; }
  const Matrix& matrix() const noexcept { return matrix_; }

 private:
  Matrix matrix_;
};

/// Maintains histories, triplet states and the cumulative tensor for one
/// monitored session.
class InfluenceEstimator {
 public:
  InfluenceEstimator(const SystemTopology& topo, std::size_t feature_dim, EstimatorConfig cfg)
      : topo_(topo), cfg_(cfg), feature_dim_(feature_dim), tensor_(topo) {
    cfg_.validate();
    projection_ = CompactProjection(feature_dim, cfg_.proj_dim, cfg_.seed);
    const std::size_t k = projection_.out_dim();
    critical_ = evidence_critical_value(k * k, cfg_.significance);
  }

  const EstimatorConfig& config() const noexcept { return cfg_; }
  const InfluenceTensor& tensor() const noexcept { return tensor_; }

  /// Scores every bucket against the pre-turn histories, then updates
  /// histories and the tensor. Returns the scores of this turn.
  std::map<TripletKey, double> process(const TurnBatch& batch) {
    std::map<TripletKey, double> scores;
    const std::size_t k = projection_.out_dim();
    for (const auto& [key, bucket] : batch.buckets) {
      auto it = states_.find(key);
      if (it == states_.end()) {
        const std::uint64_t seed = cfg_.seed ^ (key.src * 0x9E3779B97F4A7C15ull) ^
                                   (key.tgt * 0xC2B2AE3D27D4EB4Full) ^ (index_of(key.channel) + 1);
        it = states_.emplace(key, EdgeChannelState(k, k, k, cfg_.reservoir, seed)).first;
      }
      const Vector& h = history(key.tgt, key.channel);
      scores[key] = score_edge_channel(projection_.apply(bucket.source), projection_.apply(bucket.target),
                                       projection_.apply(h), it->second, cfg_, critical_);
    }
    for (const auto& [key, v_bar] : batch.target_states) {
      histories_[key] = update_history(history(key.agent, key.channel), v_bar, cfg_.alpha);
    }
    tensor_.update(scores, cfg_.tensor_decay);
    return scores;
  }

  /// Advances one turn with no events (evidence decays).
  void skip_turn() { tensor_.update({}, cfg_.tensor_decay); }

  std::uint64_t singular_blocks() const {
    std::uint64_t n = 0;
    for (const auto& [key, s] : states_) n += s.singular_blocks();
    return n;
  }

 private:
  const Vector& history(AgentId agent, Channel c) {
    auto [it, fresh] = histories_.try_emplace(AgentChannelKey{agent, c});
    if (fresh) it->second = Vector::Zero(static_cast<Eigen::Index>(feature_dim_));
    return it->second;
  }

  SystemTopology topo_;
  EstimatorConfig cfg_;
  std::size_t feature_dim_;
  CompactProjection projection_;
  double critical_ = 0.0;
  std::map<TripletKey, EdgeChannelState> states_;
  std::map<AgentChannelKey, Vector> histories_;
  InfluenceTensor tensor_;
};

}  // namespace casmon

#endif  // CASMON_ESTIMATOR_HPP
