#ifndef CASMON_INFLUENCE_HPP
#define CASMON_INFLUENCE_HPP

#include "casmon/topology.hpp"
#include "casmon/trace.hpp"
#include "casmon/types.hpp"

#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace casmon {

/// Cumulative nonnegative N x N x |C| influence estimates, masked by the topology.
class InfluenceTensor {
 public:
  InfluenceTensor() = default;

  explicit InfluenceTensor(const SystemTopology& topo) : mask_(topo.mask()) {
    const auto n = static_cast<Eigen::Index>(topo.agent_count());
    for (auto& s : slices_) s = Matrix::Zero(n, n);
  }

  std::size_t agent_count() const noexcept { return static_cast<std::size_t>(mask_.rows()); }
  const Matrix& slice(Channel c) const { return slices_[index_of(c)]; }
  const Matrix& mask() const noexcept { return mask_; }

  double at(AgentId i, AgentId j, Channel c) const {
    return slices_[index_of(c)](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  /// Sum over channels.
  Matrix raw() const {
    Matrix out = slices_[0];
    for (std::size_t c = 1; c < kChannelCount; ++c) out += slices_[c];
    return out;
  }

  /// Decays every feasible entry by (1 - decay) and adds decay * score on the
  /// scored triplets.
  void update(const std::map<TripletKey, double>& scores, double decay) {
    if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("tensor decay must be in (0, 1)");
    for (const auto& [key, score] : scores) {
      if (!(score >= 0.0) || !std::isfinite(score))
        throw std::invalid_argument("influence score must be finite and nonnegative");
      if (key.src >= agent_count() || key.tgt >= agent_count() ||
          mask_(static_cast<Eigen::Index>(key.src), static_cast<Eigen::Index>(key.tgt)) == 0.0)
        throw std::invalid_argument("score on infeasible triplet (" + std::to_string(key.src) + "," +
                                    std::to_string(key.tgt) + ")");
    }
    for (auto& s : slices_) s = (1.0 - decay) * s.cwiseProduct(mask_);
    for (const auto& [key, score] : scores) {
      slices_[index_of(key.channel)](static_cast<Eigen::Index>(key.src),
                                     static_cast<Eigen::Index>(key.tgt)) += decay * score;
    }
  }

 private:
  Matrix mask_;
  std::array<Matrix, kChannelCount> slices_;
};

inline InfluenceTensor update_tensor(InfluenceTensor tensor, const std::map<TripletKey, double>& scores,
                                     double decay) {
  tensor.update(scores, decay);
  return tensor;
}

/// Degree-aware normalization: A(i,j) / (sqrt(r_i * c_j) + eps) with r, c the
/// row and column sums of A.
inline Matrix normalize_matrix(const Matrix& a, double eps = kEpsilon) {
  const Vector r = a.rowwise().sum();
  const Vector c = a.colwise().sum().transpose();
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out(i, j) = a(i, j) / (std::sqrt(r[i] * c[j]) + eps);
  return out;
}

/// Matrices derived from the tensor each turn.
struct NormalizedInfluence {
  Matrix raw;                                  ///< channel sum, unnormalized
  std::array<Matrix, kChannelCount> channels;  ///< per-channel normalized slices
  Matrix unified;                              ///< normalized channel sum
};

inline NormalizedInfluence normalize(const InfluenceTensor& tensor, double eps = kEpsilon) {
  NormalizedInfluence out;
  out.raw = tensor.raw();
  for (Channel c : kChannels) out.channels[index_of(c)] = normalize_matrix(tensor.slice(c), eps);
  out.unified = normalize_matrix(out.raw, eps);
  return out;
}

}  // namespace casmon

#endif  // CASMON_INFLUENCE_HPP
