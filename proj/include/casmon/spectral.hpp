#ifndef CASMON_SPECTRAL_HPP
#define CASMON_SPECTRAL_HPP

#include "casmon/types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>

namespace casmon {

/// The two largest singular values, lambda1 >= lambda2 >= 0.
struct LeadingSpectrum {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

namespace detail {

inline void require_finite(const Matrix& m) {
  if (!m.allFinite()) throw Error("leading_spectrum: matrix has non-finite entries");
}

/// Top eigenpair of a symmetric PSD matrix by power iteration.
inline double power_top(const Matrix& g, Vector& x, double tol, int max_iter) {
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector y = g * x;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    y /= norm;
    const double next = y.dot(g * y);
    const bool done = std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next));
    lambda = next;
    x = y;
    if (done) break;
  }
  return std::max(lambda, 0.0);
}

}  // namespace detail

/// Leading singular values by power iteration on M^T M with one deflation step.
inline LeadingSpectrum leading_spectrum_power(const Matrix& m, double tol = 1e-9, int max_iter = 500) {
  detail::require_finite(m);
  if (m.size() == 0) return {};
  const Matrix gram = m.transpose() * m;
  const Eigen::Index n = gram.rows();
  // Deterministic, strictly positive start keeps the Perron direction in span.
  Vector x = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (Eigen::Index k = 0; k < n; ++k) x[k] += 1e-3 * static_cast<double>(k + 1) / static_cast<double>(n);
  x.normalize();
  const double l1 = detail::power_top(gram, x, tol, max_iter);
  const Matrix deflated = gram - l1 * x * x.transpose();
  Vector y = Vector::Constant(n, 1.0);
  for (Eigen::Index k = 0; k < n; ++k) y[k] = (k % 2 == 0 ? 1.0 : -1.0) + 1e-3 * static_cast<double>(k);
  y -= x.dot(y) * x;
  if (y.norm() == 0.0) return {std::sqrt(l1), 0.0};
  y.normalize();
  const double l2 = detail::power_top(deflated, y, tol, max_iter);
  return {std::sqrt(l1), std::sqrt(std::min(l2, l1))};
}

/// Leading singular values; exact SVD up to 64 agents, power iteration above.
inline LeadingSpectrum leading_spectrum(const Matrix& m) {
  detail::require_finite(m);
  if (m.size() == 0) return {};
  if (m.rows() > 64 || m.cols() > 64) return leading_spectrum_power(m);
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  return {s.size() > 0 ? s[0] : 0.0, s.size() > 1 ? s[1] : 0.0};
}

/// Per-turn spectral signals of the unified normalized matrix plus the
/// cross-channel spread of the per-channel matrices.
struct SpectralSignals {
  Turn turn = 0;
  bool first = true;  ///< no predecessor turn
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda1_prev = 0.0;
  double energy = 0.0;           ///< lambda1 + lambda2
  double amp = 1.0;              ///< E_t / (E_{t-1} + eps)
  double ratio = 0.0;            ///< lambda2 / (lambda1 + eps)
  double gap = 1.0;              ///< 1 - ratio
  double gap_contraction = 0.0;  ///< g_{t-1} - g_t
  double phase = 0.0;            ///< |R_t - R_{t-1}| / (R_{t-1} + eps)
  bool phase_shift = false;      ///< phase > gap_contraction
  std::array<double, kChannelCount> channel_energies{};
  std::array<double, kChannelCount> channel_shares{};
  double entropy = 0.0;  ///< normalized Shannon entropy of the shares
  bool cross_channel = false;
};

/// Fills the unified-matrix fields. With no predecessor the turn is neutral:
/// amp = 1, no gap contraction, no phase change.
inline SpectralSignals compute_signals(LeadingSpectrum now, const SpectralSignals* prev,
                                       double eps = kEpsilon) {
  SpectralSignals s;
  s.lambda1 = now.lambda1;
  s.lambda2 = now.lambda2;
  s.energy = now.lambda1 + now.lambda2;
  s.ratio = now.lambda2 / (now.lambda1 + eps);
  s.gap = 1.0 - s.ratio;
  if (prev == nullptr) return s;

  s.first = false;
  s.lambda1_prev = prev->lambda1;
  s.amp = s.energy / (prev->energy + eps);
  s.gap_contraction = prev->gap - s.gap;
  s.phase = std::abs(s.ratio - prev->ratio) / (prev->ratio + eps);
  s.phase_shift = s.phase > s.gap_contraction;
  return s;
}

struct ChannelSpread {
  std::array<double, kChannelCount> energies{};
  std::array<double, kChannelCount> shares{};
  double entropy = 0.0;
  bool cross_channel = false;
};

/// Channel energies (leading singular value per channel), their shares, and
/// the entropy of the shares normalized by log |C|. Flag is inclusive at 0.5.
inline ChannelSpread channel_spread(const std::array<double, kChannelCount>& energies, double eps = kEpsilon) {
  ChannelSpread out;
  out.energies = energies;
  double total = 0.0;
  for (double e : energies) total += e;
  double h = 0.0;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const double p = energies[c] / (total + eps);
    out.shares[c] = p;
    if (p > 0.0) h -= p * std::log(p);
  }
  out.entropy = h / std::log(static_cast<double>(kChannelCount));
  out.cross_channel = out.entropy >= 0.5;
  return out;
}

inline ChannelSpread channel_spread(const std::array<Matrix, kChannelCount>& channel_matrices,
                                    double eps = kEpsilon) {
  std::array<double, kChannelCount> energies{};
  for (std::size_t c = 0; c < kChannelCount; ++c) energies[c] = leading_spectrum(channel_matrices[c]).lambda1;
  return channel_spread(energies, eps);
}

inline void apply_spread(SpectralSignals& s, const ChannelSpread& spread) {
  s.channel_energies = spread.energies;
  s.channel_shares = spread.shares;
  s.entropy = spread.entropy;
  s.cross_channel = spread.cross_channel;
}

/// Onset predicate: energy growth, gap contraction, and a rising dominant mode.
inline bool watch(const SpectralSignals& s, double lambda1_prev) {
  if (s.first) return false;
  return s.amp > 1.0 && s.gap_contraction > 0.0 && s.lambda1 > lambda1_prev;
}

inline bool watch(const SpectralSignals& s) { return watch(s, s.lambda1_prev); }

/// Per-turn propagation evidence: amp * max(dg, 0) + [phase] + [cross] while
/// Watch holds, 0 otherwise.
inline double propagation_evidence(const SpectralSignals& s) {
  if (!watch(s)) return 0.0;
  return s.amp * std::max(s.gap_contraction, 0.0) + (s.phase_shift ? 1.0 : 0.0) + (s.cross_channel ? 1.0 : 0.0);
}

}  // namespace casmon

#endif  // CASMON_SPECTRAL_HPP
