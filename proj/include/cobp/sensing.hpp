#pragma once

// Dithered uniform quantized sensing q = Q(Phi x + xi), with the midrise
// quantizer Q(t) = delta * (floor(t / delta) + 1/2) applied componentwise.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "cobp/errors.hpp"
#include "cobp/linalg.hpp"
#include "cobp/rng.hpp"

namespace qcs {

enum class Distribution { Gaussian, Bernoulli, UniformSym };

inline std::string_view to_string(Distribution d) {
  switch (d) {
    case Distribution::Gaussian: return "gaussian";
    case Distribution::Bernoulli: return "bernoulli";
    case Distribution::UniformSym: return "uniform";
  }
  return "?";
}

inline Distribution distribution_from_string(std::string_view s) {
  if (s == "gaussian") return Distribution::Gaussian;
  if (s == "bernoulli") return Distribution::Bernoulli;
  if (s == "uniform") return Distribution::UniformSym;
  throw InvalidConfig("unknown distribution tag: " + std::string(s));
}

/// Bin width for a B-bit regime: 6 * 2^(1 - B).
inline double delta_from_bits(int bits) {
  detail::require_config(bits >= 1, "delta_from_bits: bits must be >= 1");
  return std::ldexp(6.0, 1 - bits);
}

struct QuantizerConfig {
  double delta = 1.0;
  std::optional<int> bits;

  static QuantizerConfig from_delta(double delta) {
    detail::require_config(delta > 0.0 && std::isfinite(delta), "quantizer: delta must be > 0");
    return QuantizerConfig{delta, std::nullopt};
  }
  static QuantizerConfig from_bits(int bits) { return QuantizerConfig{delta_from_bits(bits), bits}; }

  void validate() const {
    detail::require_config(delta > 0.0 && std::isfinite(delta), "quantizer: delta must be > 0");
    if (bits) {
      detail::require_config(*bits >= 1, "quantizer: bits must be >= 1");
      detail::require_config(delta == delta_from_bits(*bits), "quantizer: delta inconsistent with bits");
    }
  }
};

/// Midrise quantizer. Bins are left-closed: t = k*delta maps to (k + 1/2)*delta.
inline double quantize(double t, double delta) {
  detail::require_config(delta > 0.0, "quantize: delta must be > 0");
  return delta * (std::floor(t / delta) + 0.5);
}

struct SensingEnsemble {
  DenseMatrix phi;  // M x N
  Distribution dist = Distribution::Gaussian;
  Vector dither;    // length M, entries in [-delta/2, delta/2]
  std::uint64_t seed = 0;

  Eigen::Index measurements() const { return phi.rows(); }
  Eigen::Index dimension() const { return phi.cols(); }
};

struct QuantizedMeasurements {
  Vector q;
  double delta = 1.0;

  Eigen::Index size() const { return q.size(); }
};

/// Draws Phi (row by row) then the dither from one SplitMix64 stream seeded by
/// `seed`. Gaussian: N(0,1); Bernoulli: +-1; UniformSym: U[-sqrt 3, sqrt 3].
inline SensingEnsemble draw_ensemble(Eigen::Index m, Eigen::Index n, Distribution dist, double delta,
                                     std::uint64_t seed) {
  detail::require_config(m >= 1 && n >= 1, "draw_ensemble: M and N must be >= 1");
  detail::require_config(delta > 0.0, "draw_ensemble: delta must be > 0");
  SplitMix64 rng(seed);
  SensingEnsemble ens;
  ens.dist = dist;
  ens.seed = seed;
  ens.phi.resize(m, n);
  const double root3 = std::sqrt(3.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      switch (dist) {
        case Distribution::Gaussian: ens.phi(i, j) = rng.normal(); break;
        case Distribution::Bernoulli: ens.phi(i, j) = rng.rademacher(); break;
        case Distribution::UniformSym: ens.phi(i, j) = rng.uniform(-root3, root3); break;
      }
    }
  }
  ens.dither.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) ens.dither(i) = rng.uniform(-0.5 * delta, 0.5 * delta);
  return ens;
}

inline QuantizedMeasurements sense(const Eigen::Ref<const Vector>& x, const SensingEnsemble& ens,
                                   const QuantizerConfig& cfg) {
  cfg.validate();
  detail::require(x.size() == ens.dimension(), "sense: signal length does not match Phi");
  detail::require(ens.dither.size() == ens.measurements(), "sense: dither length does not match Phi");
  detail::require(x.allFinite(), "sense: non-finite signal");
  QuantizedMeasurements out;
  out.delta = cfg.delta;
  out.q = ens.phi * x + ens.dither;
  for (auto& v : out.q) v = quantize(v, cfg.delta);
  return out;
}

/// max_i |(Phi u + xi - q)_i|, the consistency residual.
inline double consistency_residual(const Eigen::Ref<const Vector>& u, const QuantizedMeasurements& q,
                                   const SensingEnsemble& ens) {
  detail::require(u.size() == ens.dimension(), "consistency: signal length does not match Phi");
  detail::require(q.size() == ens.measurements(), "consistency: q length does not match Phi");
  return (ens.phi * u + ens.dither - q.q).lpNorm<Eigen::Infinity>();
}

inline bool is_consistent(const Eigen::Ref<const Vector>& u, const QuantizedMeasurements& q,
                          const SensingEnsemble& ens, const QuantizerConfig& cfg, double tol = 0.0) {
  detail::require(tol >= 0.0, "is_consistent: tol must be >= 0");
  return consistency_residual(u, q, ens) <= 0.5 * cfg.delta + tol;
}

/// Fraction of measurements outside the two central bins {-delta/2, +delta/2}.
inline double saturation_fraction(const QuantizedMeasurements& q) {
  if (q.size() == 0) return 0.0;
  Eigen::Index outside = 0;
  for (const double v : q.q) {
    if (std::abs(std::abs(v) - 0.5 * q.delta) > 1e-9 * q.delta) ++outside;
  }
  return static_cast<double>(outside) / static_cast<double>(q.size());
}

/// True when every q_i lies on the lattice delta * (Z + 1/2).
inline bool on_lattice(const QuantizedMeasurements& q, double tol = 1e-9) {
  for (const double v : q.q) {
    const double k = v / q.delta - 0.5;
    if (std::abs(k - std::round(k)) > tol) return false;
  }
  return true;
}

}  // namespace qcs
