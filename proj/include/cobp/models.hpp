#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cobp/errors.hpp"
#include "cobp/linalg.hpp"
#include "cobp/rng.hpp"

namespace qcs {

/// K-sparse vectors in R^N; atomic norm l1, radius sqrt(K).
struct SparseModel {
  Eigen::Index N = 1;
  Eigen::Index K = 1;
};

/// Rank-r n x n matrices (column-stacked, N = n^2); atomic norm nuclear, radius sqrt(r).
struct LowRankModel {
  Eigen::Index n = 1;
  Eigen::Index r = 1;
};

class AtomicModel {
 public:
  using Variant = std::variant<SparseModel, LowRankModel>;

  static AtomicModel sparse(Eigen::Index N, Eigen::Index K) {
    detail::require(N >= 1 && K >= 1 && K <= N, "sparse model: need 1 <= K <= N");
    return AtomicModel(SparseModel{N, K});
  }
  static AtomicModel low_rank(Eigen::Index n, Eigen::Index r) {
    detail::require(n >= 1 && r >= 1 && r <= n, "low-rank model: need 1 <= r <= n");
    return AtomicModel(LowRankModel{n, r});
  }

  bool is_sparse() const { return std::holds_alternative<SparseModel>(v_); }
  bool is_low_rank() const { return std::holds_alternative<LowRankModel>(v_); }
  const Variant& variant() const { return v_; }

  /// Ambient (vectorized) dimension.
  Eigen::Index dimension() const {
    return std::visit([](const auto& m) -> Eigen::Index {
      if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SparseModel>) return m.N;
      else return m.n * m.n;
    }, v_);
  }

  /// Radius s with K-bar_s = {||u||_# <= s, ||u||_2 <= 1}.
  double radius() const {
    return std::visit([](const auto& m) -> double {
      if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SparseModel>) return std::sqrt(static_cast<double>(m.K));
      else return std::sqrt(static_cast<double>(m.r));
    }, v_);
  }

  std::string norm_name() const { return is_sparse() ? "l1" : "nuclear"; }

 private:
  explicit AtomicModel(Variant v) : v_(v) {}
  Variant v_;
};

namespace detail {
inline void check_dim(const Eigen::Ref<const Vector>& u, const AtomicModel& model, const char* who) {
  require(u.size() == model.dimension(), std::string(who) + ": dimension does not match model");
}

inline Eigen::Index side(const AtomicModel& model) { return std::get<LowRankModel>(model.variant()).n; }
}  // namespace detail

inline double atomic_norm(const Eigen::Ref<const Vector>& u, const AtomicModel& model) {
  detail::check_dim(u, model, "atomic_norm");
  if (model.is_sparse()) return u.lpNorm<1>();
  return svd(matricize(u, detail::side(model))).sigma.sum();
}

inline Vector soft_threshold(const Eigen::Ref<const Vector>& u, double tau) {
  Vector z(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double a = std::abs(u(i)) - tau;
    z(i) = a > 0.0 ? std::copysign(a, u(i)) : 0.0;
  }
  return z;
}

/// Singular value soft-thresholding of an n x n matrix.
inline DenseMatrix singular_value_threshold(const Eigen::Ref<const DenseMatrix>& m, double tau) {
  SvdResult s = svd(m);
  Vector shrunk = (s.sigma.array() - tau).max(0.0).matrix();
  return s.U * shrunk.asDiagonal() * s.V.transpose();
}

/// prox of tau * ||.||_#: soft threshold (l1) or SVT (nuclear).
inline Vector prox_atomic(const Eigen::Ref<const Vector>& u, double tau, const AtomicModel& model) {
  detail::check_dim(u, model, "prox_atomic");
  detail::require(tau >= 0.0, "prox_atomic: tau must be >= 0");
  if (tau == 0.0) return u;
  if (model.is_sparse()) return soft_threshold(u, tau);
  const Eigen::Index n = detail::side(model);
  return vectorize(singular_value_threshold(matricize(u, n), tau));
}

inline Vector project_l2_ball(const Eigen::Ref<const Vector>& u, double radius = 1.0) {
  detail::require(radius > 0.0, "project_l2_ball: radius must be > 0");
  const double nrm = u.norm();
  if (nrm <= radius) return u;
  return u * (radius / nrm);
}

inline Vector project_box(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& lo,
                          const Eigen::Ref<const Vector>& hi) {
  detail::require(u.size() == lo.size() && u.size() == hi.size(), "project_box: size mismatch");
  detail::require((lo.array() <= hi.array()).all(), "project_box: lo > hi");
  return u.cwiseMax(lo).cwiseMin(hi);
}

/// Projection onto the l_inf ball of radius lambda.
inline Vector project_linf_ball(const Eigen::Ref<const Vector>& u, double lambda) {
  detail::require(lambda >= 0.0, "project_linf_ball: lambda must be >= 0");
  return u.cwiseMax(-lambda).cwiseMin(lambda);
}

namespace detail {

// Unique real root of z + c z^3 = v for c >= 0. Cardano in the stable form
// z = t - p/(3t), t = cbrt(r/2 + sqrt(r^2/4 + p^3/27)) with p = 1/c, r = |v|/c,
// then Newton steps; the map is increasing so the root is unique.
inline double cubic_shrink(double v, double c) {
  if (v == 0.0 || c == 0.0) return v;
  const double a = std::abs(v);
  double z;
  if (c * a * a < 1e-8) {
    z = a * (1.0 - c * a * a);  // series, relative error O((c a^2)^2)
  } else {
    const double p = 1.0 / c;
    const double r = a / c;
    const double t = std::cbrt(0.5 * r + std::sqrt(0.25 * r * r + p * p * p / 27.0));
    z = std::clamp(t - p / (3.0 * t), 0.0, a);
  }
  for (int it = 0; it < 3; ++it) {
    const double f = z + c * z * z * z - a;
    z -= f / (1.0 + 3.0 * c * z * z);
  }
  return std::copysign(z, v);
}

}  // namespace detail

struct L4Projection {
  Vector z;
  double mu = 0.0;  // KKT multiplier: z - v + 4 mu z^3 = 0
};

/// Euclidean projection onto {z : ||z||_4 <= radius}, returned with its
/// multiplier. Outer safeguarded Newton on mu, inner Newton per coordinate.
inline L4Projection project_l4_ball_kkt(const Eigen::Ref<const Vector>& v, double radius) {
  detail::require(radius > 0.0, "project_lp_ball: radius must be > 0");
  detail::require(v.allFinite(), "project_lp_ball: non-finite input");
  const double target = std::pow(radius, 4);
  auto p4 = [](const Vector& z) { return z.array().square().square().sum(); };
  L4Projection out{v, 0.0};
  if (p4(out.z) <= target) return out;

  auto eval = [&](double mu, Vector& z) {
    for (Eigen::Index i = 0; i < v.size(); ++i) z(i) = detail::cubic_shrink(v(i), 4.0 * mu);
    return p4(z) - target;
  };

  Vector z(v.size());
  // |z_i| <= (|v_i| / (4 mu))^(1/3), so this mu already satisfies the bound.
  double lo = 0.0;
  double hi = 0.25 * std::pow(v.array().abs().pow(4.0 / 3.0).sum() / target, 0.75);
  if (!(hi > 0.0) || !std::isfinite(hi)) hi = 1.0;
  while (eval(hi, z) > 0.0) {
    lo = hi;
    hi *= 4.0;
    if (hi > 1e300) throw NumericalFailure("project_lp_ball: could not bracket multiplier");
  }
  double mu = hi;
  double g = eval(mu, z);
  constexpr int max_iters = 300;
  for (int it = 0; it < max_iters; ++it) {
    if (std::abs(g) <= 1e-14 * target) break;
    if (g > 0.0) lo = mu; else hi = mu;
    // dz_i/dmu = -4 z_i^3 / (1 + 12 mu z_i^2)
    double dg = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double zi = z(i);
      const double z3 = zi * zi * zi;
      dg += 4.0 * z3 * (-4.0 * z3 / (1.0 + 12.0 * mu * zi * zi));
    }
    double next = dg < 0.0 ? mu - g / dg : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-16 * hi) break;
    mu = next;
    g = eval(mu, z);
    if (it + 1 == max_iters) throw NumericalFailure("project_lp_ball: multiplier search did not converge");
  }
  out.z = z;
  out.mu = mu;
  return out;
}

/// Projection onto the l_p ball; only p = 4 is supported.
inline Vector project_lp_ball(const Eigen::Ref<const Vector>& v, double radius, int p = 4) {
  detail::require(p == 4, "project_lp_ball: only p = 4 is supported");
  return project_l4_ball_kkt(v, radius).z;
}

/// Exact sup over u in K cap B^N of |g^T u|: l2 norm of the top-K magnitudes
/// (sparse) or of the top-r singular values of mat(g) (low rank).
inline double sup_correlation(const Eigen::Ref<const Vector>& g, const AtomicModel& model) {
  detail::check_dim(g, model, "sup_correlation");
  if (const auto* s = std::get_if<SparseModel>(&model.variant())) {
    std::vector<double> sq(static_cast<std::size_t>(g.size()));
    for (Eigen::Index i = 0; i < g.size(); ++i) sq[static_cast<std::size_t>(i)] = g(i) * g(i);
    const auto k = static_cast<std::ptrdiff_t>(s->K);
    std::nth_element(sq.begin(), sq.begin() + (k - 1), sq.end(), std::greater<>());
    double acc = 0.0;
    for (std::ptrdiff_t i = 0; i < k; ++i) acc += sq[static_cast<std::size_t>(i)];
    return std::sqrt(acc);
  }
  const auto& lr = std::get<LowRankModel>(model.variant());
  const Vector sigma = svd(matricize(g, lr.n)).sigma;
  return sigma.head(lr.r).norm();
}

struct WidthEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

/// Monte-Carlo Gaussian mean width with the exact inner supremum.
inline WidthEstimate width_estimate(const AtomicModel& model, std::size_t n_samples, std::uint64_t seed) {
  detail::require(n_samples >= 2, "width_estimate: need at least 2 samples");
  SplitMix64 rng(seed);
  Vector g(model.dimension());
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t t = 0; t < n_samples; ++t) {
    for (auto& v : g) v = rng.normal();
    const double x = sup_correlation(g, model);
    const double d = x - mean;
    mean += d / static_cast<double>(t + 1);
    m2 += d * (x - mean);
  }
  const double var = m2 / static_cast<double>(n_samples - 1);
  return WidthEstimate{mean, std::sqrt(var / static_cast<double>(n_samples)), n_samples};
}

/// Membership in the antisparse set {u : K0 ||u||_inf^2 <= ||u||_2^2}.
inline bool in_antisparse(const Eigen::Ref<const Vector>& u, double k0) {
  detail::require(k0 >= 0.0, "in_antisparse: K0 must be >= 0");
  if (u.size() == 0) return true;
  const double inf = u.lpNorm<Eigen::Infinity>();
  return k0 * inf * inf <= u.squaredNorm();
}

}  // namespace qcs
