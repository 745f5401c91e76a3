#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cobp/errors.hpp"
#include "cobp/rng.hpp"

namespace qcs {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

struct SvdResult {
  DenseMatrix U;  // rows x k, orthonormal columns
  Vector sigma;   // k = min(rows, cols), nonincreasing
  DenseMatrix V;  // cols x k, orthonormal columns
};

inline bool all_finite(const Eigen::Ref<const DenseMatrix>& a) { return a.allFinite(); }

/// ve(U): column stacking. Eigen storage is column-major, so this is a copy.
inline Vector vectorize(const Eigen::Ref<const DenseMatrix>& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

/// Inverse of vectorize for an n x n matrix.
inline DenseMatrix matricize(const Eigen::Ref<const Vector>& v, Eigen::Index n) {
  detail::require(v.size() == n * n, "matricize: length is not n*n");
  return Eigen::Map<const DenseMatrix>(v.data(), n, n);
}

namespace detail {

// Completes the zero columns of `u` (flagged in `empty`) to an orthonormal set
// by Gram-Schmidt against the canonical basis.
inline void complete_orthonormal(DenseMatrix& u, const std::vector<bool>& empty) {
  const Eigen::Index m = u.rows();
  Eigen::Index probe = 0;
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    if (!empty[static_cast<std::size_t>(k)]) continue;
    while (probe < m) {
      Vector e = Vector::Zero(m);
      e(probe++) = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
          if (j == k || (empty[static_cast<std::size_t>(j)] && j > k)) continue;
          e -= u.col(j).dot(e) * u.col(j);
        }
      }
      const double nrm = e.norm();
      if (nrm > 1e-8) {
        u.col(k) = e / nrm;
        break;
      }
    }
  }
}

// One-sided Jacobi on a tall matrix (rows >= cols).
inline SvdResult jacobi_svd_tall(const DenseMatrix& a) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  DenseMatrix w = a;
  DenseMatrix v = DenseMatrix::Identity(n, n);
  constexpr double eps = 1e-15;
  constexpr int max_sweeps = 80;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double alpha = w.col(i).squaredNorm();
        const double beta = w.col(j).squaredNorm();
        const double gamma = w.col(i).dot(w.col(j));
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (Eigen::Index r = 0; r < m; ++r) {
          const double wi = w(r, i);
          const double wj = w(r, j);
          w(r, i) = c * wi - s * wj;
          w(r, j) = s * wi + c * wj;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vi = v(r, i);
          const double vj = v(r, j);
          v(r, i) = c * vi - s * vj;
          v(r, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }

  Vector norms(n);
  for (Eigen::Index k = 0; k < n; ++k) norms(k) = w.col(k).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return norms(x) > norms(y); });

  SvdResult out{DenseMatrix(m, n), Vector(n), DenseMatrix(n, n)};
  const double cutoff = (norms.size() > 0 ? norms.maxCoeff() : 0.0) * 1e-14;
  std::vector<bool> empty(static_cast<std::size_t>(n), false);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.sigma(k) = norms(src);
    out.V.col(k) = v.col(src);
    if (norms(src) > cutoff && norms(src) > 0.0) {
      out.U.col(k) = w.col(src) / norms(src);
    } else {
      out.U.col(k).setZero();
      empty[static_cast<std::size_t>(k)] = true;
    }
  }
  complete_orthonormal(out.U, empty);
  return out;
}

}  // namespace detail

/// Thin singular value decomposition by one-sided (Hestenes) Jacobi.
/// Intended for the small matrices in this library (up to a few hundred rows).
inline SvdResult svd(const Eigen::Ref<const DenseMatrix>& a) {
  detail::require(a.size() >= 1, "svd: empty matrix");
  detail::require(a.allFinite(), "svd: non-finite entry");
  if (a.rows() >= a.cols()) return detail::jacobi_svd_tall(a);
  SvdResult t = detail::jacobi_svd_tall(a.transpose());
  return SvdResult{std::move(t.V), std::move(t.sigma), std::move(t.U)};
}

/// Anything exposing the pair x -> Lx, y -> L^T y on Eigen vectors.
template <typename L>
concept LinearOperator = requires(const L& op, const Vector& x) {
  { op.input_size() } -> std::convertible_to<Eigen::Index>;
  { op.output_size() } -> std::convertible_to<Eigen::Index>;
  { op.apply(x) } -> std::convertible_to<Vector>;
  { op.adjoint(x) } -> std::convertible_to<Vector>;
};

/// Wraps an explicit matrix as a LinearOperator.
class MatrixOperator {
 public:
  explicit MatrixOperator(const DenseMatrix& m) : m_(&m) {}
  Eigen::Index input_size() const { return m_->cols(); }
  Eigen::Index output_size() const { return m_->rows(); }
  Vector apply(const Vector& x) const { return (*m_) * x; }
  Vector adjoint(const Vector& y) const { return m_->transpose() * y; }

 private:
  const DenseMatrix* m_;
};

struct OperatorNormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;  // false: iteration cap reached, value is the best iterate
};

struct PowerIterationConfig {
  int max_iters = 200;
  double rel_tol = 1e-9;
  std::uint64_t seed = 0x5eed'0f'70'4e'12ULL;
};

/// Largest singular value of `op` by power iteration on L^T L. Deterministic:
/// the start vector comes from a fixed internal seed.
template <LinearOperator L>
OperatorNormEstimate operator_norm(const L& op, const PowerIterationConfig& cfg = {}) {
  const Eigen::Index n = op.input_size();
  detail::require(n >= 1, "operator_norm: empty domain");
  SplitMix64 rng(cfg.seed);
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.normal();
  x.normalize();

  OperatorNormEstimate est;
  double prev = 0.0;
  for (int k = 0; k < cfg.max_iters; ++k) {
    Vector y = op.adjoint(op.apply(x));
    const double lambda = y.norm();  // Rayleigh growth of L^T L on unit x
    est.iterations = k + 1;
    if (lambda == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    est.value = std::sqrt(lambda);
    x = y / lambda;
    if (k > 0 && std::abs(lambda - prev) <= cfg.rel_tol * lambda) {
      est.converged = true;
      break;
    }
    prev = lambda;
  }
  // ||L^T L x|| for unit x lower-bounds ||L||^2; one exact Rayleigh quotient
  // tightens the final value.
  est.value = std::max(est.value, op.apply(x).norm() / x.norm());
  return est;
}

/// Worst relative gap |<Lx, y> - <x, L^T y>| over random Gaussian pairs.
/// Used to validate hand-written adjoints.
template <LinearOperator L>
double adjoint_mismatch(const L& op, int trials = 8, std::uint64_t seed = 1) {
  SplitMix64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vector x(op.input_size());
    Vector y(op.output_size());
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    const double lhs = op.apply(x).dot(y);
    const double rhs = x.dot(op.adjoint(y));
    const double scale = std::max(1.0, std::abs(lhs) + std::abs(rhs));
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

}  // namespace qcs
