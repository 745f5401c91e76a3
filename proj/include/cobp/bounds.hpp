#pragma once

// Sample-complexity and error-bound calculators for consistent reconstruction.
// The absolute constants are unknown; they default to 1 and only the scaling
// laws are meaningful.

#include <cmath>

#include "cobp/errors.hpp"

namespace qcs::bounds {

struct BoundConstants {
  double C = 1.0;         // general measurement bound
  double Cp = 1.0;        // sparse measurement bound
  double Ccor = 1.0;      // error-decay prefactor
  double kappa_sg = 0.0;  // anisotropy constant, 0 for Gaussian rows
  double alpha = 1.0;     // sub-Gaussian norm

  void validate() const {
    detail::require(C > 0.0 && Cp > 0.0 && Ccor > 0.0, "bound constants must be > 0");
    detail::require(kappa_sg >= 0.0, "kappa_sg must be >= 0");
    detail::require(alpha > 0.0, "alpha must be > 0");
  }
};

/// A bound evaluated outside the regime it was stated for carries `warning`.
struct BoundValue {
  double value = 0.0;
  bool warning = false;
};

/// M >= C (2 + delta)^4 / (delta^2 eps^4) w^2 for consistency width eps.
inline double min_measurements_general(double w, double delta, double eps, const BoundConstants& c = {}) {
  c.validate();
  detail::require(w > 0.0 && delta > 0.0 && eps > 0.0, "min_measurements_general: w, delta, eps must be > 0");
  detail::require(eps < 1.0, "min_measurements_general: eps must lie in (0, 1)");
  return c.C * std::pow(2.0 + delta, 4) / (delta * delta * std::pow(eps, 4)) * w * w;
}

/// M >= C' (2 + delta)/eps K log(N/(K delta) ((2 + delta)/eps)^(3/2)) for
/// sparse sets. A log argument <= 1 gives a degenerate (non-positive) value
/// and sets the warning.
inline BoundValue min_measurements_sparse(double K, double N, double delta, double eps,
                                          const BoundConstants& c = {}) {
  c.validate();
  detail::require(K >= 1.0 && K <= N, "min_measurements_sparse: need 1 <= K <= N");
  detail::require(delta > 0.0 && eps > 0.0, "min_measurements_sparse: delta, eps must be > 0");
  const double ratio = (2.0 + delta) / eps;
  const double arg = N / (K * delta) * std::pow(ratio, 1.5);
  return BoundValue{c.Cp * ratio * K * std::log(arg), arg <= 1.0};
}

/// CoBP error scale for Gaussian sensing: Ccor (2 + delta)/sqrt(delta) (w^2/M)^(1/4).
inline double error_bound_gaussian(double M, double delta, double w, const BoundConstants& c = {}) {
  c.validate();
  detail::require(M >= 1.0 && delta > 0.0 && w > 0.0, "error_bound_gaussian: need M >= 1, delta > 0, w > 0");
  return c.Ccor * (2.0 + delta) / std::sqrt(delta) * std::pow(w * w / M, 0.25);
}

/// Sub-Gaussian sensing adds the floor kappa_sg * lambda.
inline double error_bound_subgaussian(double M, double delta, double w, double lambda, const BoundConstants& c = {}) {
  detail::require(lambda > 0.0, "error_bound_subgaussian: lambda must be > 0");
  return error_bound_gaussian(M, delta, w, c) + c.kappa_sg * lambda;
}

/// kappa_sg <= 9 sqrt(27) alpha^3.
inline double kappa_sg_upper(double alpha) {
  detail::require(alpha > 0.0, "kappa_sg_upper: alpha must be > 0");
  return 9.0 * std::sqrt(27.0) * alpha * alpha * alpha;
}

/// Smallest antisparsity level admitted by the CoBP_lambda guarantee, (16 kappa_sg)^2.
inline double min_antisparse_level(double kappa_sg) {
  detail::require(kappa_sg >= 0.0, "min_antisparse_level: kappa_sg must be >= 0");
  return 256.0 * kappa_sg * kappa_sg;
}

/// ||x0 - x*||_2 <= eps + 2 lambda sqrt(K0) for CoBP_lambda.
inline double prop3_error(double eps, double lambda, double K0) {
  detail::require(eps >= 0.0 && lambda >= 0.0 && K0 >= 0.0, "prop3_error: arguments must be >= 0");
  return eps + 2.0 * lambda * std::sqrt(K0);
}

}  // namespace qcs::bounds
