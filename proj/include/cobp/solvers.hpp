#pragma once

// Reconstruction programs
//
//     minimize ||u||_#  subject to  L_j u in C_j  for every block j
//
// solved with a product-space primal-dual splitting (Chambolle-Pock form):
// the primal step takes the prox of the atomic norm, each dual step projects
// onto its block's set through the Moreau identity. Blocks reach u either
// through the sensing matrix Phi or through the identity, so one iteration
// costs one product with Phi, one with Phi^T, one prox and one projection per
// block. Only closed-form projections are needed, in particular the
// consistency constraint ||Phi u + xi - q||_inf <= delta/2 is handled as a box
// in measurement space.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "cobp/errors.hpp"
#include "cobp/linalg.hpp"
#include "cobp/models.hpp"
#include "cobp/sensing.hpp"

namespace qcs {

/// Phi u + xi - q in [-delta/2, delta/2], stored as Phi u in [lower, upper].
struct ConsistencyBox {
  Vector lower;
  Vector upper;
  double scale = 1.0;  // violations are reported in units of this (delta/2)
};

/// ||Phi u - center||_2 <= epsilon with center = q - xi.
struct ResidualL2Ball {
  Vector center;
  double epsilon = 0.0;
};

/// ||Phi u - center||_4 <= epsilon.
struct ResidualL4Ball {
  Vector center;
  double epsilon = 0.0;
};

/// ||u||_2 <= radius (1 for every shipped program).
struct UnitL2Ball {
  double radius = 1.0;
};

/// ||u||_inf <= lambda.
struct InfBall {
  double lambda = 1.0;
};

using ConstraintBlock = std::variant<ConsistencyBox, ResidualL2Ball, ResidualL4Ball, UnitL2Ball, InfBall>;

inline bool through_phi(const ConstraintBlock& b) {
  return std::holds_alternative<ConsistencyBox>(b) || std::holds_alternative<ResidualL2Ball>(b) ||
         std::holds_alternative<ResidualL4Ball>(b);
}

inline std::string block_name(const ConstraintBlock& b) {
  switch (b.index()) {
    case 0: return "consistency_box";
    case 1: return "residual_l2_ball";
    case 2: return "residual_l4_ball";
    case 3: return "unit_l2_ball";
    default: return "inf_ball";
  }
}

inline ConsistencyBox make_consistency_box(const QuantizedMeasurements& q, const SensingEnsemble& ens) {
  detail::require(q.size() == ens.measurements(), "consistency box: q length does not match Phi");
  const Vector center = q.q - ens.dither;
  const double half = 0.5 * q.delta;
  return ConsistencyBox{center.array() - half, center.array() + half, half};
}

inline ResidualL2Ball make_residual_l2_ball(const QuantizedMeasurements& q, const SensingEnsemble& ens, double eps) {
  detail::require(q.size() == ens.measurements(), "residual ball: q length does not match Phi");
  detail::require(eps >= 0.0, "residual ball: epsilon must be >= 0");
  return ResidualL2Ball{q.q - ens.dither, eps};
}

inline ResidualL4Ball make_residual_l4_ball(const QuantizedMeasurements& q, const SensingEnsemble& ens, double eps) {
  detail::require(q.size() == ens.measurements(), "residual ball: q length does not match Phi");
  detail::require(eps >= 0.0, "residual ball: epsilon must be >= 0");
  return ResidualL4Ball{q.q - ens.dither, eps};
}

struct ProgramSpec {
  AtomicModel model;
  std::vector<ConstraintBlock> blocks;
  const SensingEnsemble* ensemble = nullptr;  // required when a block goes through Phi
  double objective_weight = 1.0;              // 0 turns the program into a feasibility problem

  void validate() const {
    detail::require(!blocks.empty(), "program: at least one constraint block is required");
    detail::require(objective_weight >= 0.0, "program: objective weight must be >= 0");
    const Eigen::Index n = model.dimension();
    for (const auto& b : blocks) {
      if (through_phi(b)) {
        detail::require(ensemble != nullptr, "program: block through Phi without an ensemble");
        detail::require(ensemble->dimension() == n, "program: Phi columns do not match the model");
      }
      const Eigen::Index m = ensemble ? ensemble->measurements() : 0;
      std::visit([&](const auto& blk) {
        using T = std::decay_t<decltype(blk)>;
        if constexpr (std::is_same_v<T, ConsistencyBox>) {
          detail::require(blk.lower.size() == m && blk.upper.size() == m, "program: box size mismatch");
          detail::require((blk.lower.array() <= blk.upper.array()).all(), "program: box with lower > upper");
          detail::require(blk.scale > 0.0, "program: box scale must be > 0");
        } else if constexpr (std::is_same_v<T, ResidualL2Ball> || std::is_same_v<T, ResidualL4Ball>) {
          detail::require(blk.center.size() == m, "program: residual center size mismatch");
          detail::require(blk.epsilon >= 0.0, "program: residual radius must be >= 0");
        } else if constexpr (std::is_same_v<T, UnitL2Ball>) {
          detail::require(blk.radius > 0.0, "program: ball radius must be > 0");
        } else {
          detail::require(blk.lambda > 0.0, "program: lambda must be > 0");
        }
      }, b);
    }
  }
};

struct SolverConfig {
  int max_iters = 50000;
  double tol_feas = 1e-5;
  double tol_rel_change = 1e-7;
  double step_safety = 0.99;
  int check_every = 50;

  void validate() const {
    detail::require_config(max_iters > 0, "solver: max_iters must be > 0");
    detail::require_config(tol_feas > 0.0, "solver: tol_feas must be > 0");
    detail::require_config(tol_rel_change > 0.0, "solver: tol_rel_change must be > 0");
    detail::require_config(step_safety > 0.0 && step_safety < 1.0, "solver: step_safety must be in (0, 1)");
    detail::require_config(check_every > 0, "solver: check_every must be > 0");
  }
};

struct ReconResult {
  Vector x_star;
  int iterations = 0;
  std::vector<double> feasibility;  // per block, in the block's natural units
  double objective = 0.0;           // atomic_norm(x_star)
  bool converged = false;
  double step = 0.0;                // tau = sigma actually used

  double max_violation() const {
    double v = 0.0;
    for (const double f : feasibility) v = std::max(v, f);
    return v;
  }
};

/// Stacked map u -> (L_1 u, ..., L_J u) with L_j in {Phi, I}.
class StackedOperator {
 public:
  StackedOperator(const DenseMatrix* phi, std::vector<bool> via_phi, Eigen::Index n)
      : phi_(phi), via_phi_(std::move(via_phi)), n_(n) {}

  Eigen::Index input_size() const { return n_; }
  Eigen::Index output_size() const {
    Eigen::Index total = 0;
    for (const bool b : via_phi_) total += b ? phi_->rows() : n_;
    return total;
  }
  Vector apply(const Vector& x) const {
    Vector out(output_size());
    Eigen::Index off = 0;
    for (const bool b : via_phi_) {
      if (b) {
        out.segment(off, phi_->rows()).noalias() = (*phi_) * x;
        off += phi_->rows();
      } else {
        out.segment(off, n_) = x;
        off += n_;
      }
    }
    return out;
  }
  Vector adjoint(const Vector& y) const {
    Vector out = Vector::Zero(n_);
    Eigen::Index off = 0;
    for (const bool b : via_phi_) {
      if (b) {
        out.noalias() += phi_->transpose() * y.segment(off, phi_->rows());
        off += phi_->rows();
      } else {
        out += y.segment(off, n_);
        off += n_;
      }
    }
    return out;
  }

 private:
  const DenseMatrix* phi_;
  std::vector<bool> via_phi_;
  Eigen::Index n_;
};

namespace detail {

// Euclidean projection of v onto the block's set (in the block's range space).
inline Vector project_block(const ConstraintBlock& b, const Vector& v) {
  return std::visit([&](const auto& blk) -> Vector {
    using T = std::decay_t<decltype(blk)>;
    if constexpr (std::is_same_v<T, ConsistencyBox>) {
      return v.cwiseMax(blk.lower).cwiseMin(blk.upper);
    } else if constexpr (std::is_same_v<T, ResidualL2Ball>) {
      if (blk.epsilon == 0.0) return blk.center;
      return blk.center + project_l2_ball(v - blk.center, blk.epsilon);
    } else if constexpr (std::is_same_v<T, ResidualL4Ball>) {
      if (blk.epsilon == 0.0) return blk.center;
      return blk.center + project_l4_ball_kkt(v - blk.center, blk.epsilon).z;
    } else if constexpr (std::is_same_v<T, UnitL2Ball>) {
      return project_l2_ball(v, blk.radius);
    } else {
      return project_linf_ball(v, blk.lambda);
    }
  }, b);
}

// Violation of `image` (= L_j x) in the block's natural units.
inline double block_violation(const ConstraintBlock& b, const Vector& image) {
  return std::visit([&](const auto& blk) -> double {
    using T = std::decay_t<decltype(blk)>;
    if constexpr (std::is_same_v<T, ConsistencyBox>) {
      const double over = (image - blk.upper).maxCoeff();
      const double under = (blk.lower - image).maxCoeff();
      return std::max({over, under, 0.0}) / blk.scale;
    } else if constexpr (std::is_same_v<T, ResidualL2Ball>) {
      const double excess = (image - blk.center).norm() - blk.epsilon;
      return std::max(excess, 0.0) / (blk.epsilon > 0.0 ? blk.epsilon : 1.0);
    } else if constexpr (std::is_same_v<T, ResidualL4Ball>) {
      const double excess = (image - blk.center).template lpNorm<4>() - blk.epsilon;
      return std::max(excess, 0.0) / (blk.epsilon > 0.0 ? blk.epsilon : 1.0);
    } else if constexpr (std::is_same_v<T, UnitL2Ball>) {
      return std::max(image.norm() - blk.radius, 0.0) / blk.radius;
    } else {
      return std::max(image.template lpNorm<Eigen::Infinity>() - blk.lambda, 0.0) / blk.lambda;
    }
  }, b);
}

}  // namespace detail

/// Per-block violations of a candidate point.
inline std::vector<double> program_violations(const ProgramSpec& spec, const Vector& x) {
  std::vector<double> out;
  out.reserve(spec.blocks.size());
  Vector phix;
  for (const auto& b : spec.blocks) {
    if (through_phi(b)) {
      if (phix.size() == 0) phix = spec.ensemble->phi * x;
      out.push_back(detail::block_violation(b, phix));
    } else {
      out.push_back(detail::block_violation(b, x));
    }
  }
  return out;
}

inline ReconResult solve_primal_dual(const ProgramSpec& spec, const SolverConfig& cfg = {}) {
  spec.validate();
  cfg.validate();
  const Eigen::Index n = spec.model.dimension();
  const std::size_t nb = spec.blocks.size();

  std::vector<bool> via_phi(nb);
  bool any_phi = false;
  for (std::size_t j = 0; j < nb; ++j) {
    via_phi[j] = through_phi(spec.blocks[j]);
    any_phi = any_phi || via_phi[j];
  }
  const DenseMatrix* phi = any_phi ? &spec.ensemble->phi : nullptr;
  const Eigen::Index m = any_phi ? phi->rows() : 0;

  const StackedOperator stacked(phi, via_phi, n);
  const OperatorNormEstimate lnorm = operator_norm(stacked);
  if (!(lnorm.value > 0.0) || !std::isfinite(lnorm.value)) {
    throw NumericalFailure("solver: operator norm estimation failed");
  }
  // Power iteration converges from below; a small inflation keeps
  // tau * sigma * ||L||^2 < 1 even for a slightly short estimate.
  const double l = lnorm.converged ? lnorm.value * (1.0 + 1e-6) : lnorm.value * 1.01;
  const double tau = cfg.step_safety / l;
  const double sigma = cfg.step_safety / l;
  const double prox_scale = tau * spec.objective_weight;

  Vector x = Vector::Zero(n);
  Vector x_bar = x;
  Vector x_prev_check = x;
  std::vector<Vector> y(nb);
  for (std::size_t j = 0; j < nb; ++j) y[j] = Vector::Zero(via_phi[j] ? m : n);

  Vector phi_xbar(m);
  Vector phi_dual(m);
  Vector grad(n);
  Vector v;

  ReconResult res;
  res.step = tau;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    if (any_phi) phi_xbar.noalias() = (*phi) * x_bar;
    for (std::size_t j = 0; j < nb; ++j) {
      // y <- y + sigma L x_bar - sigma P_C((y + sigma L x_bar) / sigma)
      v = y[j];
      v += sigma * (via_phi[j] ? phi_xbar : x_bar);
      y[j] = v - sigma * detail::project_block(spec.blocks[j], v / sigma);
    }
    grad.setZero();
    if (any_phi) {
      phi_dual.setZero();
      for (std::size_t j = 0; j < nb; ++j)
        if (via_phi[j]) phi_dual += y[j];
      grad.noalias() = phi->transpose() * phi_dual;
    }
    for (std::size_t j = 0; j < nb; ++j)
      if (!via_phi[j]) grad += y[j];

    Vector x_new = prox_atomic(x - tau * grad, prox_scale, spec.model);
    x_bar = 2.0 * x_new - x;
    x = std::move(x_new);

    if ((it + 1) % cfg.check_every == 0) {
      const double nx = x.norm();
      if (!std::isfinite(nx) || nx > 1e6) {
        throw NumericalFailure("solver: iterates diverged at iteration " + std::to_string(it + 1));
      }
      const double change = (x - x_prev_check).norm() / std::max(nx, 1.0);
      x_prev_check = x;
      const std::vector<double> viol = program_violations(spec, x);
      const bool feasible = std::all_of(viol.begin(), viol.end(), [&](double f) { return f <= cfg.tol_feas; });
      if (feasible && change <= cfg.tol_rel_change) {
        res.converged = true;
        ++it;
        break;
      }
    }
  }

  res.iterations = it;
  res.feasibility = program_violations(spec, x);
  res.objective = atomic_norm(x, spec.model);
  res.x_star = std::move(x);
  return res;
}

/// Consistent Basis Pursuit: min ||u||_# s.t. ||Phi u + xi - q||_inf <= delta/2, ||u||_2 <= 1.
inline ReconResult cobp(const QuantizedMeasurements& q, const SensingEnsemble& ens, const QuantizerConfig& qcfg,
                        const AtomicModel& model, const SolverConfig& cfg = {}) {
  qcfg.validate();
  detail::require(std::abs(q.delta - qcfg.delta) <= 1e-12 * qcfg.delta, "cobp: delta of q and config differ");
  ProgramSpec spec{model, {make_consistency_box(q, ens), UnitL2Ball{1.0}}, &ens, 1.0};
  return solve_primal_dual(spec, cfg);
}

/// CoBP with the extra bound ||u||_inf <= lambda (identical to CoBP once lambda >= 1).
inline ReconResult cobp_lambda(const QuantizedMeasurements& q, const SensingEnsemble& ens, const QuantizerConfig& qcfg,
                               const AtomicModel& model, double lambda, const SolverConfig& cfg = {}) {
  qcfg.validate();
  detail::require(lambda > 0.0, "cobp_lambda: lambda must be > 0");
  detail::require(std::abs(q.delta - qcfg.delta) <= 1e-12 * qcfg.delta, "cobp_lambda: delta of q and config differ");
  ProgramSpec spec{model, {make_consistency_box(q, ens), UnitL2Ball{1.0}, InfBall{lambda}}, &ens, 1.0};
  return solve_primal_dual(spec, cfg);
}

/// Basis pursuit denoise with the unit-ball constraint added.
inline ReconResult bpdn(const QuantizedMeasurements& q, const SensingEnsemble& ens, const QuantizerConfig& qcfg,
                        const AtomicModel& model, double epsilon, const SolverConfig& cfg = {}) {
  qcfg.validate();
  ProgramSpec spec{model, {make_residual_l2_ball(q, ens, epsilon), UnitL2Ball{1.0}}, &ens, 1.0};
  return solve_primal_dual(spec, cfg);
}

/// Basis pursuit dequantizer of moment 4, unit ball added.
inline ReconResult bpdq(const QuantizedMeasurements& q, const SensingEnsemble& ens, const QuantizerConfig& qcfg,
                        const AtomicModel& model, double epsilon4, const SolverConfig& cfg = {}) {
  qcfg.validate();
  ProgramSpec spec{model, {make_residual_l4_ball(q, ens, epsilon4), UnitL2Ball{1.0}}, &ens, 1.0};
  return solve_primal_dual(spec, cfg);
}

/// sqrt(M delta^2 / 12 + kappa sqrt(M)).
inline double epsilon_bpdn(Eigen::Index m, double delta, double kappa = 2.0) {
  detail::require(m >= 1, "epsilon_bpdn: M must be >= 1");
  detail::require(delta > 0.0, "epsilon_bpdn: delta must be > 0");
  const double md = static_cast<double>(m);
  return std::sqrt(md * delta * delta / 12.0 + kappa * std::sqrt(md));
}

// For n ~ U[-d/2, d/2]: E n^4 = (d/2)^4 / 5 and sd(n^4) = (d/2)^4 * 4/15, so
// the sum of M fourth powers has sd sqrt(M) (d/2)^4 4/15. Two of those.
inline constexpr double kDefaultKappa4 = 8.0 / 15.0;

/// (M (delta/2)^4 / 5 + kappa4 sqrt(M) (delta/2)^4)^(1/4).
inline double epsilon_bpdq4(Eigen::Index m, double delta, double kappa4 = kDefaultKappa4) {
  detail::require(m >= 1, "epsilon_bpdq4: M must be >= 1");
  detail::require(delta > 0.0, "epsilon_bpdq4: delta must be > 0");
  const double md = static_cast<double>(m);
  const double h4 = std::pow(0.5 * delta, 4);
  return std::pow(md * h4 / 5.0 + kappa4 * std::sqrt(md) * h4, 0.25);
}

}  // namespace qcs
