#pragma once

// Error-decay experiments: random signals and ensembles per trial, one solve
// per (arm, grid value, trial), arithmetic-mean aggregation and log2-log2
// slope fits over the largest grid values.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "cobp/errors.hpp"
#include "cobp/linalg.hpp"
#include "cobp/models.hpp"
#include "cobp/rng.hpp"
#include "cobp/sensing.hpp"
#include "cobp/solvers.hpp"

namespace qcs {

inline constexpr const char* kToolVersion = "1.0.0";

enum class Preset { SparseGaussian, BernoulliVsGaussian, LowRankGaussian, Custom };
enum class Method { CoBP, CoBPLambda, BPDN, BPDQ4 };
enum class Scale { Paper, Desk };

/// What the grid values mean.
enum class GridKind {
  Oversampling,  // grid = M/K (sparse) or M/P (low rank)
  Sparsity,      // grid = K, with M = oversampling * K
};

inline std::string to_string(Preset p) {
  switch (p) {
    case Preset::SparseGaussian: return "sparse-gaussian";
    case Preset::BernoulliVsGaussian: return "bernoulli-vs-gaussian";
    case Preset::LowRankGaussian: return "lowrank";
    case Preset::Custom: return "custom";
  }
  return "?";
}

inline Preset preset_from_string(const std::string& s) {
  if (s == "sparse-gaussian") return Preset::SparseGaussian;
  if (s == "bernoulli-vs-gaussian") return Preset::BernoulliVsGaussian;
  if (s == "lowrank") return Preset::LowRankGaussian;
  if (s == "custom") return Preset::Custom;
  throw InvalidConfig("unknown preset: " + s);
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::CoBP: return "cobp";
    case Method::CoBPLambda: return "cobp-lambda";
    case Method::BPDN: return "bpdn";
    case Method::BPDQ4: return "bpdq4";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "cobp") return Method::CoBP;
  if (s == "cobp-lambda") return Method::CoBPLambda;
  if (s == "bpdn") return Method::BPDN;
  if (s == "bpdq4") return Method::BPDQ4;
  throw InvalidConfig("unknown method: " + s);
}

inline std::string to_string(Scale s) { return s == Scale::Paper ? "paper" : "desk"; }

inline Scale scale_from_string(const std::string& s) {
  if (s == "paper") return Scale::Paper;
  if (s == "desk") return Scale::Desk;
  throw InvalidConfig("unknown scale: " + s);
}

/// One curve of an experiment: a reconstruction method under one ensemble law.
struct Arm {
  Method method = Method::CoBP;
  Distribution dist = Distribution::Gaussian;
  std::string label;  // "cobp", or "cobp@bernoulli" when several laws are compared
};

struct ExperimentSpec {
  Preset preset = Preset::Custom;
  Scale scale = Scale::Desk;
  bool low_rank = false;
  Eigen::Index N = 512;
  Eigen::Index K = 8;
  Eigen::Index n = 16;  // low rank: side
  Eigen::Index r = 1;
  Eigen::Index P = 32;  // low rank: degrees-of-freedom unit for M/P
  int bits = 3;
  GridKind grid_kind = GridKind::Oversampling;
  std::vector<double> grid;
  double oversampling = 16.0;  // M/K when grid_kind == Sparsity
  int trials = 10;
  std::uint64_t master_seed = 7;
  std::vector<Arm> arms;
  SolverConfig solver;
  double bpdn_kappa = 2.0;
  double bpdq_kappa4 = kDefaultKappa4;

  void validate() const {
    detail::require_config(!grid.empty(), "experiment: grid must be nonempty");
    detail::require_config(std::is_sorted(grid.begin(), grid.end()) &&
                               std::adjacent_find(grid.begin(), grid.end()) == grid.end(),
                           "experiment: grid must be strictly ascending");
    detail::require_config(grid.front() > 0.0, "experiment: grid values must be > 0");
    detail::require_config(trials >= 1, "experiment: trials must be >= 1");
    detail::require_config(bits >= 1, "experiment: bits must be >= 1");
    detail::require_config(!arms.empty(), "experiment: at least one method is required");
    if (low_rank) {
      detail::require_config(n >= 1 && r >= 1 && r <= n && P >= 1, "experiment: need 1 <= r <= n, P >= 1");
      detail::require_config(grid_kind == GridKind::Oversampling, "experiment: low rank grids are M/P ratios");
    } else if (grid_kind == GridKind::Sparsity) {
      detail::require_config(grid.back() <= static_cast<double>(N), "experiment: K grid exceeds N");
      detail::require_config(oversampling > 0.0, "experiment: oversampling must be > 0");
    } else {
      detail::require_config(K >= 1 && K <= N, "experiment: need 1 <= K <= N");
    }
    solver.validate();
  }
};

inline std::vector<Arm> make_arms(const std::vector<Method>& methods, const std::vector<Distribution>& dists) {
  std::vector<Arm> arms;
  for (const auto d : dists) {
    for (const auto m : methods) {
      std::string label = to_string(m);
      if (dists.size() > 1) label += "@" + std::string(to_string(d));
      arms.push_back(Arm{m, d, label});
    }
  }
  return arms;
}

/// Standard presets. Paper scale mirrors the published setups; desk scale is
/// a reduced version that runs in minutes on a single core.
inline ExperimentSpec make_preset(Preset preset, Scale scale, std::uint64_t master_seed = 7) {
  ExperimentSpec s;
  s.preset = preset;
  s.scale = scale;
  s.master_seed = master_seed;
  const bool paper = scale == Scale::Paper;
  switch (preset) {
    case Preset::SparseGaussian:
      s.N = paper ? 2048 : 512;
      s.K = paper ? 16 : 8;
      s.bits = 3;
      s.grid = {8, 16, 32, 64, 128};
      s.trials = paper ? 20 : 10;
      s.arms = make_arms({Method::BPDN, Method::BPDQ4, Method::CoBP}, {Distribution::Gaussian});
      break;
    case Preset::BernoulliVsGaussian:
      s.N = paper ? 1024 : 256;
      s.bits = 4;
      s.grid_kind = GridKind::Sparsity;
      s.grid = paper ? std::vector<double>{1, 2, 4, 8, 16, 32, 64} : std::vector<double>{1, 2, 4, 8, 16};
      s.oversampling = 16.0;
      s.trials = 20;
      s.arms = make_arms({Method::CoBP, Method::CoBPLambda}, {Distribution::Gaussian, Distribution::Bernoulli});
      break;
    case Preset::LowRankGaussian:
      s.low_rank = true;
      s.n = paper ? 32 : 16;
      s.r = 1;
      s.P = paper ? 64 : 32;
      s.N = s.n * s.n;
      s.bits = 2;
      s.grid = {4, 8, 16, 32};
      s.trials = paper ? 20 : 10;
      s.arms = make_arms({Method::BPDN, Method::CoBP}, {Distribution::Gaussian});
      break;
    case Preset::Custom:
      s.grid = {8, 16, 32, 64, 128};
      s.arms = make_arms({Method::BPDN, Method::CoBP}, {Distribution::Gaussian});
      break;
  }
  return s;
}

/// Unit-norm K-sparse vector: uniform random support, N(0,1) values, normalized.
inline Vector gen_sparse_signal(Eigen::Index N, Eigen::Index K, std::uint64_t seed) {
  detail::require(N >= 1 && K >= 1 && K <= N, "gen_sparse_signal: need 1 <= K <= N");
  SplitMix64 rng(seed);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i) idx[static_cast<std::size_t>(i)] = i;
  // Partial Fisher-Yates: the first K slots are a uniform K-subset.
  for (Eigen::Index i = 0; i < K; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(N - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  Vector x = Vector::Zero(N);
  double nrm = 0.0;
  while (nrm == 0.0) {
    for (Eigen::Index i = 0; i < K; ++i) x(idx[static_cast<std::size_t>(i)]) = rng.normal();
    nrm = x.norm();
  }
  return x / nrm;
}

/// ve(v v^T / ||v||^2) for v ~ N(0, I_n).
inline Vector gen_rank1(Eigen::Index n, std::uint64_t seed) {
  detail::require(n >= 1, "gen_rank1: n must be >= 1");
  SplitMix64 rng(seed);
  Vector v(n);
  double nrm2 = 0.0;
  while (nrm2 == 0.0) {
    for (auto& e : v) e = rng.normal();
    nrm2 = v.squaredNorm();
  }
  return vectorize(v * v.transpose() / nrm2);
}

struct TrialRecord {
  std::string preset;
  std::string method;  // arm label
  double grid_value = 0.0;
  int trial_index = 0;
  std::uint64_t seed = 0;
  double error_l2 = 0.0;  // NaN when the solver failed
  int iterations = 0;
  bool converged = false;
  double saturation = 0.0;
  double wall_ms = 0.0;
  double max_violation = 0.0;
  bool failed = false;
  std::string message;
};

/// Pure function of (master seed, preset, grid value, trial); independent of
/// the method so all arms see the same signal.
inline std::uint64_t trial_seed(std::uint64_t master_seed, Preset preset, double grid_value, int trial_index) {
  std::uint64_t h = splitmix64_mix(master_seed);
  h = combine_seed(h, static_cast<std::uint64_t>(preset));
  h = combine_seed(h, std::bit_cast<std::uint64_t>(grid_value));
  h = combine_seed(h, static_cast<std::uint64_t>(trial_index));
  return h;
}

/// Number of measurements and sparsity used at one grid point.
struct GridPoint {
  Eigen::Index M = 1;
  Eigen::Index K = 1;
};

inline GridPoint grid_point(const ExperimentSpec& spec, double grid_value) {
  GridPoint g;
  if (spec.low_rank) {
    g.K = spec.r;
    g.M = std::llround(grid_value * static_cast<double>(spec.P));
  } else if (spec.grid_kind == GridKind::Sparsity) {
    g.K = std::llround(grid_value);
    g.M = std::llround(spec.oversampling * grid_value);
  } else {
    g.K = spec.K;
    g.M = std::llround(grid_value * static_cast<double>(spec.K));
  }
  detail::require_config(g.M >= 1 && g.K >= 1, "experiment: grid value gives M < 1 or K < 1");
  return g;
}

inline TrialRecord run_trial(const ExperimentSpec& spec, const Arm& arm, double grid_value, int trial_index) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.preset = to_string(spec.preset);
  rec.method = arm.label;
  rec.grid_value = grid_value;
  rec.trial_index = trial_index;
  rec.seed = trial_seed(spec.master_seed, spec.preset, grid_value, trial_index);

  const GridPoint gp = grid_point(spec, grid_value);
  const AtomicModel model = spec.low_rank ? AtomicModel::low_rank(spec.n, spec.r) : AtomicModel::sparse(spec.N, gp.K);
  const Vector x0 = spec.low_rank ? gen_rank1(spec.n, combine_seed(rec.seed, 1))
                                  : gen_sparse_signal(spec.N, gp.K, combine_seed(rec.seed, 1));
  const QuantizerConfig qcfg = QuantizerConfig::from_bits(spec.bits);
  const SensingEnsemble ens =
      draw_ensemble(gp.M, model.dimension(), arm.dist, qcfg.delta, combine_seed(rec.seed, 2 + static_cast<int>(arm.dist)));
  const QuantizedMeasurements q = sense(x0, ens, qcfg);
  rec.saturation = saturation_fraction(q);

  try {
    ReconResult res;
    switch (arm.method) {
      case Method::CoBP: res = cobp(q, ens, qcfg, model, spec.solver); break;
      case Method::CoBPLambda:
        res = cobp_lambda(q, ens, qcfg, model, x0.lpNorm<Eigen::Infinity>(), spec.solver);
        break;
      case Method::BPDN:
        res = bpdn(q, ens, qcfg, model, epsilon_bpdn(gp.M, qcfg.delta, spec.bpdn_kappa), spec.solver);
        break;
      case Method::BPDQ4:
        res = bpdq(q, ens, qcfg, model, epsilon_bpdq4(gp.M, qcfg.delta, spec.bpdq_kappa4), spec.solver);
        break;
    }
    rec.error_l2 = (res.x_star - x0).norm();
    rec.iterations = res.iterations;
    rec.converged = res.converged;
    rec.max_violation = res.max_violation();
  } catch (const NumericalFailure& e) {
    rec.failed = true;
    rec.error_l2 = std::numeric_limits<double>::quiet_NaN();
    rec.message = e.what();
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t n_points_used = 0;
};

struct LogPoint {
  double m = 0.0;
  double err = 0.0;
};

/// OLS fit of log2(err) on log2(m) over the `last_k` points with largest m.
inline SlopeFit fit_log_slope(std::vector<LogPoint> points, std::size_t last_k = 4) {
  detail::require(last_k >= 2, "fit_log_slope: last_k must be >= 2");
  for (const auto& p : points)
    detail::require(p.m > 0.0 && p.err > 0.0 && std::isfinite(p.err), "fit_log_slope: points must be positive");
  std::sort(points.begin(), points.end(), [](const LogPoint& a, const LogPoint& b) { return a.m < b.m; });
  const std::size_t k = std::min(last_k, points.size());
  detail::require(k >= 2, "fit_log_slope: fewer than 2 usable points");
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = points.size() - k; i < points.size(); ++i) {
    sx += std::log2(points[i].m);
    sy += std::log2(points[i].err);
  }
  const double mx = sx / static_cast<double>(k);
  const double my = sy / static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = points.size() - k; i < points.size(); ++i) {
    const double dx = std::log2(points[i].m) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log2(points[i].err) - my);
  }
  detail::require(sxx > 0.0, "fit_log_slope: grid values must be distinct");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.n_points_used = k;
  return fit;
}

struct CurvePoint {
  double grid_value = 0.0;
  double mean_error = std::numeric_limits<double>::quiet_NaN();
  double median_error = std::numeric_limits<double>::quiet_NaN();
  int included = 0;
  int excluded = 0;
};

struct ArmSummary {
  std::string label;
  std::vector<CurvePoint> curve;
  bool has_slope = false;
  SlopeFit slope;
  std::size_t last_k = 4;

  const CurvePoint& at(double grid_value) const {
    for (const auto& p : curve)
      if (p.grid_value == grid_value) return p;
    throw InvalidInput("no curve point at grid value " + std::to_string(grid_value));
  }
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<TrialRecord> records;
  std::vector<ArmSummary> arms;
  int failed = 0;
  int excluded = 0;

  double failure_fraction() const {
    return records.empty() ? 0.0 : static_cast<double>(failed) / static_cast<double>(records.size());
  }
  const ArmSummary& arm(const std::string& label) const {
    for (const auto& a : arms)
      if (a.label == label) return a;
    throw InvalidInput("no arm labelled " + label);
  }
};

/// A trial enters the means if it solved and was feasible to 10 tol_feas,
/// converged or not.
inline bool usable(const TrialRecord& r, const SolverConfig& cfg) {
  return !r.failed && std::isfinite(r.error_l2) && (r.converged || r.max_violation <= 10.0 * cfg.tol_feas);
}

inline std::vector<ArmSummary> summarize(const ExperimentSpec& spec, const std::vector<TrialRecord>& records) {
  std::vector<ArmSummary> out;
  for (const auto& arm : spec.arms) {
    ArmSummary s;
    s.label = arm.label;
    std::vector<LogPoint> pts;
    for (const double g : spec.grid) {
      CurvePoint cp;
      cp.grid_value = g;
      std::vector<double> errs;
      for (const auto& r : records) {
        if (r.method != arm.label || r.grid_value != g) continue;
        if (usable(r, spec.solver)) errs.push_back(r.error_l2);
        else ++cp.excluded;
      }
      cp.included = static_cast<int>(errs.size());
      if (!errs.empty()) {
        double sum = 0.0;
        for (const double e : errs) sum += e;
        cp.mean_error = sum / static_cast<double>(errs.size());
        std::sort(errs.begin(), errs.end());
        const std::size_t h = errs.size() / 2;
        cp.median_error = errs.size() % 2 ? errs[h] : 0.5 * (errs[h - 1] + errs[h]);
        if (cp.mean_error > 0.0) pts.push_back({g, cp.mean_error});
      }
      s.curve.push_back(cp);
    }
    if (pts.size() >= 2) {
      s.slope = fit_log_slope(pts, s.last_k);
      s.has_slope = true;
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Runs every (arm, grid value, trial) on `jobs` worker threads. Records come
/// back in a fixed order regardless of scheduling.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, unsigned jobs = 1) {
  spec.validate();
  struct Task {
    std::size_t arm;
    double grid;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t a = 0; a < spec.arms.size(); ++a)
    for (const double g : spec.grid)
      for (int t = 0; t < spec.trials; ++t) tasks.push_back({a, g, t});

  ExperimentResult result;
  result.spec = spec;
  result.records.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& t = tasks[i];
      result.records[i] = run_trial(spec, spec.arms[t.arm], t.grid, t.trial);
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
  }

  for (const auto& r : result.records) {
    if (r.failed) ++result.failed;
    if (!usable(r, spec.solver)) ++result.excluded;
  }
  result.arms = summarize(spec, result.records);
  return result;
}

}  // namespace qcs
