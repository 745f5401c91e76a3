#pragma once

// Command-line front end: experiment, solve, bounds, width.
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cobp/bounds.hpp"
#include "cobp/experiments.hpp"
#include "cobp/io.hpp"
#include "cobp/models.hpp"
#include "cobp/solvers.hpp"

namespace qcs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Environment variable naming the directory that receives timestamped runs
/// when `experiment` is called without --out.
inline constexpr const char* kOutputRootEnv = "COBP_OUTPUT_ROOT";

inline const char* kPresetHelp = R"(Preset defaults (paper scale / desk scale):
  sparse-gaussian        N=2048 K=16 / N=512 K=8, B=3, M/K in {8,16,32,64,128},
                         trials 20 / 10, methods bpdn, bpdq4, cobp
  bernoulli-vs-gaussian  N=1024 K in {1..64} / N=256 K in {1..16}, B=4, M/K=16,
                         trials 20, cobp and cobp-lambda (lambda=||x0||_inf)
                         under Gaussian and Bernoulli sensing
  lowrank                32x32 P=64 / 16x16 P=32, rank 1, B=2,
                         M/P in {4,8,16,32}, trials 20 / 10, methods bpdn, cobp)";

struct SolverFlags {
  std::optional<int> max_iters;
  std::optional<double> tol_feas;
  std::optional<double> tol_rel_change;
  std::optional<double> step_safety;
  std::optional<int> check_every;

  void add_to(CLI::App* app) {
    app->add_option("--max-iters", max_iters, "Primal-dual iteration cap (default 50000)");
    app->add_option("--tol-feas", tol_feas, "Feasibility tolerance in block units (default 1e-5)");
    app->add_option("--tol-rel-change", tol_rel_change, "Relative-change stopping tolerance (default 1e-7)");
    app->add_option("--step-safety", step_safety, "tau = sigma = safety / ||L|| (default 0.99)");
    app->add_option("--check-every", check_every, "Iterations between convergence checks (default 50)");
  }
  void apply(SolverConfig& cfg) const {
    if (max_iters) cfg.max_iters = *max_iters;
    if (tol_feas) cfg.tol_feas = *tol_feas;
    if (tol_rel_change) cfg.tol_rel_change = *tol_rel_change;
    if (step_safety) cfg.step_safety = *step_safety;
    if (check_every) cfg.check_every = *check_every;
    cfg.validate();
  }
};

inline std::string timestamp_dirname(const std::string& preset, const std::string& scale) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S") << '-' << preset << '-' << scale;
  return os.str();
}

inline int run_experiment_cmd(const std::string& preset_name, const std::string& scale_name, std::uint64_t seed,
                              const std::string& out_dir, unsigned jobs, std::optional<int> trials,
                              std::optional<int> bits, const SolverFlags& sflags, std::ostream& out) {
  ExperimentSpec spec = make_preset(preset_from_string(preset_name), scale_from_string(scale_name), seed);
  if (trials) spec.trials = *trials;
  if (bits) spec.bits = *bits;
  sflags.apply(spec.solver);
  spec.validate();

  std::filesystem::path dir;
  if (!out_dir.empty()) {
    dir = out_dir;
  } else {
    const char* root = std::getenv(kOutputRootEnv);
    dir = std::filesystem::path(root && *root ? root : "runs") / timestamp_dirname(preset_name, scale_name);
  }

  const ExperimentResult res = run_experiment(spec, jobs);
  write_experiment(dir, res);

  out << "preset " << preset_name << " scale " << scale_name << " seed " << seed << " -> " << dir.string() << '\n';
  for (const auto& a : res.arms) {
    out << std::left << std::setw(24) << a.label;
    for (const auto& p : a.curve) out << ' ' << p.grid_value << ':' << std::setprecision(4) << p.mean_error;
    if (a.has_slope) out << "  slope " << std::setprecision(3) << a.slope.slope;
    out << '\n';
  }
  out << "trials " << res.records.size() << " failed " << res.failed << " excluded " << res.excluded << '\n';
  if (res.failure_fraction() > 0.10) {
    out << "more than 10% of trials failed\n";
    return kExitNumerical;
  }
  return kExitOk;
}

inline int run_solve_cmd(const std::string& instance_path, const std::string& method_name,
                         std::optional<double> lambda, std::optional<double> epsilon, double kappa,
                         std::optional<double> kappa4, const std::string& model_name, const SolverFlags& sflags,
                         std::ostream& out) {
  const Instance inst = load_instance(instance_path);
  const Eigen::Index n_ambient = inst.ensemble.dimension();
  const Eigen::Index m = inst.ensemble.measurements();
  AtomicModel model = AtomicModel::sparse(n_ambient, 1);
  if (model_name == "lowrank") {
    const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n_ambient))));
    if (side * side != n_ambient) throw InvalidInput("solve: lowrank model needs a square N");
    model = AtomicModel::low_rank(side, 1);
  } else if (model_name != "sparse") {
    throw InvalidConfig("solve: unknown model " + model_name);
  }
  SolverConfig cfg;
  sflags.apply(cfg);
  const QuantizerConfig qcfg = QuantizerConfig::from_delta(inst.measurements.delta);
  const Method method = method_from_string(method_name);

  ReconResult res;
  double radius = 0.0;
  switch (method) {
    case Method::CoBP: res = cobp(inst.measurements, inst.ensemble, qcfg, model, cfg); break;
    case Method::CoBPLambda:
      if (!lambda) throw InvalidConfig("solve: cobp-lambda needs --lambda");
      res = cobp_lambda(inst.measurements, inst.ensemble, qcfg, model, *lambda, cfg);
      break;
    case Method::BPDN:
      radius = epsilon ? *epsilon : epsilon_bpdn(m, qcfg.delta, kappa);
      res = bpdn(inst.measurements, inst.ensemble, qcfg, model, radius, cfg);
      break;
    case Method::BPDQ4:
      radius = epsilon ? *epsilon : epsilon_bpdq4(m, qcfg.delta, kappa4.value_or(kDefaultKappa4));
      res = bpdq(inst.measurements, inst.ensemble, qcfg, model, radius, cfg);
      break;
  }

  out << std::setprecision(17);
  out << "method " << method_name << '\n';
  out << "model " << model_name << '\n';
  out << "M " << m << " N " << n_ambient << " delta " << qcfg.delta << '\n';
  if (radius > 0.0) out << "epsilon " << radius << '\n';
  if (lambda) out << "lambda " << *lambda << '\n';
  out << "iterations " << res.iterations << '\n';
  out << "converged " << (res.converged ? "true" : "false") << '\n';
  out << "objective " << res.objective << '\n';
  out << "max_violation " << res.max_violation() << '\n';
  out << "consistency_residual " << consistency_residual(res.x_star, inst.measurements, inst.ensemble) << '\n';
  out << "x_star";
  for (const double v : res.x_star) out << ' ' << v;
  out << '\n';
  return kExitOk;
}

struct BoundsFlags {
  std::vector<double> M{16};
  double delta = 2.0;
  double w = 1.0;
  std::optional<double> eps;
  std::optional<double> K;
  std::optional<double> N;
  double lambda = 1.0;
  double K0 = 0.0;
  bounds::BoundConstants c;
};

inline int run_bounds_cmd(const BoundsFlags& f, std::ostream& out) {
  f.c.validate();
  out << std::setprecision(10);
  out << "constants C=" << f.c.C << " Cp=" << f.c.Cp << " Ccor=" << f.c.Ccor << " kappa_sg=" << f.c.kappa_sg
      << " alpha=" << f.c.alpha << '\n';
  out << "kappa_sg_upper(alpha) = " << bounds::kappa_sg_upper(f.c.alpha) << '\n';
  out << "min_antisparse_level(kappa_sg) = " << bounds::min_antisparse_level(f.c.kappa_sg) << '\n';
  if (f.eps) {
    out << "min_measurements_general(w, delta, eps) = " << bounds::min_measurements_general(f.w, f.delta, *f.eps, f.c)
        << '\n';
    if (f.K && f.N) {
      const auto b = bounds::min_measurements_sparse(*f.K, *f.N, f.delta, *f.eps, f.c);
      out << "min_measurements_sparse(K, N, delta, eps) = " << b.value << (b.warning ? "  (warning: log argument <= 1)" : "")
          << '\n';
    }
    out << "cobp_lambda_error_bound = " << bounds::prop3_error(*f.eps, f.lambda, f.K0) << '\n';
  }
  out << std::setw(14) << "M" << std::setw(24) << "error_bound_gaussian" << std::setw(26)
      << "error_bound_subgaussian" << '\n';
  for (const double m : f.M) {
    out << std::setw(14) << m << std::setw(24) << bounds::error_bound_gaussian(m, f.delta, f.w, f.c) << std::setw(26)
        << bounds::error_bound_subgaussian(m, f.delta, f.w, f.lambda, f.c) << '\n';
  }
  return kExitOk;
}

inline int run_width_cmd(const std::string& model_name, Eigen::Index N, Eigen::Index K, Eigen::Index n,
                         Eigen::Index r, std::size_t samples, std::uint64_t seed, std::ostream& out) {
  const AtomicModel model = model_name == "lowrank" ? AtomicModel::low_rank(n, r)
                            : model_name == "sparse" ? AtomicModel::sparse(N, K)
                                                     : throw InvalidConfig("width: unknown model " + model_name);
  const WidthEstimate w = width_estimate(model, samples, seed);
  out << std::setprecision(10);
  out << "model " << model_name << " dimension " << model.dimension() << " samples " << samples << " seed " << seed
      << '\n';
  out << "mean " << w.mean << '\n';
  out << "std_error " << w.std_error << '\n';
  out << "mean_squared " << w.mean * w.mean << '\n';
  if (model.is_sparse()) {
    const double k = static_cast<double>(K);
    out << "reference 2K log(2N/K) + 5K = " << 2.0 * k * std::log(2.0 * static_cast<double>(N) / k) + 5.0 * k << '\n';
  } else {
    out << "reference 4 n r = " << 4 * n * r << '\n';
  }
  return kExitOk;
}

/// Parses argv and runs one subcommand.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Consistent basis pursuit for quantized compressed sensing"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run an error-decay experiment and write trials.csv, summary.json, curves.csv");
  std::string preset = "sparse-gaussian";
  std::string scale = "paper";
  std::uint64_t seed = 7;
  std::string out_dir;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::optional<int> trials;
  std::optional<int> bits;
  SolverFlags exp_solver;
  exp->add_option("--preset", preset, "sparse-gaussian | bernoulli-vs-gaussian | lowrank")
      ->check(CLI::IsMember({"sparse-gaussian", "bernoulli-vs-gaussian", "lowrank"}))
      ->capture_default_str();
  exp->add_option("--scale", scale, "paper | desk")->check(CLI::IsMember({"paper", "desk"}))->capture_default_str();
  exp->add_option("--seed", seed, "Master seed")->capture_default_str();
  exp->add_option("--out", out_dir,
                  std::string("Output directory (default: $") + kOutputRootEnv + " or ./runs, plus a timestamped subdirectory)");
  exp->add_option("--jobs", jobs, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);
  exp->add_option("--trials", trials, "Override the preset's trial count")->check(CLI::PositiveNumber);
  exp->add_option("--bits", bits, "Override the preset's bit depth B (delta = 6 * 2^(1-B))")->check(CLI::PositiveNumber);
  exp_solver.add_to(exp);
  exp->footer(kPresetHelp);

  // solve
  auto* slv = app.add_subcommand("solve", "Solve one serialized instance and print x* with diagnostics");
  std::string instance;
  std::string method = "cobp";
  std::optional<double> lambda;
  std::optional<double> epsilon;
  double kappa = 2.0;
  std::optional<double> kappa4;
  std::string model = "sparse";
  SolverFlags slv_solver;
  slv->add_option("--instance", instance, "Instance file (cobp-instance v1 text format)")->required();
  slv->add_option("--method", method, "cobp | cobp-lambda | bpdn | bpdq4")
      ->check(CLI::IsMember({"cobp", "cobp-lambda", "bpdn", "bpdq4"}))
      ->capture_default_str();
  slv->add_option("--lambda", lambda, "l_inf bound for cobp-lambda")->check(CLI::PositiveNumber);
  slv->add_option("--epsilon", epsilon, "Residual radius for bpdn / bpdq4 (default from M and delta)");
  slv->add_option("--kappa", kappa, "bpdn slack: eps^2 = M delta^2/12 + kappa sqrt(M)")->capture_default_str();
  slv->add_option("--kappa4", kappa4, "bpdq4 slack (default 8/15)");
  slv->add_option("--model", model, "sparse (l1) | lowrank (nuclear, N must be square)")
      ->check(CLI::IsMember({"sparse", "lowrank"}))
      ->capture_default_str();
  slv_solver.add_to(slv);

  // bounds
  auto* bnd = app.add_subcommand("bounds", "Evaluate the sample-complexity and error-bound calculators");
  BoundsFlags bf;
  bnd->add_option("--M", bf.M, "Measurement counts (comma separated)")->delimiter(',')->capture_default_str();
  bnd->add_option("--delta", bf.delta, "Quantization bin width")->capture_default_str();
  bnd->add_option("--w", bf.w, "Gaussian mean width")->capture_default_str();
  bnd->add_option("--eps", bf.eps, "Consistency width / target error in (0, 1)");
  bnd->add_option("--K", bf.K, "Sparsity (sparse measurement bound)");
  bnd->add_option("--N", bf.N, "Ambient dimension (sparse measurement bound)");
  bnd->add_option("--lambda", bf.lambda, "l_inf bound of the signal")->capture_default_str();
  bnd->add_option("--K0", bf.K0, "Antisparsity level for the CoBP_lambda error bound")->capture_default_str();
  bnd->add_option("--C", bf.c.C, "Constant of the general measurement bound")->capture_default_str();
  bnd->add_option("--Cp", bf.c.Cp, "Constant of the sparse measurement bound")->capture_default_str();
  bnd->add_option("--Ccor", bf.c.Ccor, "Prefactor of the error bounds")->capture_default_str();
  bnd->add_option("--kappa-sg", bf.c.kappa_sg, "Anisotropy constant (0 for Gaussian)")->capture_default_str();
  bnd->add_option("--alpha", bf.c.alpha, "Sub-Gaussian norm")->capture_default_str();

  // width
  auto* wid = app.add_subcommand("width", "Monte-Carlo Gaussian mean width of a signal model");
  std::string wmodel = "sparse";
  Eigen::Index wN = 1024, wK = 16, wn = 32, wr = 1;
  std::size_t samples = 10000;
  std::uint64_t wseed = 1;
  wid->add_option("--model", wmodel, "sparse | lowrank")->check(CLI::IsMember({"sparse", "lowrank"}))->capture_default_str();
  wid->add_option("--N", wN, "Ambient dimension (sparse)")->capture_default_str();
  wid->add_option("--K", wK, "Sparsity (sparse)")->capture_default_str();
  wid->add_option("--n", wn, "Matrix side (lowrank)")->capture_default_str();
  wid->add_option("--r", wr, "Rank (lowrank)")->capture_default_str();
  wid->add_option("--samples", samples, "Monte-Carlo samples (>= 2)")->capture_default_str();
  wid->add_option("--seed", wseed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitValidation;
  }

  try {
    if (*exp) return run_experiment_cmd(preset, scale, seed, out_dir, jobs, trials, bits, exp_solver, out);
    if (*slv) return run_solve_cmd(instance, method, lambda, epsilon, kappa, kappa4, model, slv_solver, out);
    if (*bnd) return run_bounds_cmd(bf, out);
    if (*wid) return run_width_cmd(wmodel, wN, wK, wn, wr, samples, wseed, out);
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace qcs::cli
