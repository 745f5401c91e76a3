#pragma once

// Persistence: QCS instance files, trial CSVs, experiment summaries.
//
// Instance file (text, whitespace separated, one logical field per line):
//
//     cobp-instance 1
//     <M> <N>
//     <dist tag: gaussian|bernoulli|uniform> <delta> <seed>
//     Phi row 0: N values
//     ...
//     Phi row M-1: N values
//     xi: M values
//     q:  M values
//
// Reals are written with 17 significant digits so a write/read round trip is
// exact.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cobp/errors.hpp"
#include "cobp/experiments.hpp"
#include "cobp/sensing.hpp"

namespace qcs {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Instance {
  SensingEnsemble ensemble;
  QuantizedMeasurements measurements;
};

inline void write_instance(std::ostream& os, const Instance& inst) {
  const auto& e = inst.ensemble;
  const auto& q = inst.measurements;
  detail::require(q.size() == e.measurements() && e.dither.size() == e.measurements(), "write_instance: sizes differ");
  os << "cobp-instance 1\n" << e.measurements() << ' ' << e.dimension() << '\n';
  os << to_string(e.dist) << ' ' << format_real(q.delta) << ' ' << e.seed << '\n';
  for (Eigen::Index i = 0; i < e.phi.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.phi.cols(); ++j) os << (j ? " " : "") << format_real(e.phi(i, j));
    os << '\n';
  }
  for (Eigen::Index i = 0; i < e.dither.size(); ++i) os << (i ? " " : "") << format_real(e.dither(i));
  os << '\n';
  for (Eigen::Index i = 0; i < q.size(); ++i) os << (i ? " " : "") << format_real(q.q(i));
  os << '\n';
}

inline Instance read_instance(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "cobp-instance" || version != 1)
    throw InvalidInput("read_instance: not a cobp-instance v1 file");
  Eigen::Index m = 0, n = 0;
  std::string tag;
  double delta = 0.0;
  std::uint64_t seed = 0;
  if (!(is >> m >> n >> tag >> delta >> seed)) throw InvalidInput("read_instance: bad header");
  detail::require(m >= 1 && n >= 1, "read_instance: M and N must be >= 1");
  detail::require(delta > 0.0, "read_instance: delta must be > 0");
  Instance inst;
  inst.ensemble.dist = distribution_from_string(tag);
  inst.ensemble.seed = seed;
  inst.ensemble.phi.resize(m, n);
  inst.ensemble.dither.resize(m);
  inst.measurements.delta = delta;
  inst.measurements.q.resize(m);
  auto read = [&](double& v) {
    if (!(is >> v)) throw InvalidInput("read_instance: truncated file");
  };
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) read(inst.ensemble.phi(i, j));
  for (Eigen::Index i = 0; i < m; ++i) read(inst.ensemble.dither(i));
  for (Eigen::Index i = 0; i < m; ++i) read(inst.measurements.q(i));
  detail::require(inst.ensemble.phi.allFinite() && inst.ensemble.dither.allFinite() &&
                      inst.measurements.q.allFinite(),
                  "read_instance: non-finite value");
  detail::require(on_lattice(inst.measurements), "read_instance: q is not on the quantizer lattice");
  return inst;
}

inline void save_instance(const std::filesystem::path& path, const Instance& inst) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open " + path.string() + " for writing");
  write_instance(os, inst);
}

inline Instance load_instance(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open " + path.string());
  return read_instance(is);
}

inline constexpr const char* kTrialsHeader =
    "preset,method,grid,trial,seed,error_l2,iterations,converged,saturation,wall_ms";

inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << kTrialsHeader << '\n';
  for (const auto& r : records) {
    os << r.preset << ',' << r.method << ',' << format_real(r.grid_value) << ',' << r.trial_index << ',' << r.seed
       << ',' << format_real(r.error_l2) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
       << format_real(r.saturation) << ',' << format_real(r.wall_ms) << '\n';
  }
}

inline std::vector<TrialRecord> read_trials_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTrialsHeader) throw InvalidInput("read_trials_csv: bad header");
  std::vector<TrialRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 10) throw InvalidInput("read_trials_csv: expected 10 fields: " + line);
    TrialRecord r;
    r.preset = f[0];
    r.method = f[1];
    r.grid_value = std::stod(f[2]);
    r.trial_index = std::stoi(f[3]);
    r.seed = std::stoull(f[4]);
    r.error_l2 = std::stod(f[5]);
    r.iterations = std::stoi(f[6]);
    r.converged = f[7] == "1";
    r.saturation = std::stod(f[8]);
    r.wall_ms = std::stod(f[9]);
    r.failed = !std::isfinite(r.error_l2);
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json summary_json(const ExperimentResult& res) {
  using nlohmann::json;
  const auto& s = res.spec;
  json meta = {
      {"master_seed", s.master_seed},
      {"scale", to_string(s.scale)},
      {"preset", to_string(s.preset)},
      {"tool_version", kToolVersion},
      {"bits", s.bits},
      {"delta", delta_from_bits(s.bits)},
      {"trials", s.trials},
      {"grid_kind", s.grid_kind == GridKind::Oversampling ? "oversampling" : "sparsity"},
      {"solver",
       {{"max_iters", s.solver.max_iters},
        {"tol_feas", s.solver.tol_feas},
        {"tol_rel_change", s.solver.tol_rel_change},
        {"step_safety", s.solver.step_safety},
        {"check_every", s.solver.check_every}}},
      {"failed_trials", res.failed},
      {"excluded_trials", res.excluded},
  };
  if (s.low_rank) {
    meta["n"] = s.n;
    meta["r"] = s.r;
    meta["P"] = s.P;
  } else {
    meta["N"] = s.N;
    if (s.grid_kind == GridKind::Sparsity) meta["oversampling"] = s.oversampling;
    else meta["K"] = s.K;
  }
  json arms = json::array();
  for (const auto& a : res.arms) {
    json grid = json::array(), mean = json::array(), median = json::array(), inc = json::array(),
         exc = json::array();
    for (const auto& p : a.curve) {
      grid.push_back(p.grid_value);
      // JSON has no NaN; an empty grid point is null.
      mean.push_back(std::isfinite(p.mean_error) ? json(p.mean_error) : json());
      median.push_back(std::isfinite(p.median_error) ? json(p.median_error) : json());
      inc.push_back(p.included);
      exc.push_back(p.excluded);
    }
    json arm = {{"preset", to_string(s.preset)},
                {"method", a.label},
                {"grid", grid},
                {"mean_error", mean},
                {"median_error", median},
                {"included", inc},
                {"excluded", exc}};
    if (a.has_slope) {
      arm["slope_fit"] = {{"slope", a.slope.slope},
                          {"intercept", a.slope.intercept},
                          {"last_k", a.last_k},
                          {"n_points_used", a.slope.n_points_used}};
    } else {
      arm["slope_fit"] = nullptr;
    }
    arms.push_back(arm);
  }
  return json{{"metadata", meta}, {"arms", arms}};
}

inline void write_curves_csv(std::ostream& os, const ExperimentResult& res) {
  os << "method,log2_grid,log2_mean_error\n";
  for (const auto& a : res.arms)
    for (const auto& p : a.curve)
      if (std::isfinite(p.mean_error) && p.mean_error > 0.0)
        os << a.label << ',' << format_real(std::log2(p.grid_value)) << ',' << format_real(std::log2(p.mean_error))
           << '\n';
}

/// Writes trials.csv, summary.json and curves.csv into `dir` (created if needed).
inline void write_experiment(const std::filesystem::path& dir, const ExperimentResult& res) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw InvalidInput("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("trials.csv");
    write_trials_csv(os, res.records);
  }
  {
    auto os = open("summary.json");
    os << summary_json(res).dump(2) << '\n';
  }
  {
    auto os = open("curves.csv");
    write_curves_csv(os, res);
  }
}

}  // namespace qcs
