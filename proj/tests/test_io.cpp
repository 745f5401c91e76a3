#include <cmath>
#include <cstring>
#include <sstream>

#include <gtest/gtest.h>

#include "cobp/io.hpp"

namespace {

qcs::Instance make_instance(qcs::Distribution d, std::uint64_t seed) {
  const auto cfg = qcs::QuantizerConfig::from_bits(3);
  qcs::Instance inst;
  inst.ensemble = qcs::draw_ensemble(12, 7, d, cfg.delta, seed);
  inst.measurements = qcs::sense(qcs::gen_sparse_signal(7, 2, seed), inst.ensemble, cfg);
  return inst;
}

TEST(InstanceFile, RoundTripIsExact) {
  for (const auto d : {qcs::Distribution::Gaussian, qcs::Distribution::Bernoulli, qcs::Distribution::UniformSym}) {
    const auto inst = make_instance(d, 17);
    std::stringstream ss;
    qcs::write_instance(ss, inst);
    const auto back = qcs::read_instance(ss);
    EXPECT_EQ(back.ensemble.dist, d);
    EXPECT_EQ(back.ensemble.seed, 17u);
    EXPECT_EQ(back.measurements.delta, inst.measurements.delta);
    EXPECT_EQ(back.ensemble.phi, inst.ensemble.phi);
    EXPECT_EQ(back.ensemble.dither, inst.ensemble.dither);
    EXPECT_EQ(back.measurements.q, inst.measurements.q);
  }
}

TEST(InstanceFile, RejectsMalformedInput) {
  std::stringstream bad_magic("something 1\n");
  EXPECT_THROW(qcs::read_instance(bad_magic), qcs::InvalidInput);

  const auto inst = make_instance(qcs::Distribution::Gaussian, 3);
  std::stringstream full;
  qcs::write_instance(full, inst);
  const std::string text = full.str();
  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(qcs::read_instance(truncated), qcs::InvalidInput);

  auto off = inst;
  off.measurements.q(0) += 0.1;
  std::stringstream off_lattice;
  qcs::write_instance(off_lattice, off);
  EXPECT_THROW(qcs::read_instance(off_lattice), qcs::InvalidInput);
}

TEST(TrialsCsv, RoundTripIsLossless) {
  std::vector<qcs::TrialRecord> recs;
  qcs::SplitMix64 rng(5);
  for (int i = 0; i < 50; ++i) {
    qcs::TrialRecord r;
    r.preset = "sparse-gaussian";
    r.method = i % 2 ? "cobp" : "cobp@bernoulli";
    r.grid_value = std::ldexp(1.0, i % 7);
    r.trial_index = i;
    r.seed = rng();
    r.error_l2 = rng.uniform01() * std::exp(rng.uniform(-30, 3));
    r.iterations = static_cast<int>(rng.below(50000));
    r.converged = i % 3 != 0;
    r.saturation = rng.uniform01();
    r.wall_ms = rng.uniform(0, 1e5);
    recs.push_back(r);
  }
  recs[4].error_l2 = std::numeric_limits<double>::quiet_NaN();
  std::stringstream ss;
  qcs::write_trials_csv(ss, recs);
  const auto back = qcs::read_trials_csv(ss);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].preset, recs[i].preset);
    EXPECT_EQ(back[i].method, recs[i].method);
    EXPECT_EQ(back[i].grid_value, recs[i].grid_value);
    EXPECT_EQ(back[i].trial_index, recs[i].trial_index);
    EXPECT_EQ(back[i].seed, recs[i].seed);
    if (i == 4) {
      EXPECT_TRUE(std::isnan(back[i].error_l2));
      EXPECT_TRUE(back[i].failed);
    } else {
      EXPECT_EQ(back[i].error_l2, recs[i].error_l2);
    }
    EXPECT_EQ(back[i].iterations, recs[i].iterations);
    EXPECT_EQ(back[i].converged, recs[i].converged);
    EXPECT_EQ(back[i].saturation, recs[i].saturation);
    EXPECT_EQ(back[i].wall_ms, recs[i].wall_ms);
  }
}

TEST(TrialsCsv, RejectsWrongHeader) {
  std::stringstream ss("a,b,c\n");
  EXPECT_THROW(qcs::read_trials_csv(ss), qcs::InvalidInput);
}

TEST(Summary, JsonAndCurvesReflectTheRun) {
  auto s = qcs::make_preset(qcs::Preset::Custom, qcs::Scale::Desk, 3);
  s.N = 32;
  s.K = 2;
  s.grid = {8, 16};
  s.trials = 2;
  const auto res = qcs::run_experiment(s, 1);
  const auto j = qcs::summary_json(res);
  EXPECT_EQ(j["metadata"]["master_seed"], 3);
  EXPECT_EQ(j["metadata"]["tool_version"], qcs::kToolVersion);
  EXPECT_EQ(j["metadata"]["delta"], 1.5);
  ASSERT_EQ(j["arms"].size(), 2u);
  EXPECT_EQ(j["arms"][1]["method"], "cobp");
  EXPECT_EQ(j["arms"][1]["grid"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["arms"][1]["mean_error"][0].get<double>(), res.arms[1].curve[0].mean_error);
  EXPECT_EQ(j["arms"][1]["slope_fit"]["n_points_used"], 2);

  std::stringstream curves;
  qcs::write_curves_csv(curves, res);
  std::string header;
  std::getline(curves, header);
  EXPECT_EQ(header, "method,log2_grid,log2_mean_error");
  int rows = 0;
  for (std::string line; std::getline(curves, line);) ++rows;
  EXPECT_EQ(rows, 4);
}

}  // namespace
