#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "cobp/experiments.hpp"
#include "cobp/sensing.hpp"

namespace {

using qcs::DenseMatrix;
using qcs::Distribution;
using qcs::QuantizerConfig;
using qcs::Vector;

TEST(Quantize, Examples) {
  EXPECT_EQ(qcs::quantize(0.0, 1.0), 0.5);
  EXPECT_EQ(qcs::quantize(-0.2, 1.0), -0.5);
  EXPECT_EQ(qcs::quantize(1.49, 1.5), 0.75);
}

TEST(Quantize, RejectsNonPositiveDelta) {
  EXPECT_THROW(qcs::quantize(0.0, 0.0), qcs::InvalidConfig);
  EXPECT_THROW(qcs::quantize(0.0, -1.0), qcs::InvalidConfig);
}

TEST(Quantize, CellMembership) {
  qcs::SplitMix64 rng(4);
  for (int i = 0; i < 100000; ++i) {
    const double delta = rng.uniform(0.01, 10.0);
    const double t = rng.uniform(-50.0, 50.0);
    const double d = qcs::quantize(t, delta) - t;
    EXPECT_GT(d, -0.5 * delta * (1.0 + 1e-12));
    EXPECT_LE(d, 0.5 * delta * (1.0 + 1e-12));
  }
  // Bin edges are left-closed.
  EXPECT_EQ(qcs::quantize(2.0, 1.0), 2.5);
  EXPECT_EQ(qcs::quantize(-1.0, 1.0), -0.5);
}

TEST(DeltaFromBits, Examples) {
  EXPECT_EQ(qcs::delta_from_bits(1), 6.0);
  EXPECT_EQ(qcs::delta_from_bits(3), 1.5);
  EXPECT_EQ(qcs::delta_from_bits(4), 0.75);
  EXPECT_THROW(qcs::delta_from_bits(0), qcs::InvalidConfig);
}

TEST(DrawEnsemble, GaussianMoments) {
  const auto ens = qcs::draw_ensemble(1000, 1, Distribution::Gaussian, 1.0, 11);
  const double mean = ens.phi.mean();
  const double var = (ens.phi.array() - mean).square().sum() / 999.0;
  EXPECT_GE(mean, -0.1);
  EXPECT_LE(mean, 0.1);
  EXPECT_GE(var, 0.85);
  EXPECT_LE(var, 1.15);
}

TEST(DrawEnsemble, BernoulliSupport) {
  const auto ens = qcs::draw_ensemble(200, 50, Distribution::Bernoulli, 1.0, 12);
  for (Eigen::Index i = 0; i < ens.phi.size(); ++i) {
    const double v = ens.phi.data()[i];
    EXPECT_TRUE(v == 1.0 || v == -1.0);
  }
  EXPECT_NEAR(ens.phi.mean(), 0.0, 0.03);
}

TEST(DrawEnsemble, UniformSymHasUnitVariance) {
  const auto ens = qcs::draw_ensemble(400, 100, Distribution::UniformSym, 1.0, 13);
  EXPECT_LE(ens.phi.cwiseAbs().maxCoeff(), std::sqrt(3.0));
  EXPECT_NEAR(ens.phi.array().square().mean(), 1.0, 0.02);
}

TEST(DrawEnsemble, DitherRangeAndMean) {
  const double delta = 0.75;
  const auto ens = qcs::draw_ensemble(1000, 3, Distribution::Gaussian, delta, 14);
  EXPECT_LE(ens.dither.cwiseAbs().maxCoeff(), 0.5 * delta);
  EXPECT_GE(ens.dither.mean(), -0.05 * delta);
  EXPECT_LE(ens.dither.mean(), 0.05 * delta);
}

TEST(DrawEnsemble, DeterministicPerSeed) {
  for (const auto d : {Distribution::Gaussian, Distribution::Bernoulli, Distribution::UniformSym}) {
    const auto a = qcs::draw_ensemble(17, 9, d, 0.3, 99);
    const auto b = qcs::draw_ensemble(17, 9, d, 0.3, 99);
    const auto c = qcs::draw_ensemble(17, 9, d, 0.3, 100);
    EXPECT_EQ(std::memcmp(a.phi.data(), b.phi.data(), sizeof(double) * a.phi.size()), 0);
    EXPECT_EQ(std::memcmp(a.dither.data(), b.dither.data(), sizeof(double) * a.dither.size()), 0);
    EXPECT_NE(a.phi, c.phi);
  }
}

qcs::SensingEnsemble identity_ensemble(Eigen::Index m) {
  qcs::SensingEnsemble e;
  e.phi = DenseMatrix::Identity(m, m);
  e.dither = Vector::Zero(m);
  return e;
}

TEST(Sense, ZeroSignalZeroDither) {
  const auto e = identity_ensemble(4);
  const auto q = qcs::sense(Vector::Zero(4), e, QuantizerConfig::from_delta(1.0));
  for (const double v : q.q) EXPECT_EQ(v, 0.5);
}

TEST(Sense, IdentityExample) {
  const auto e = identity_ensemble(3);
  Vector x(3);
  x << 0.2, 1.7, -0.6;
  const auto q = qcs::sense(x, e, QuantizerConfig::from_delta(1.0));
  EXPECT_EQ(q.q(0), 0.5);
  EXPECT_EQ(q.q(1), 1.5);
  EXPECT_EQ(q.q(2), -0.5);
}

TEST(Sense, DimensionMismatch) {
  const auto e = identity_ensemble(3);
  EXPECT_THROW(qcs::sense(Vector::Zero(4), e, QuantizerConfig::from_delta(1.0)), qcs::InvalidInput);
}

TEST(IsConsistent, Examples) {
  const auto cfg = QuantizerConfig::from_delta(1.0);
  const auto e = qcs::draw_ensemble(20, 10, Distribution::Gaussian, cfg.delta, 5);
  const Vector x0 = qcs::gen_sparse_signal(10, 3, 6);
  const auto q = qcs::sense(x0, e, cfg);
  EXPECT_TRUE(qcs::is_consistent(x0, q, e, cfg, 0.0));

  // Identity sensing, residual 0.51 delta on one entry.
  const auto id = identity_ensemble(3);
  qcs::QuantizedMeasurements qi{Vector::Constant(3, 0.5), 1.0};
  Vector u(3);
  u << 0.5 + 0.51, 0.5, 0.5;
  EXPECT_FALSE(qcs::is_consistent(u, qi, id, cfg, 0.0));
  EXPECT_TRUE(qcs::is_consistent(u, qi, id, cfg, 0.02));
}

TEST(IsConsistent, HoldsForGeneratedInstances) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto cfg = QuantizerConfig::from_bits(1 + static_cast<int>(s % 4));
    const auto dist = static_cast<Distribution>(s % 3);
    const auto e = qcs::draw_ensemble(30, 16, dist, cfg.delta, s);
    const Vector x0 = qcs::gen_sparse_signal(16, 1 + static_cast<Eigen::Index>(s % 5), s + 1000);
    EXPECT_TRUE(qcs::is_consistent(x0, qcs::sense(x0, e, cfg), e, cfg, 0.0)) << s;
  }
}

TEST(SaturationFraction, Examples) {
  EXPECT_EQ(qcs::saturation_fraction({Vector::Constant(5, 1.0), 2.0}), 0.0);
  Vector q(4);
  q << 0.5, 1.5, -0.5, -0.5;
  EXPECT_EQ(qcs::saturation_fraction({q, 1.0}), 0.25);
}

TEST(SaturationFraction, OneBitRegimeIsRarelySaturated) {
  const auto cfg = QuantizerConfig::from_bits(1);
  const auto e = qcs::draw_ensemble(10000, 8, Distribution::Gaussian, cfg.delta, 7);
  const Vector x0 = qcs::gen_sparse_signal(8, 8, 7);
  EXPECT_LE(qcs::saturation_fraction(qcs::sense(x0, e, cfg)), 0.008);
}

TEST(QuantizationNoise, IsUniform) {
  const double delta = 1.0;
  const auto cfg = QuantizerConfig::from_delta(delta);
  const Eigen::Index m = 100000;
  const auto e = qcs::draw_ensemble(m, 4, Distribution::Gaussian, delta, 21);
  const Vector x0 = qcs::gen_sparse_signal(4, 2, 21);
  const auto q = qcs::sense(x0, e, cfg);
  const Vector n = q.q - (e.phi * x0 + e.dither);
  const double mean = n.mean();
  const double var = (n.array() - mean).square().sum() / static_cast<double>(m - 1);
  EXPECT_GE(mean, -0.01 * delta);
  EXPECT_LE(mean, 0.01 * delta);
  EXPECT_GE(var, 0.95 * delta * delta / 12.0);
  EXPECT_LE(var, 1.05 * delta * delta / 12.0);
}

TEST(QuantizerConfig, Validation) {
  EXPECT_THROW(QuantizerConfig::from_delta(0.0), qcs::InvalidConfig);
  QuantizerConfig bad{1.0, 3};
  EXPECT_THROW(bad.validate(), qcs::InvalidConfig);
  EXPECT_NO_THROW(QuantizerConfig::from_bits(3).validate());
}

TEST(Distribution, StringRoundTrip) {
  for (const auto d : {Distribution::Gaussian, Distribution::Bernoulli, Distribution::UniformSym})
    EXPECT_EQ(qcs::distribution_from_string(qcs::to_string(d)), d);
  EXPECT_THROW(qcs::distribution_from_string("cauchy"), qcs::InvalidConfig);
}

}  // namespace
