#include <gtest/gtest.h>

#include <random>

#include "capgrav/grid.hpp"

using namespace capgrav;

namespace {

PeriodicField random_band_limited(const SpectralGrid& g, int nmax, unsigned seed, FieldFlags flags = {true, false, MeanConvention::free}) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::map<int, cplx> modes;
  for (int n = 0; n <= nmax; ++n) {
    cplx c(N(rng), n == 0 ? 0.0 : N(rng));
    modes[n] = c;
    if (n > 0) modes[-n] = std::conj(c);
  }
  return make_field_from_modes(modes, g, flags);
}

}  // namespace

TEST(SpectralGrid, RejectsOddOrSmallSizes) {
  EXPECT_THROW(SpectralGrid(6), ContractError);
  EXPECT_THROW(SpectralGrid(9), ContractError);
  SpectralGrid g(8);
  EXPECT_DOUBLE_EQ(g.x(0), 0.0);
  EXPECT_NEAR(g.x(7), 2 * kPi * 7 / 8, 1e-15);
}

TEST(MakeField, ConstantWithZeroMeanIsRejected) {
  SpectralGrid g(16);
  std::vector<double> ones(16, 1.0);
  EXPECT_THROW(make_field(ones, g, {true, true, MeanConvention::zero_mean}), ContractError);
}

TEST(MakeField, CosineSamplesGiveHalfCoefficients) {
  SpectralGrid g(32);
  std::vector<double> s(32);
  for (int j = 0; j < 32; ++j) s[j] = std::cos(g.x(j));
  auto u = make_field(s, g, real_even(MeanConvention::zero_mean));
  for (int n = -15; n <= 16; ++n) {
    double expect = std::abs(n) == 1 ? 0.5 : 0.0;
    EXPECT_NEAR(std::abs(u.coeff(n) - expect), 0.0, 1e-15) << n;
  }
}

TEST(MakeField, ModesInverseTransformToCosine) {
  SpectralGrid g(32);
  auto u = make_field_from_modes({{3, 0.5}, {-3, 0.5}}, g, real_even());
  auto s = u.samples();
  for (int j = 0; j < 32; ++j) EXPECT_NEAR(std::abs(s[j] - std::cos(3 * g.x(j))), 0.0, 1e-14);
}

TEST(MakeField, RoundTripSamplesModesSamples) {
  SpectralGrid g(64);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<double> s(64);
  for (auto& v : s) v = U(rng);
  auto u = make_field(s, g, {true, false, MeanConvention::free});
  auto back = u.real_samples();
  for (int j = 0; j < 64; ++j) EXPECT_NEAR(back[j], s[j], 1e-13);
}

TEST(MakeField, ComplexSamplesRejectedWhenRealRequested) {
  SpectralGrid g(16);
  std::vector<cplx> s(16, cplx(0.0, 1.0));
  EXPECT_THROW(make_field(s, g, {true, false, MeanConvention::free}), ContractError);
}

TEST(ProjectMode, FixesRangeAndAnnihilatesOthers) {
  SpectralGrid g(32);
  auto u = cos_mode(g, 2);
  EXPECT_LT(relative_difference(project_mode(u, 2), u), 1e-15);
  EXPECT_EQ(l2_norm(project_mode(u, 3)), 0.0);
  EXPECT_THROW(project_mode(u, 17), ContractError);
  EXPECT_THROW(project_mode(u, 0), ContractError);
}

TEST(ProjectMode, AmplitudeAgainstNormalizedCosine) {
  SpectralGrid g(32);
  auto u = cos_mode(g, 1) + cos_mode(g, 4);
  auto mp = project_mode_pair(u, 4);
  EXPECT_NEAR(mp.plus_part.real(), std::sqrt(kPi), 1e-14);
  EXPECT_NEAR(std::abs(mp.minus_part - std::conj(mp.plus_part)), 0.0, 1e-15);
}

TEST(ProjectMode, IdempotentAndResolvesIdentity) {
  SpectralGrid g(32);
  auto u = random_band_limited(g, 10, 3);
  PeriodicField sum = make_field_from_modes({{0, u.mean()}}, g, {true, true, MeanConvention::free});
  for (int n = 1; n <= 16; ++n) {
    auto p = project_mode(u, n);
    EXPECT_LT(relative_difference(project_mode(p, n), p), 1e-15);
    sum += p;
  }
  EXPECT_LT(relative_difference(sum, u), 1e-15);
}

TEST(SobolevNorm, ExamplesAndZeroModeExclusion) {
  SpectralGrid g(32);
  EXPECT_NEAR(sobolev_norm(cos_mode(g, 1), 0.0), std::sqrt(kPi), 1e-14);
  EXPECT_NEAR(sobolev_norm(cos_mode(g, 2), 1.0), 2 * std::sqrt(kPi), 1e-14);
  EXPECT_EQ(sobolev_norm(PeriodicField::zero(g), 0.0), 0.0);
  auto c = make_field_from_modes({{0, 3.0}, {1, 0.5}, {-1, 0.5}}, g, real_even(MeanConvention::mod_constants));
  EXPECT_NEAR(sobolev_norm(c, 0.0), std::sqrt(kPi), 1e-14);
  auto free = c.with_flags(real_even(MeanConvention::free));
  EXPECT_THROW(sobolev_norm(free, 0.0), ContractError);
}

TEST(SobolevNorm, SquareAtZeroIsSumOfProjections) {
  SpectralGrid g(64);
  auto u = random_band_limited(g, 20, 11, {true, false, MeanConvention::mod_constants});
  double acc = 0.0;
  for (int n = 1; n <= 32; ++n) acc += std::pow(l2_norm(project_mode(u, n)), 2);
  EXPECT_NEAR(std::pow(sobolev_norm(u, 0.0), 2), acc, 1e-12 * acc);
}

TEST(Parseval, SamplesAgainstCoefficients) {
  SpectralGrid g(64);
  auto u = random_band_limited(g, 25, 5);
  auto s = u.samples();
  double lhs = 0.0, rhs = 0.0;
  for (const auto& v : s) lhs += std::norm(v) * (2 * kPi / 64) / (2 * kPi);
  for (const auto& c : u.coeffs()) rhs += std::norm(c);
  EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
}

TEST(ApplyMultiplier, DerivativeAndTanhAndIdentity) {
  SpectralGrid g(32);
  auto u = cos_mode(g, 1);
  auto du = apply_multiplier(u, [](double xi) { return cplx(0, xi); });
  auto s = du.real_samples();
  for (int j = 0; j < 32; ++j) EXPECT_NEAR(s[j], -std::sin(g.x(j)), 1e-14);

  auto v = apply_multiplier(cos_mode(g, 2), [](double xi) { return cplx(xi * std::tanh(xi)); });
  EXPECT_NEAR(2 * v.coeff(2).real(), 1.9280552, 1e-7);
  EXPECT_NEAR(2 * v.coeff(2).real(), 2 * std::tanh(2.0), 1e-15);

  auto w = random_band_limited(g, 10, 2);
  EXPECT_LT(relative_difference(apply_multiplier(w, [](double) { return cplx(1.0); }), w), 1e-15);
}

TEST(ApplyMultiplier, EvenRealMultiplierKeepsFlags) {
  SpectralGrid g(32);
  auto u = cos_mode(g, 3) + cos_mode(g, 5, 0.2);
  ASSERT_TRUE(u.flags().is_real && u.flags().is_even);
  auto v = apply_multiplier(u, [](double xi) { return cplx(xi * std::tanh(xi)); });
  EXPECT_TRUE(v.flags().is_real);
  EXPECT_TRUE(v.flags().is_even);
  auto rep = check_symmetry(v);
  EXPECT_TRUE(rep.is_real && rep.is_even);
}

TEST(CheckSymmetry, Examples) {
  SpectralGrid g(32);
  auto r = check_symmetry(cos_mode(g, 3));
  EXPECT_TRUE(r.is_real);
  EXPECT_TRUE(r.is_even);
  EXPECT_EQ(r.mean, 0.0);
  r = check_symmetry(sin_mode(g, 1));
  EXPECT_TRUE(r.is_real);
  EXPECT_FALSE(r.is_even);
  r = check_symmetry(cplx(0, 1) * cos_mode(g, 1));
  EXPECT_FALSE(r.is_real);
}

TEST(Multiply, DealiasedProductIsExactForBandLimitedFactors) {
  SpectralGrid g(32);
  auto p = multiply(cos_mode(g, 3), cos_mode(g, 5));
  // cos3 cos5 = (cos2 + cos8)/2
  EXPECT_LT(relative_difference(p, 0.5 * (cos_mode(g, 2) + cos_mode(g, 8))), 1e-15);
}
