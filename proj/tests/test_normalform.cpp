#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "capgrav/normalform.hpp"
#include "capgrav/resonance.hpp"

using namespace capgrav;

namespace {

double m_oracle(double xi, double kappa) { return std::sqrt(xi * std::tanh(xi) * (1.0 + kappa * xi * xi)); }

PeriodicField random_cutoff_field(const SpectralGrid& g, int Nc, double amp, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::map<int, cplx> modes;
  for (int n = 1; n <= Nc; ++n) {
    modes[n] = amp * cplx(U(rng), U(rng)) / double(n * n);
    modes[-n] = amp * cplx(U(rng), U(rng)) / double(n * n);
  }
  return make_field_from_modes(modes, g, {false, false, MeanConvention::zero_mean});
}

PeriodicField seed_profile(const SpectralGrid& g) {
  return make_field_from_modes({{1, 0.5}, {-1, 0.5}, {2, cplx(0.25, 0.15)}, {-2, cplx(0.25, 0.15)}, {3, cplx(0, 0.1)}, {-3, cplx(0, 0.1)}},
                               g, {false, true, MeanConvention::zero_mean});
}

double max_coeff_diff(const PeriodicField& a, const PeriodicField& b) {
  double d = 0.0;
  for (int i = 0; i < a.M(); ++i) d = std::max(d, std::abs(a.coeffs()[i] - b.coeffs()[i]));
  return d;
}

ModelSpec spec_of(int p, int ell, double kappa = 1.0, double a = 1.0, int Nc = 4) {
  ModelSpec s;
  s.p = p;
  s.ell = ell;
  s.kappa = kappa;
  s.a = a;
  s.Nc = Nc;
  return s;
}

}  // namespace

TEST(ModelRhs, ZeroDataAndLinearCase) {
  auto sp = spec_of(2, 2);
  auto g = model_grid(sp);
  EXPECT_EQ(l2_norm(model_rhs(PeriodicField::zero(g), sp)), 0.0);

  sp.a = 0.0;
  auto u = random_cutoff_field(g, sp.Nc, 0.3, 1);
  auto r = model_rhs(u, sp);
  for (int n = 1; n <= sp.Nc; ++n)
    for (int k : {n, -n}) EXPECT_LT(std::abs(r.coeff(k) - cplx(0.0, m_oracle(n, 1.0)) * u.coeff(k)), 1e-14);
}

TEST(ModelRhs, QuadraticCosine) {
  auto sp = spec_of(2, 2, 1.0, 1.7);
  auto g = model_grid(sp);
  const double eps = 0.01;
  auto u = cos_mode(g, 1, eps).with_flags({false, true, MeanConvention::zero_mean});
  auto nl = model_rhs(u, sp) - model_rhs(u, spec_of(2, 2, 1.0, 0.0));
  // eps^2 cos^2 x = eps^2/2 + eps^2 cos(2x)/2; the mean lies outside the cutoff.
  for (int n = -sp.Nc; n <= sp.Nc; ++n) {
    cplx expect = std::abs(n) == 2 ? cplx(0.0, 1.7) * eps * eps / 4.0 : cplx(0.0);
    EXPECT_LT(std::abs(nl.coeff(n) - expect), 1e-17) << n;
  }
}

TEST(NFMap, QuadraticExampleEntry) {
  auto map = build_nf_map(spec_of(2, 2, 1.0, 1.0, 4));
  const double D = 2.0 * m_oracle(1, 1.0) - m_oracle(2, 1.0);
  bool found = false;
  for (const auto& e : map.entries)
    if (e.k == std::vector<int>{1, 1} && e.n == 2) {
      found = true;
      EXPECT_NEAR(e.divisor, D, 1e-14);
      EXPECT_NEAR(e.value.real(), -1.0 / D, 1e-13);
      EXPECT_NEAR(e.value.real(), 1.571, 1e-3);
      EXPECT_EQ(e.flag, NFFlag::divided);
    }
  EXPECT_TRUE(found);
}

TEST(NFMap, ResonantTuplesSkippedForOddDegree) {
  auto map = build_nf_map(spec_of(3, 2, 1.0, 1.0, 3));
  std::size_t skipped = 0;
  for (const auto& e : map.entries) {
    std::vector<int> plus{std::abs(e.k[0]), std::abs(e.k[1])}, minus{std::abs(e.k[2]), std::abs(e.n)};
    std::sort(plus.begin(), plus.end());
    std::sort(minus.begin(), minus.end());
    EXPECT_EQ(e.flag == NFFlag::resonant_skipped, plus == minus);
    skipped += e.flag == NFFlag::resonant_skipped;
  }
  EXPECT_GT(skipped, 0u);

  for (int ell : {0, 1, 3}) {
    auto other = build_nf_map(spec_of(3, ell, 1.0, 1.0, 3));
    EXPECT_EQ(other.divided_count(), other.entries.size()) << ell;
  }
}

TEST(NFMap, RejectsWiltonKappa) {
  auto root = find_wilton_kappa(1, 1, PhysParams{1.0, 1.0});
  ASSERT_TRUE(root.has_value());
  try {
    build_nf_map(spec_of(2, 2, *root, 1.0, 4));
    FAIL() << "expected rejection";
  } catch (const ContractError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("kappa"), std::string::npos);
    EXPECT_NE(msg.find("1 1 | 2"), std::string::npos) << msg;
  }
}

TEST(NFMap, ZeroCoefficientGivesZeroMap) {
  auto map = build_nf_map(spec_of(2, 1, 1.0, 0.0, 4));
  for (const auto& e : map.entries) EXPECT_EQ(e.value, cplx(0.0));
}

TEST(NFMap, HomologicalIdentityAndReality) {
  for (int ell : {0, 1, 2}) {
    auto map = build_nf_map(spec_of(2, ell, 1.3, 0.8, 6));
    EXPECT_LT(homological_residual(map), 1e-12);
    for (const auto& e : map.entries) {
      EXPECT_EQ(e.value.imag(), 0.0);
      if (e.flag == NFFlag::divided) EXPECT_LE(std::abs(e.value), 0.8 / map.min_divisor * (1 + 1e-15));
    }
  }
}

// dQ(u)[i m u] - i m Q(u) + i a N(u) = 0 for every u within the cutoff.
TEST(NFMap, BruteForceOperatorIdentity) {
  for (int ell : {0, 1, 2}) {
    auto sp = spec_of(2, ell, 1.0, 1.0, 4);
    auto g = model_grid(sp);
    auto map = build_nf_map(sp);
    auto lin = [&](const PeriodicField& f) {
      return apply_multiplier(f, [&](double xi) { return cplx(0.0, m_oracle(std::abs(xi), 1.0)); });
    };
    for (unsigned seed = 0; seed < 3; ++seed) {
      auto u = random_cutoff_field(g, sp.Nc, 0.2, 10 + seed);
      auto N = model_rhs(u, sp) - model_rhs(u, spec_of(2, ell, 1.0, 0.0, 4));
      auto lhs = nf_dQ(map, u, lin(u)) - detail::cutoff_project(lin(nf_Q(map, u)), sp.Nc) + N;
      EXPECT_LT(l2_norm(lhs), 1e-14) << ell;
    }
  }
}

TEST(NFTransform, TrivialCases) {
  auto sp = spec_of(2, 2);
  auto g = model_grid(sp);
  auto map = build_nf_map(sp);
  auto z = PeriodicField::zero(g);
  EXPECT_EQ(l2_norm(apply_nf_transform(z, map, NFDirection::forward)), 0.0);

  auto zero_map = build_nf_map(spec_of(2, 2, 1.0, 0.0));
  auto u = random_cutoff_field(g, sp.Nc, 0.1, 3);
  EXPECT_EQ(max_coeff_diff(apply_nf_transform(u, zero_map, NFDirection::forward), u), 0.0);
  EXPECT_EQ(max_coeff_diff(apply_nf_transform(u, zero_map, NFDirection::inverse), u), 0.0);
}

TEST(NFTransform, RoundTrip) {
  for (int ell : {0, 1, 2}) {
    auto sp = spec_of(2, ell, 1.0, 1.0, 6);
    auto g = model_grid(sp);
    auto map = build_nf_map(sp);
    for (unsigned seed = 0; seed < 5; ++seed) {
      auto u = random_cutoff_field(g, sp.Nc, 0.05, 100 + seed);
      auto v = apply_nf_transform(u, map, NFDirection::forward);
      auto back = apply_nf_transform(v, map, NFDirection::inverse);
      EXPECT_LT(l2_norm(back - u) / l2_norm(u), 1e-11);
      EXPECT_GT(l2_norm(v - u), 1e-6);
    }
  }
}

TEST(NFTransform, RejectsLargeData) {
  auto sp = spec_of(2, 2);
  auto g = model_grid(sp);
  auto map = build_nf_map(sp);
  auto u = random_cutoff_field(g, sp.Nc, 40.0, 5);
  EXPECT_THROW(apply_nf_transform(u, map, NFDirection::forward), ContractError);
}

TEST(NFOrderBump, ExponentImprovesByOne) {
  for (int ell : {0, 1, 2}) {
    auto sp = spec_of(2, ell, 1.0, 1.0, 8);
    auto map = build_nf_map(sp);
    auto rep = order_bump(map, seed_profile(model_grid(sp)), {1e-2, 5e-3, 2.5e-3});
    EXPECT_NEAR(rep.raw_exponent, 3.0, 0.3) << ell;
    EXPECT_GE(rep.transformed_exponent, 3.7) << ell;
  }
}

TEST(NFActions, ResonantSystemConservesActions) {
  auto sp = spec_of(3, 2, 1.0, 1.0, 4);
  auto g = model_grid(sp);
  auto rep = action_check(sp, 0.1 * seed_profile(g), 100.0, 1e-3);
  EXPECT_LT(rep.max_drift, 1e-9);
  EXPECT_TRUE(rep.control_monotone);
  EXPECT_GT(rep.control_drift, 1e-3);
  EXPECT_TRUE(rep.passed);

  auto zero = action_check(sp, PeriodicField::zero(g), 1.0, 1e-3);
  EXPECT_EQ(zero.max_drift, 0.0);
  EXPECT_TRUE(zero.passed);

  EXPECT_THROW(resonant_system(spec_of(2, 1)), ContractError);
}

TEST(NFLifetime, LinearModelIsCensored) {
  auto sp = spec_of(2, 2, 1.0, 0.0, 6);
  auto tab = nf_lifetime_compare(sp, seed_profile(model_grid(sp)), {0.1, 0.05}, 1.0, model_cfl(sp), 20.0);
  ASSERT_EQ(tab.rows.size(), 2u);
  for (const auto& r : tab.rows) {
    EXPECT_TRUE(r.censored_raw);
    EXPECT_TRUE(r.censored_transformed);
    EXPECT_EQ(r.T_raw, 20.0);
  }
  EXPECT_THROW(nf_lifetime_compare(sp, seed_profile(model_grid(sp)), {0.1}, 1.0, 2.0 * model_cfl(sp), 1.0), ContractError);
}

TEST(Flattening, ZeroProfile) {
  SpectralGrid g(64);
  auto f = flattening_profile(PeriodicField::zero(g));
  EXPECT_EQ(f.zeta_bar, 0.0);
  EXPECT_LT(linf_norm(f.gamma), 1e-15);
}

TEST(Flattening, CosineProfile) {
  SpectralGrid g(64);
  auto z = cos_mode(g, 2, 0.1);
  auto f = flattening_profile(z);
  EXPECT_LT(f.integrand_mean, 1e-13);

  auto s = f.gamma.real_samples();
  double odd = 0.0, scale = linf_norm(f.gamma);
  for (int j = 0; j < g.M(); ++j) odd = std::max(odd, std::abs(s[j] + s[(g.M() - j) % g.M()]));
  EXPECT_GT(scale, 1e-3);
  EXPECT_LT(odd, 1e-12 * scale);

  EXPECT_LT(linf_norm(derivative(f.gamma) - f.integrand), 1e-11);

  // Trapezoid quadrature of the harmonic-type mean on a fine grid.
  const int Q = 4096;
  double acc = 0.0;
  for (int j = 0; j < Q; ++j) acc += std::pow(1.0 + 0.1 * std::cos(2.0 * 2.0 * kPi * j / Q), -2.0 / 3.0);
  acc /= Q;
  EXPECT_NEAR(std::pow(1.0 + f.zeta_bar, 2.0 / 3.0), 1.0 / acc, 1e-12);
  EXPECT_NEAR(f.zeta_bar, std::pow(acc, -1.5) - 1.0, 1e-12);
}

TEST(Flattening, CanonicalInputAndBound) {
  SpectralGrid g(64);
  auto eta = cos_mode(g, 1, 0.05) + cos_mode(g, 3, 0.01);
  auto z = canonical_zeta(eta);
  auto s = derivative(eta).real_samples(), zs = z.real_samples();
  for (int j = 0; j < g.M(); ++j) EXPECT_NEAR(zs[j], std::pow(1.0 + s[j] * s[j], -1.5) - 1.0, 1e-14);
  auto f = flattening_profile(z);
  EXPECT_LT(f.integrand_mean, 1e-13);
  EXPECT_LT(linf_norm(derivative(f.gamma) - f.integrand), 1e-11);

  EXPECT_THROW(flattening_profile(cos_mode(g, 1, 0.6)), ContractError);
}
