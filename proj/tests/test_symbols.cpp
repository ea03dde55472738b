#include <gtest/gtest.h>

#include <functional>

#include <random>

#include "capgrav/jet.hpp"
#include "capgrav/paracomposition.hpp"
#include "capgrav/symbols.hpp"

using namespace capgrav;

namespace {

PeriodicField random_field(const SpectralGrid& g, int nmax, unsigned seed, bool real = true, double decay = 0.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::map<int, cplx> modes;
  for (int n = -nmax; n <= nmax; ++n) {
    double w = std::exp(-decay * std::abs(n));
    modes[n] = w * cplx(N(rng), N(rng));
  }
  if (real) {
    for (int n = 1; n <= nmax; ++n) modes[-n] = std::conj(modes[n]);
    modes[0] = modes[0].real();
  }
  return make_field_from_modes(modes, g, {real, false, MeanConvention::free});
}

double max_abs_diff(const PeriodicField& a, const PeriodicField& b) {
  double m = 0.0;
  for (int i = 0; i < a.M(); ++i) m = std::max(m, std::abs(a.coeffs()[i] - b.coeffs()[i]));
  return m;
}

}  // namespace

TEST(Jet, ElementaryDerivativesMatchClosedForms) {
  double x = 0.7;
  auto t = tanh(Jet<double, 3>::variable(x));
  double s = 1.0 / std::cosh(x);
  EXPECT_NEAR(t.derivative(1), s * s, 1e-15);
  EXPECT_NEAR(t.derivative(2), -2 * std::tanh(x) * s * s, 1e-15);
  auto p = pow(Jet<double, 3>::variable(2.0), 1.5);
  EXPECT_NEAR(p.derivative(1), 1.5 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(p.derivative(3), 1.5 * 0.5 * -0.5 * std::pow(2.0, -1.5), 1e-14);
  auto e = exp(sin(Jet<double, 2>::variable(x)));
  EXPECT_NEAR(e.derivative(1), std::cos(x) * std::exp(std::sin(x)), 1e-15);
  auto l = log(cosh(Jet<double, 2>::variable(x)));
  EXPECT_NEAR(l.derivative(1), std::tanh(x), 1e-15);
}

TEST(XiFunction, DerivativeTermsAgreeWithJetDerivatives) {
  auto g = XiFunction::m_kappa(0.8) * XiFunction::tanh_xi();
  double xi = 3.3;
  auto d = g.derivatives(xi);
  for (int r = 1; r <= 3; ++r) {
    cplx sum{};
    for (const auto& t : g.derivative_terms(r)) sum += t(xi);
    EXPECT_NEAR(std::abs(sum - d[r]), 0.0, 1e-12 * std::abs(d[r])) << r;
  }
  EXPECT_EQ(g.parity(), -1);
}

TEST(XiFunction, SmoothedDispersionVanishesNearZero) {
  auto g = XiFunction::m_kappa(1.0);
  EXPECT_EQ(g(0.0), 0.0);
  EXPECT_EQ(g(0.2), 0.0);
  EXPECT_NEAR(g(1.0).real(), 1.234176, 1e-6);
  EXPECT_NEAR(g(0.5).real(), std::sqrt(0.5 * std::tanh(0.5) * 1.25), 1e-15);
}

TEST(Cutoff, ProfileShape) {
  CutoffProfile c;
  EXPECT_EQ(c.profile(0.0), 1.0);
  EXPECT_EQ(c.profile(0.2), 1.0);
  EXPECT_EQ(c.profile(0.4), 0.0);
  EXPECT_EQ(c.profile(-0.3), c.profile(0.3));
  double prev = 1.0;
  for (int i = 0; i <= 100; ++i) {
    double v = c.profile(0.2 + 0.2 * i / 100.0);
    EXPECT_LE(v, prev);
    EXPECT_GE(v, 0.0);
    prev = v;
  }
}

TEST(OpBW, ConstantAndMultiplierSymbols) {
  SpectralGrid g(64);
  auto u = random_field(g, 20, 1);
  auto c = SymbolObject::constant(g, 2.5);
  EXPECT_LT(max_abs_diff(op_bw_apply(c, u), 2.5 * u), 1e-14);
  auto mul = XiFunction::xi_pow(1) * XiFunction::tanh_xi();
  auto a = SymbolObject::multiplier(g, mul);
  EXPECT_LT(max_abs_diff(op_bw_apply(a, u), apply_multiplier(u, [&](double xi) { return mul(xi); })), 1e-14);
}

TEST(OpBW, ParaproductExactOnSeparatedFrequencies) {
  SpectralGrid g(64);
  auto a = SymbolObject::function(cos_mode(g, 1));
  auto out = op_bw_apply(a, cos_mode(g, 10));
  auto exact = multiply(cos_mode(g, 1), cos_mode(g, 10));
  EXPECT_LT(max_abs_diff(out, exact), 1e-16);
}

TEST(OpBW, ConstantsMapToConstants) {
  SpectralGrid g(32);
  auto a = SymbolObject::separable(random_field(g, 6, 3), XiFunction::xi_pow(2));
  auto one = make_field_from_modes({{0, 1.0}}, g, real_even());
  auto out = op_bw_apply(a, one);
  for (int n = 1; n < 16; ++n) EXPECT_EQ(std::abs(out.coeff(n)) + std::abs(out.coeff(-n)), 0.0);
}

TEST(OpStandard, DerivativeProductAndMultiplier) {
  SpectralGrid g(64);
  auto u = random_field(g, 12, 4);
  auto xi = SymbolObject::multiplier(g, XiFunction::xi_pow(1));
  EXPECT_LT(max_abs_diff(op_standard_apply(xi, u), cplx(0, -1) * derivative(u)), 1e-14);
  auto f = random_field(g, 8, 5);
  EXPECT_LT(max_abs_diff(op_standard_apply(SymbolObject::function(f), u), multiply(f, u)), 1e-14);
  auto m = SymbolObject::multiplier(g, XiFunction::m_kappa(1.0));
  EXPECT_LT(max_abs_diff(op_standard_apply(m, u), op_bw_apply(m, u)), 1e-12);
}

TEST(WeylFromStandard, DualPathAgreement) {
  SpectralGrid g(64);
  auto f = random_field(g, 6, 6);
  auto a = SymbolObject::separable(f, XiFunction::xi_pow(1));
  auto b = weyl_from_standard(a);
  auto u = cos_mode(g, 5);
  EXPECT_LT(max_abs_diff(op_standard_apply(a, u), op_weyl_apply(b, u)), 1e-11);
  auto v = random_field(g, 20, 7, false);
  auto a2 = SymbolObject::separable(f, XiFunction::m_kappa(0.5)) + SymbolObject::separable(random_field(g, 5, 8), XiFunction::tanh_xi());
  EXPECT_LT(max_abs_diff(op_standard_apply(a2, v), op_weyl_apply(weyl_from_standard(a2), v)), 1e-11);
  auto m = SymbolObject::multiplier(g, XiFunction::xi_pow(3));
  EXPECT_LT(max_abs_diff(op_weyl_apply(weyl_from_standard(m), v), op_weyl_apply(m, v)), 1e-10);
}

TEST(Compose, HandExpansions) {
  SpectralGrid g(32);
  auto f = random_field(g, 4, 9);
  auto fp = derivative(f);
  auto xi = SymbolObject::multiplier(g, XiFunction::xi_pow(1));
  auto F = SymbolObject::function(f);
  double x = 0.37, eta = 2.5;

  auto xx = compose_symbols(xi, xi, 3);
  EXPECT_NEAR(std::abs(xx(x, eta) - eta * eta), 0.0, 1e-13);
  EXPECT_EQ(xx.order(), 2.0);

  auto fx = compose_symbols(F, xi, 2);
  cplx expect = evaluate_at(f, x) * eta + cplx(0, 0.5) * evaluate_at(fp, x);
  EXPECT_NEAR(std::abs(fx(x, eta) - expect), 0.0, 1e-13);

  auto xf = compose_symbols(xi, F, 2);
  expect = evaluate_at(f, x) * eta - cplx(0, 0.5) * evaluate_at(fp, x);
  EXPECT_NEAR(std::abs(xf(x, eta) - expect), 0.0, 1e-13);

  EXPECT_THROW(compose_symbols(F, xi, 5), ContractError);
}

TEST(Compose, ExactWeylCompositionOfFirstOrderSymbols) {
  // f xi # g xi terminates after three terms, so Op^W of the expansion
  // reproduces the operator product exactly.
  SpectralGrid g(64);
  auto f = random_field(g, 4, 10), h = random_field(g, 4, 11);
  auto a = SymbolObject::separable(f, XiFunction::xi_pow(1));
  auto b = SymbolObject::separable(h, XiFunction::xi_pow(1));
  auto ab = compose_symbols(a, b, 3);
  auto u = random_field(g, 12, 12, false);
  auto lhs = op_weyl_apply(a, op_weyl_apply(b, u));
  auto rhs = op_weyl_apply(ab, u);
  double scale = l2_norm(lhs);
  // compare on modes not touched by truncation of the intermediate product
  double err = 0.0;
  for (int n = -20; n <= 20; ++n) err = std::max(err, std::abs(lhs.coeff(n) - rhs.coeff(n)));
  EXPECT_LT(err, 1e-12 * scale);
}

TEST(Quantization, ConjugationParityAndSelfAdjointness) {
  SpectralGrid g(64);
  std::mt19937 rng(13);
  std::vector<XiFunction> families = {XiFunction::xi_pow(1), XiFunction::xi_pow(2), XiFunction::m_kappa(0.7),
                                      XiFunction::tanh_xi(), XiFunction::lambda_kappa(2.0), XiFunction::sech_profile()};
  for (int trial = 0; trial < 20; ++trial) {
    auto f = random_field(g, 8, 100 + trial, false, 0.3);
    auto gfun = families[trial % families.size()].scaled(cplx(0.3, -0.8));
    auto a = SymbolObject::separable(f, gfun);
    auto u = random_field(g, 25, 200 + trial, false, 0.05);
    auto lhs = op_bw_apply(a, u).conj();
    auto rhs = op_bw_apply(a.conj_reflect(), u.conj());
    EXPECT_LT(max_abs_diff(lhs, rhs), 1e-11 * std::max(1.0, l2_norm(lhs)));
  }
  // real-valued symbol: formally self-adjoint
  auto f = random_field(g, 8, 21, true, 0.3);
  auto a = SymbolObject::separable(f, XiFunction::xi_pow(2)) + SymbolObject::separable(random_field(g, 6, 22), XiFunction::m_kappa(1.0));
  auto u = random_field(g, 25, 23, false), v = random_field(g, 25, 24, false);
  cplx l = inner_product(op_bw_apply(a, u), v), r = inner_product(u, op_bw_apply(a, v));
  EXPECT_LT(std::abs(l - r), 1e-10 * std::abs(l));
  // parity: a(-x,-xi) = a(x,xi) maps even fields to even fields
  auto even_f = cos_mode(g, 2, 0.3) + cos_mode(g, 5, 0.1);
  auto ae = SymbolObject::separable(even_f, XiFunction::m_kappa(1.0));
  EXPECT_TRUE(ae.even_in_x_xi());
  auto w = op_bw_apply(ae, cos_mode(g, 7) + cos_mode(g, 12, 0.4));
  EXPECT_TRUE(w.flags().is_even);
  EXPECT_TRUE(check_symmetry(w).is_even);
}

TEST(Quantization, SpectralSupport) {
  SpectralGrid g(128);
  CutoffProfile cut;
  auto a = SymbolObject::separable(random_field(g, 40, 30, true, 0.0), XiFunction::xi_pow(1));
  for (int n : {5, 20, 40}) {
    auto out = op_bw_apply(a, cos_mode(g, n).with_flags({true, true, MeanConvention::free}), cut);
    for (int k = -63; k <= 63; ++k) {
      if (std::abs(out.coeff(k)) < 1e-300) continue;
      int nn = std::abs(k - n) < std::abs(k + n) ? n : -n;
      EXPECT_LE(std::abs(k - nn), cut.delta * std::sqrt(1.0 + 0.25 * (k + nn) * (k + nn)) + 1.0) << n << " " << k;
    }
  }
}

TEST(Diffeo, InverseExamples) {
  SpectralGrid g(64);
  auto dp0 = invert_diffeo(PeriodicField::zero(g));
  EXPECT_EQ(l2_norm(dp0.gamma), 0.0);
  auto beta = sin_mode(g, 1, 0.1);
  auto dp = invert_diffeo(beta);
  EXPECT_LT(dp.composition_residual, 1e-12);
  auto diff = dp.gamma + sin_mode(g, 1, 0.1);
  EXPECT_LT(linf_norm(diff), 0.02);
  EXPECT_GT(linf_norm(diff), 1e-4);
  // a steep profile violates the contraction precondition
  auto steep = sin_mode(g, 3, 0.6);
  EXPECT_THROW(invert_diffeo(steep), ContractError);
}

TEST(Paracomposition, TrivialCasesAndRoundTrip) {
  SpectralGrid g(64);
  auto u = cos_mode(g, 1) + sin_mode(g, 2, 0.5) + cos_mode(g, 3, 0.25);
  EXPECT_LT(max_abs_diff(paracomposition_flow(PeriodicField::zero(g), u, 0.7), u), 1e-16);
  auto beta = sin_mode(g, 1, 0.05);
  EXPECT_EQ(max_abs_diff(paracomposition_flow(beta, u, 0.0), u), 0.0);
  EXPECT_THROW(paracomposition_flow(beta, u, 1.0, 0), ContractError);
  auto v = paracomposition_flow(beta, u, 1.0);
  auto back = paracomposition_inverse(beta, v);
  EXPECT_LT(max_abs_diff(back, u), 1e-10);
}

namespace {

// Transport with the half-density weight: sqrt(1 + theta beta') u0(x + theta beta).
double half_density_pullback(double x, double theta, double eps, const std::function<double(double)>& u0) {
  return std::sqrt(1.0 + theta * eps * std::cos(x)) * u0(x + theta * eps * std::sin(x));
}

}  // namespace

TEST(Paracomposition, WeylFlowIsHalfDensityPullback) {
  SpectralGrid g(64);
  auto u = cos_mode(g, 1) + sin_mode(g, 2, 0.5) + cos_mode(g, 3, 0.25);
  auto u0 = [](double y) { return std::cos(y) + 0.5 * std::sin(2 * y) + 0.25 * std::cos(3 * y); };
  auto beta = sin_mode(g, 1, 0.05);
  auto vs = paracomposition_flow(beta, u, 1.0, 64, std::nullopt).real_samples();
  double err = 0.0;
  for (int j = 0; j < 64; ++j) err = std::max(err, std::abs(vs[j] - half_density_pullback(g.x(j), 1.0, 0.05, u0)));
  EXPECT_LT(err, 1e-9);
}

TEST(Paracomposition, CutoffIsInactiveAtHighFrequency) {
  SpectralGrid g(128);
  auto u = cos_mode(g, 20);
  auto beta = sin_mode(g, 1, 0.05);
  auto vs = paracomposition_flow(beta, u, 1.0).real_samples();
  double err = 0.0;
  for (int j = 0; j < 128; ++j)
    err = std::max(err, std::abs(vs[j] - half_density_pullback(g.x(j), 1.0, 0.05, [](double y) { return std::cos(20 * y); })));
  EXPECT_LT(err, 1e-7);
}

TEST(ConjugatePrincipal, IdentityAndTrivialDiffeo) {
  SpectralGrid g(32);
  auto one = SymbolObject::constant(g, 1.0);
  auto dp = invert_diffeo(sin_mode(g, 1, 0.05));
  auto r = conjugate_principal(one, dp);
  EXPECT_NEAR(std::abs(r(0.3, 4.0) - 1.0), 0.0, 1e-15);
  auto a = SymbolObject::separable(cos_mode(g, 2), XiFunction::xi_pow(2));
  auto r0 = conjugate_principal(a, invert_diffeo(PeriodicField::zero(g)));
  EXPECT_NEAR(std::abs(r0(0.3, 4.0) - a(0.3, 4.0)), 0.0, 1e-15);
  // xi^2 becomes xi^2 (1 + gamma'(x + beta))^2
  auto xi2 = SymbolObject::multiplier(g, XiFunction::xi_pow(2));
  auto c = conjugate_principal(xi2, dp);
  double x = g.x(5);
  double y = x + 0.05 * std::sin(x);
  double s = 1.0 + evaluate_at(derivative(dp.gamma), y).real();
  EXPECT_NEAR(c(x, 3.0).real(), 9.0 * s * s, 1e-9);
}
