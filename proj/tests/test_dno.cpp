#include <cstdio>
#include <gtest/gtest.h>

#include <random>

#include "capgrav/dno.hpp"
#include "capgrav/parametrix.hpp"

using namespace capgrav;

namespace {

double max_coeff_diff(const PeriodicField& a, const PeriodicField& b) {
  double m = 0.0;
  for (int i = 0; i < a.M(); ++i) m = std::max(m, std::abs(a.coeffs()[i] - b.coeffs()[i]));
  return m;
}

PeriodicField random_even(const SpectralGrid& g, int nmax, double amp, unsigned seed, MeanConvention mc) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::map<int, cplx> modes;
  for (int n = 1; n <= nmax; ++n) {
    double c = amp * N(rng) * std::exp(-1.0 * n);
    modes[n] = modes[-n] = c;
  }
  return make_field_from_modes(modes, g, real_even(mc));
}

PeriodicField dtanh(const PeriodicField& u) {
  return apply_multiplier(u, [](double xi) { return cplx(xi == 0.0 ? 0.0 : xi * std::tanh(xi)); });
}

}  // namespace

TEST(ZGrid, QuadratureAndDifferentiation) {
  auto zg = make_zgrid(32, ZGridKind::chebyshev);
  EXPECT_EQ(zg->z(0), -1.0);
  EXPECT_EQ(zg->z(32), 0.0);
  Eigen::VectorXd f(33), df(33);
  for (int i = 0; i <= 32; ++i) {
    f(i) = std::sin(3 * zg->z(i));
    df(i) = 3 * std::cos(3 * zg->z(i));
  }
  EXPECT_LT((zg->D() * f - df).cwiseAbs().maxCoeff(), 1e-11);
  std::vector<double> t, w;
  gauss_legendre(12, -1.0, 0.0, t, w);
  double s = 0.0;
  for (int k = 0; k < 12; ++k) s += w[k] * std::exp(t[k]);
  EXPECT_NEAR(s, 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_THROW(ZGrid(8, ZGridKind::chebyshev), ContractError);
}

TEST(Kernels, ClosedFormsAgainstHyperbolicDefinitions) {
  for (double xi : {0.5, 1.0, 3.0, 7.0}) {
    for (double z : {-1.0, -0.7, -0.2, 0.0}) {
      double C = std::cosh((z + 1) * xi) / std::cosh(xi);
      double S = std::sinh(z * xi) / (xi * std::cosh(xi));
      EXPECT_NEAR(poisson_C(z, xi), C, 1e-14 * std::max(1.0, C));
      EXPECT_NEAR(poisson_S(z, xi), S, 1e-14);
      for (double zp : {-0.9, -0.5, -0.1}) {
        double K = std::cosh(xi) * (z < zp ? C * std::sinh(zp * xi) / (xi * std::cosh(xi))
                                           : S * std::cosh((zp + 1) * xi) / std::cosh(xi));
        EXPECT_NEAR(kernel_K0(z, zp, xi), K, 1e-14);
      }
    }
  }
  EXPECT_EQ(kernel_K0(-0.3, -0.6, 0.0), -0.3);
  EXPECT_EQ(poisson_S(-0.4, 0.0), -0.4);
  EXPECT_TRUE(std::isfinite(kernel_K0(-0.5, -0.5, 2000.0)));
}

TEST(Kernels, GreenFunctionJumpAndBoundaryConditions) {
  const double xi = 4.0, zp = -0.35, h = 1e-5;
  double jump = (kernel_K0(zp + h, zp, xi) - kernel_K0(zp, zp, xi)) / h - (kernel_K0(zp, zp, xi) - kernel_K0(zp - h, zp, xi)) / h;
  EXPECT_NEAR(jump, 1.0, 1e-4);
  EXPECT_NEAR(kernel_K0(0.0, zp, xi), 0.0, 1e-16);
  EXPECT_NEAR((kernel_K0(-1.0 + h, zp, xi) - kernel_K0(-1.0, zp, xi)) / h, 0.0, 1e-4);
  // dK0/dz' against a centered difference on each side
  for (double zz : {-0.8, -0.2}) {
    double num = (kernel_K0(-0.5, zz + h, xi) - kernel_K0(-0.5, zz - h, xi)) / (2 * h);
    EXPECT_NEAR(kernel_dK0(-0.5, zz, xi, zz < -0.5), num, 1e-8);
  }
}

TEST(PoissonKernel, SolvesTwoPointProblem) {
  // (d_z^2 - n^2) u = cos z, u(0) = 0, u'(-1) = 0 in closed form.
  SpectralGrid g(16);
  for (auto kind : {ZGridKind::chebyshev, ZGridKind::uniform}) {
    int J = kind == ZGridKind::chebyshev ? 32 : 256;
    auto zg = make_zgrid(J, kind);
    const int n = 3;
    CoeffMatrix f = CoeffMatrix::Zero(J + 1, 16);
    for (int i = 0; i <= J; ++i) f(i, g.index(n)) = std::cos(zg->z(i));
    auto u = poisson_kernel_apply(StripField(zg, g, f));
    const double q = 1.0 + n * n;
    const double beta = std::sin(1.0) / (n * q);
    const double alpha = (1.0 / q - beta * std::sinh(n)) / std::cosh(n);
    double err = 0.0;
    for (int i = 0; i <= J; ++i) {
      double z = zg->z(i);
      double exact = -std::cos(z) / q + alpha * std::cosh(n * (z + 1)) + beta * std::sinh(n * (z + 1));
      err = std::max(err, std::abs(u.coeffs()(i, g.index(n)) - exact));
    }
    EXPECT_LT(err, kind == ZGridKind::chebyshev ? 1e-13 : 1e-8) << to_string(kind);
    EXPECT_EQ(poisson_kernel_apply(StripField::zero(zg, g)).coeffs().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(HarmonicExtension, TracesOfFlatExtension) {
  SpectralGrid g(32);
  auto zg = make_zgrid(32, ZGridKind::chebyshev);
  auto phi0 = harmonic_extension_flat(cos_mode(g, 1), zg);
  EXPECT_LT(max_coeff_diff(phi0.at(32), cos_mode(g, 1)), 1e-16);
  EXPECT_NEAR(phi0.at(0).coeff(1).real(), 0.5 / std::cosh(1.0), 1e-16);
  auto psi = random_even(g, 12, 1.0, 4, MeanConvention::mod_constants);
  auto ext = harmonic_extension_flat(psi, zg);
  EXPECT_LT(ext.dz().coeffs().row(0).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(GCoefficients, VanishAtFlatAndSpotCheck) {
  SpectralGrid g(32);
  auto phi = cos_mode(g, 2);
  auto flat = build_G_coefficients(PeriodicField::zero(g));
  EXPECT_EQ(linf_norm(flat.G0(phi)), 0.0);
  EXPECT_EQ(linf_norm(flat.G1(-0.3, phi)), 0.0);
  EXPECT_EQ(linf_norm(flat.G2(-0.3, phi)), 0.0);
  const double eps = 0.05;
  auto G = build_G_coefficients(cos_mode(g, 1, eps));
  EXPECT_EQ(linf_norm(G.G2(-1.0, phi)), 0.0);
  const double x = g.x(5), z = -0.4;
  double e = eps * std::cos(x), e1 = -eps * std::sin(x), e2 = -eps * std::cos(x);
  double p = std::cos(2 * x), px = -2 * std::sin(2 * x), pxx = -4 * std::cos(2 * x);
  EXPECT_NEAR(G.G0(phi).real_samples()[5], -(2 * e + e * e) * pxx - 2 * e1 * (1 + e) * px - e2 * (1 + e) * p, 1e-14);
  EXPECT_NEAR(G.G1(z, phi).real_samples()[5], (1 + z) * (2 * e1 * (1 + e) * px + (2 * e1 * e1 + e2 * (1 + e)) * p), 1e-14);
  EXPECT_NEAR(G.G2(z, phi).real_samples()[5], -(1 + z) * (1 + z) * e1 * e1 * p, 1e-15);
  EXPECT_THROW(build_G_coefficients(cos_mode(g, 1, 0.6)), ContractError);
}

TEST(SolveStrip, FlatSurfaceNeedsNoIteration) {
  SpectralGrid g(32);
  auto psi = cos_mode(g, 1) + cos_mode(g, 3, 0.2);
  auto s = solve_strip(PeriodicField::zero(g), psi);
  EXPECT_EQ(s.diag.iterations, 0);
  EXPECT_EQ((s.phi.coeffs() - s.phi0.coeffs()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SolveStrip, ConstantElevationIsSeparable) {
  SpectralGrid g(32);
  const double c = 0.1;
  auto eta = make_field_from_modes({{0, c}}, g, real_even());
  auto psi = cos_mode(g, 1) + cos_mode(g, 4, 0.3);
  DNOConfig cfg;
  cfg.J = 48;
  auto s = solve_strip(eta, psi, cfg);
  double err = 0.0;
  for (int i = 0; i <= cfg.J; ++i) {
    double z = s.phi.zgrid().z(i);
    for (int n : {1, 4}) {
      double exact = psi.coeff(n).real() * std::cosh((1 + c) * n * (z + 1)) / std::cosh((1 + c) * n);
      err = std::max(err, std::abs(s.phi.coeffs()(i, g.index(n)) - exact));
    }
  }
  EXPECT_LT(err, 1e-11);
}

TEST(SolveStrip, SmallCosineConvergesQuickly) {
  SpectralGrid g(32);
  DNOConfig cfg;
  auto s = solve_strip(cos_mode(g, 1, 0.01), cos_mode(g, 1), cfg);
  EXPECT_LT(s.diag.iterations, 10);
  EXPECT_LT(s.diag.residual, 10 * cfg.tol);
  EXPECT_LT(s.diag.trace_top, 1e-14);
  EXPECT_LT(s.diag.trace_bottom, 1e-10);
  EXPECT_LT(s.diag.contraction_ratio, 0.9);
  EXPECT_LT(s.diag.pde_residual, 1e-8);
}

TEST(SolveStrip, RejectsNonContractingIteration) {
  SpectralGrid g(32);
  DNOConfig cfg;
  cfg.max_iter = 3;
  EXPECT_THROW(solve_strip(cos_mode(g, 1, 0.3), cos_mode(g, 1), cfg), ConvergenceError);
}

TEST(DirichletNeumann, FlatBottomSeparationOfVariables) {
  SpectralGrid g(128);
  DNOConfig cfg;
  cfg.J = 64;
  auto G = dirichlet_neumann(PeriodicField::zero(g), cos_mode(g, 2), cfg);
  EXPECT_LT(relative_difference(G, cos_mode(g, 2, 2 * std::tanh(2.0))), 1e-10);
  EXPECT_NEAR(2 * G.coeff(2).real(), 1.9280552, 1e-7);
}

TEST(DirichletNeumann, ConstantElevationDeepensTheStrip) {
  SpectralGrid g(32);
  auto eta = make_field_from_modes({{0, 0.1}}, g, real_even());
  auto G = dirichlet_neumann(eta, cos_mode(g, 1));
  EXPECT_NEAR(2 * G.coeff(1).real(), 0.8004990, 1e-7);
  EXPECT_NEAR(2 * G.coeff(1).real(), std::tanh(1.1), 1e-12);
}

TEST(DirichletNeumann, FirstOrderExpansionInAmplitude) {
  // G(eta) psi = G0 psi - G0(eta G0 psi) - d_x(eta d_x psi) + O(eta^2)
  SpectralGrid g(32);
  auto psi = cos_mode(g, 2) + sin_mode(g, 3, 0.4);
  auto shape = cos_mode(g, 1) + sin_mode(g, 2, 0.5);
  double errs[2];
  int k = 0;
  for (double eps : {1e-3, 2e-3}) {
    auto eta = eps * shape;
    auto G = dirichlet_neumann(eta, psi);
    auto g0 = dtanh(psi);
    auto g1 = -1.0 * dtanh(multiply(eta, g0)) - derivative(multiply(eta, derivative(psi)));
    errs[k++] = linf_norm(G - g0 - g1);
  }
  EXPECT_LT(errs[0], 1e-4 * 1e-3 * 50);
  EXPECT_NEAR(errs[1] / errs[0], 4.0, 0.2);
}

TEST(DirichletNeumann, SymmetryLinearityMeanAndParity) {
  SpectralGrid g(32);
  auto eta = random_even(g, 8, 0.03, 1, MeanConvention::zero_mean);
  auto p1 = random_even(g, 10, 1.0, 2, MeanConvention::mod_constants);
  auto p2 = random_even(g, 10, 1.0, 3, MeanConvention::mod_constants);
  auto r1 = dirichlet_neumann_full(eta, p1);
  auto r2 = dirichlet_neumann_full(eta, p2);
  cplx a = integral_product(p1, r2.G), b = integral_product(p2, r1.G);
  EXPECT_LT(std::abs(a - b), 1e-8);
  EXPECT_LT(r1.mean_before_projection, 1e-10 * l2_norm(p1));
  EXPECT_EQ(r1.G.mean(), 0.0);
  auto lin = dirichlet_neumann(eta, 2.0 * p1 - 0.5 * p2);
  EXPECT_LT(linf_norm(lin - (2.0 * r1.G - 0.5 * r2.G)), 1e-11);
  EXPECT_TRUE(r1.G.flags().is_even);
  auto rep = check_symmetry(r1.G);
  EXPECT_TRUE(rep.is_real && rep.is_even);
}

TEST(DirichletNeumann, FlattenedTopRouteAgrees) {
  SpectralGrid g(32);
  auto eta = random_even(g, 6, 0.05, 7, MeanConvention::zero_mean);
  auto psi = random_even(g, 8, 1.0, 8, MeanConvention::mod_constants);
  auto r = dirichlet_neumann_full(eta, psi);
  auto dual = dirichlet_neumann_flattened(eta, psi, r.strip);
  EXPECT_LT(linf_norm(r.G - dual), 1e-9 * linf_norm(r.G));
}

TEST(DirichletNeumann, GridConvergenceAndUniformCrossCheck) {
  SpectralGrid g(32), g2(64);
  auto eta = random_even(g, 6, 0.04, 11, MeanConvention::zero_mean);
  auto psi = random_even(g, 8, 1.0, 12, MeanConvention::mod_constants);
  DNOConfig c1, c2;
  c1.J = 32;
  c2.J = 64;
  auto G1 = dirichlet_neumann(eta, psi, c1);
  auto G2 = dirichlet_neumann(resample(eta, g2), resample(psi, g2), c2);
  EXPECT_LT(relative_difference(resample(G2, g), G1), 1e-8);
  std::vector<double> err;
  for (int J : {64, 128, 256}) {
    DNOConfig cu;
    cu.J = J;
    cu.zgrid = ZGridKind::uniform;
    err.push_back(relative_difference(dirichlet_neumann(eta, psi, cu), G1));
    std::printf("uniform J=%d: %.3e\n", J, err.back());
  }
  EXPECT_LT(err[2], 1e-8);
  EXPECT_LT(err[2], err[1] / 8.0);
  EXPECT_LT(err[1], err[0] / 8.0);
}

TEST(GoodUnknown, FlatSurfaceAndIdentity) {
  SpectralGrid g(32);
  auto psi = cos_mode(g, 2) + cos_mode(g, 5, 0.3);
  auto gu = good_unknown_fields(PeriodicField::zero(g), psi);
  EXPECT_LT(linf_norm(gu.B - dtanh(psi)), 1e-13);
  EXPECT_LT(linf_norm(gu.V - derivative(psi)), 1e-13);
  EXPECT_LT(linf_norm(gu.omega - psi), 1e-15);
  auto eta = cos_mode(g, 1, 0.05) + cos_mode(g, 2, 0.01);
  auto zero = good_unknown_fields(eta, PeriodicField::zero(g));
  EXPECT_EQ(linf_norm(zero.B) + linf_norm(zero.V) + linf_norm(zero.omega), 0.0);
  auto u = good_unknown_fields(eta, psi);
  auto e1 = derivative(eta);
  auto one = make_field_from_modes({{0, 1.0}}, g, real_even());
  auto back = multiply(one + multiply(e1, e1), u.B) - multiply(e1, derivative(psi));
  EXPECT_LT(linf_norm(back - u.G), 1e-10);
  EXPECT_TRUE(check_symmetry(u.B).is_even);
  EXPECT_LT(linf_norm(u.V + u.V.reflect()), 1e-13);
}

TEST(Parametrix, FlatFundamentalSolutions) {
  auto fd = fundamental_solutions(0.0, 3.0);
  EXPECT_EQ(fd.a, 0.0);
  EXPECT_EQ(fd.b, 0.0);
  EXPECT_EQ(fd.c, 0.0);
  for (double z : {-1.0, -0.6, -0.1, 0.0}) {
    EXPECT_NEAR(std::abs(fd.w_plus(z, 3.0) - poisson_C(z, 3.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(fd.w_minus(z, 3.0) - poisson_S(z, 3.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(fd.wronskian(z, 3.0) - 1.0 / std::cosh(3.0)), 0.0, 1e-15);
  }
}

TEST(Parametrix, BoundaryValuesOdeAndWronskian) {
  const double ep = 0.3, xi = 5.0;
  auto fd = fundamental_solutions(ep, xi);
  const double h = 1.0 / 256;
  auto deriv = [&](const std::function<cplx(double, double)>& f, double z, int order) {
    std::vector<double> nodes;
    int lo = std::clamp(static_cast<int>(std::lround((z + 1) / h)) - 4, 0, 256 - 8);
    for (int k = 0; k < 9; ++k) nodes.push_back(-1.0 + (lo + k) * h);
    auto w = fornberg_weights(z, nodes, order);
    cplx s = 0.0;
    for (int k = 0; k < 9; ++k) s += w[order][k] * f(nodes[k], xi);
    return s;
  };
  EXPECT_NEAR(std::abs(fd.w_plus(0.0, xi) - 1.0), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(fd.w_plus_dz(-1.0, xi)), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(deriv(fd.w_plus, -1.0, 1)), 0.0, 1e-9);
  EXPECT_NEAR(std::abs(fd.w_minus(0.0, xi)), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(deriv(fd.w_minus, -1.0, 1) - 1.0), 0.0, 1e-9);
  const cplx I(0, 1);
  double worst = 0.0, wr = 0.0;
  for (int k = 0; k <= 256; k += 8) {
    double z = -1.0 + k * h;
    for (auto* f : {&fd.w_plus, &fd.w_minus}) {
      cplx r = deriv(*f, z, 2) - 2.0 * I * fd.a * xi * deriv(*f, z, 1) - (1 + fd.b) * xi * xi * (*f)(z, xi);
      worst = std::max(worst, std::abs(r));
    }
    EXPECT_NEAR(std::abs(fd.w_plus_dz(z, xi) - deriv(fd.w_plus, z, 1)), 0.0, 1e-9);
    cplx W = fd.w_plus(z, xi) * deriv(fd.w_minus, z, 1) - fd.w_plus_dz(z, xi) * fd.w_minus(z, xi);
    wr = std::max(wr, std::abs(W - fd.wronskian(z, xi)));
    EXPECT_NEAR(std::abs(deriv(fd.wronskian, z, 1) - 2.0 * I * fd.a * xi * fd.wronskian(z, xi)), 0.0, 1e-9);
    EXPECT_NEAR(std::abs(fd.w_minus_dz(z, xi) - deriv(fd.w_minus, z, 1)), 0.0, 1e-9);
    cplx We = fd.w_plus(z, xi) * fd.w_minus_dz(z, xi) - fd.w_plus_dz(z, xi) * fd.w_minus(z, xi);
    EXPECT_NEAR(std::abs(We - fd.wronskian(z, xi)), 0.0, 1e-13);
  }
  EXPECT_LT(worst, 1e-8 * (1 + xi * xi));
  EXPECT_LT(wr, 1e-8);
}

TEST(Parametrix, GreenKernelReducesAndReproducesDelta) {
  auto K = green_kernel_var(0.0, 3.0);
  EXPECT_NEAR(std::abs(K(-0.3, -0.7) - kernel_K0(-0.3, -0.7, 3.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(K(-0.3, -0.7) - K(-0.7, -0.3)), 0.0, 1e-15);

  const double ep = 0.25, xi = 6.0;
  auto Kv = green_kernel_var(ep, xi);
  EXPECT_NEAR(std::abs(Kv(0.0, -0.4)), 0.0, 1e-10);
  const double h = 1e-6;
  EXPECT_NEAR(std::abs((Kv(-1.0 + h, -0.4) - Kv(-1.0, -0.4)) / h), 0.0, 1e-5);

  // int K(z, z') (P^T chi)(z) dz = chi(z') for a bump chi supported in (-0.8, -0.2).
  using J2 = Jet<double, 2>;
  auto chi = [](double z) {
    J2 t = J2::variable(z);
    J2 u = (t + J2(0.5)) / J2(0.3);
    if (std::abs(u.value()) >= 1.0) return J2(0.0);
    return exp(J2(-1.0) / (J2(1.0) - u * u));
  };
  const int Jq = 512;
  const cplx I(0, 1);
  for (double zp : {-0.6, -0.5, -0.35}) {
    int ip = static_cast<int>(std::lround((zp + 1) * Jq));
    zp = -1.0 + double(ip) / Jq;
    auto zg = make_zgrid(Jq, ZGridKind::uniform);
    auto lo = zg->simpson_weights(0, ip), hi = zg->simpson_weights(ip, Jq);
    cplx s = 0.0;
    for (int i = 0; i <= Jq; ++i) {
      double z = zg->z(i);
      J2 c = chi(z);
      cplx pt = (1 + ep * ep) * c.derivative(2) + 2.0 * I * ep * xi * c.derivative(1) - xi * xi * c.value();
      s += (lo[i] + hi[i]) * Kv(z, zp) * pt;
    }
    EXPECT_NEAR(std::abs(s - chi(zp).value()), 0.0, 1e-4) << zp;
  }
}

TEST(Parametrix, OrderMinusOneCorrectionMatchesClosedForm) {
  for (double x : {0.3, 1.1, 2.0, 4.0}) {
    double ep = -0.1 * std::sin(x), epp = -0.1 * std::cos(x);
    for (double xi : {20.0, -20.0}) {
      auto r = order_minus_one_correction(ep, epp, xi);
      EXPECT_LT(r.relative_error, 1e-6) << x << " " << xi << " " << r.recursion << " " << r.closed_form;
    }
  }
}

TEST(PrincipalExpansion, FlatSurfaceAndDecayInFrequency) {
  SpectralGrid g(128);
  auto flat = dn_principal_expand(PeriodicField::zero(g), cos_mode(g, 3));
  EXPECT_LT(linf_norm(flat.residual), 1e-13);
  std::vector<double> ratios;
  for (int n : {4, 8, 16, 32}) {
    auto r = dn_principal_expand(cos_mode(g, 1, 1e-3), cos_mode(g, n));
    ratios.push_back(r.residual_ratio);
  }
  const double noise = 1e-13;
  for (size_t k = 1; k < ratios.size(); ++k) EXPECT_TRUE(ratios[k] < ratios[k - 1] || ratios[k] < noise) << k << " " << ratios[k];
  EXPECT_GT(ratios[0], 100 * noise);
}
