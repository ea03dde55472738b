#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "capgrav/errors.hpp"
#include "capgrav/grid.hpp"
#include "capgrav/kernels.hpp"
#include "capgrav/strip.hpp"
#include "capgrav/symbols.hpp"

namespace capgrav {

struct DNOConfig {
  int J = 64;
  ZGridKind zgrid = ZGridKind::chebyshev;
  double tol = 1e-12;
  int max_iter = 200;

  void validate() const {
    if (!(tol > 0.0)) throw ContractError("DNOConfig: tolerance must be positive");
    if (max_iter < 1) throw ContractError("DNOConfig: max_iter must be >= 1");
    if (J < 16) throw ContractError("DNOConfig: J must be >= 16");
  }
};

namespace detail {

// Samples on an L-point grid of (d/dx)^k of a coefficient row; the Nyquist
// mode is dropped.
inline std::vector<cplx> padded_row(const cplx* c, const SpectralGrid& g, int L, int k = 0) {
  std::vector<cplx> buf(L);
  for (int n = -g.nmax() + 1; n < g.nmax(); ++n) {
    cplx v = c[g.index(n)];
    if (v == 0.0) continue;
    buf[n >= 0 ? n : n + L] = v * std::pow(cplx(0.0, n), k);
  }
  return fft::backward(buf);
}

inline void store_row(CoeffMatrix& out, int i, const std::vector<cplx>& samples, int M) {
  auto c = truncate_from_padded(samples, M);
  for (int m = 0; m < M; ++m) out(i, m) = c[m];
}

}  // namespace detail

// The coefficient operators of the straightened Laplace problem
//   G2 phi = -(1+z)^2 eta'^2 phi
//   G1 phi = (1+z)[2 eta'(1+eta) phi_x + (2 eta'^2 + eta''(1+eta)) phi]
//   G0 phi = -(2 eta + eta^2) phi_xx - 2 eta'(1+eta) phi_x - eta''(1+eta) phi
// evaluated on a 2M-point grid, which is alias free for cubic products.
class GCoefficients {
 public:
  explicit GCoefficients(const PeriodicField& eta) : eta_field_(eta), grid_(eta.grid()), L_(2 * eta.M()) {
    e_ = detail::padded_row(eta.coeffs().data(), grid_, L_, 0);
    d1_ = detail::padded_row(eta.coeffs().data(), grid_, L_, 1);
    d2_ = detail::padded_row(eta.coeffs().data(), grid_, L_, 2);
    zero_ = true;
    for (int n = -grid_.nmax() + 1; n < grid_.nmax(); ++n)
      if (eta.coeff(n) != 0.0) zero_ = false;
  }

  const PeriodicField& eta() const { return eta_field_; }
  bool is_zero() const { return zero_; }
  int padded() const { return L_; }
  const std::vector<cplx>& eta_samples() const { return e_; }
  const std::vector<cplx>& d1_samples() const { return d1_; }
  const std::vector<cplx>& d2_samples() const { return d2_; }

  PeriodicField G2(double z, const PeriodicField& phi) const {
    auto p = detail::padded_row(phi.coeffs().data(), grid_, L_);
    for (int j = 0; j < L_; ++j) p[j] *= -(1 + z) * (1 + z) * d1_[j] * d1_[j];
    return finish(p, phi);
  }

  PeriodicField G1(double z, const PeriodicField& phi) const {
    auto p = detail::padded_row(phi.coeffs().data(), grid_, L_);
    auto px = detail::padded_row(phi.coeffs().data(), grid_, L_, 1);
    for (int j = 0; j < L_; ++j)
      p[j] = (1 + z) * (2.0 * d1_[j] * (1.0 + e_[j]) * px[j] + (2.0 * d1_[j] * d1_[j] + d2_[j] * (1.0 + e_[j])) * p[j]);
    return finish(p, phi);
  }

  PeriodicField G0(const PeriodicField& phi) const {
    auto p = detail::padded_row(phi.coeffs().data(), grid_, L_);
    auto px = detail::padded_row(phi.coeffs().data(), grid_, L_, 1);
    auto pxx = detail::padded_row(phi.coeffs().data(), grid_, L_, 2);
    for (int j = 0; j < L_; ++j)
      p[j] = -(2.0 * e_[j] + e_[j] * e_[j]) * pxx[j] - 2.0 * d1_[j] * (1.0 + e_[j]) * px[j] - d2_[j] * (1.0 + e_[j]) * p[j];
    return finish(p, phi);
  }

  // All three operators applied at every z-node of a strip function.
  void apply(const ZGrid& zg, const CoeffMatrix& phi, CoeffMatrix& F, CoeffMatrix& H, CoeffMatrix& G) const {
    const int M = grid_.M();
    F.resize(phi.rows(), M);
    H.resize(phi.rows(), M);
    G.resize(phi.rows(), M);
    std::vector<cplx> f(L_), h(L_), g0(L_);
    for (int i = 0; i < phi.rows(); ++i) {
      const double z = zg.z(i);
      const cplx* row = phi.row(i).data();
      auto p = detail::padded_row(row, grid_, L_);
      auto px = detail::padded_row(row, grid_, L_, 1);
      auto pxx = detail::padded_row(row, grid_, L_, 2);
      for (int j = 0; j < L_; ++j) {
        const cplx e = e_[j], a = d1_[j], b = d2_[j];
        f[j] = -(1 + z) * (1 + z) * a * a * p[j];
        h[j] = (1 + z) * (2.0 * a * (1.0 + e) * px[j] + (2.0 * a * a + b * (1.0 + e)) * p[j]);
        g0[j] = -(2.0 * e + e * e) * pxx[j] - 2.0 * a * (1.0 + e) * px[j] - b * (1.0 + e) * p[j];
      }
      detail::store_row(F, i, f, M);
      detail::store_row(H, i, h, M);
      detail::store_row(G, i, g0, M);
    }
  }

 private:
  PeriodicField finish(const std::vector<cplx>& p, const PeriodicField& phi) const {
    FieldFlags fl{phi.flags().is_real && eta_field_.flags().is_real, false, MeanConvention::free};
    return PeriodicField(grid_, detail::truncate_from_padded(p, grid_.M()), fl);
  }

  PeriodicField eta_field_;
  SpectralGrid grid_;
  int L_;
  std::vector<cplx> e_, d1_, d2_;
  bool zero_ = false;
};

inline double sup_abs(const PeriodicField& u, int factor = 4) {
  double m = 0.0;
  for (const auto& v : u.samples_on(factor * u.M())) m = std::max(m, std::abs(v));
  return m;
}

inline GCoefficients build_G_coefficients(const PeriodicField& eta) {
  double s = sup_abs(eta);
  if (!(s < 0.5)) throw ContractError("build_G_coefficients: sup|eta| = " + std::to_string(s) + " must stay below 1/2");
  return GCoefficients(eta);
}

struct StripDiagnostics {
  int iterations = 0;
  double contraction_ratio = 0.0;
  double residual = 0.0;      // fixed-point residual of the integral equation, relative
  double pde_residual = 0.0;  // spectral residual of the differential equation, relative
  double trace_top = 0.0;
  double trace_bottom = 0.0;
  std::vector<double> increments;
};

struct StripSolution {
  StripField phi;
  StripField phi0;
  StripDiagnostics diag;
};

namespace detail {

inline double max_abs(const CoeffMatrix& c) { return c.size() ? c.cwiseAbs().maxCoeff() : 0.0; }

// w -> M0(phi) for the integrated-by-parts kernel form, with F = G2 phi and
// H = G1 phi:
//   F - C(z) F(0) - S(z) H(-1) + int K0 (n^2 F + G0 phi) dz' - int dK0/dz' H dz'.
inline CoeffMatrix neumann_map(const GCoefficients& G, const ZGrid& zg, const CoeffMatrix& phi) {
  const int J = zg.J();
  const auto& grid = G.eta().grid();
  CoeffMatrix F, H, G0;
  G.apply(zg, phi, F, H, G0);
  CoeffMatrix out(J + 1, grid.M());
  for (int m = 0; m < grid.M(); ++m) {
    const int n = grid.mode(m);
    auto k = mode_kernels(zg, n);
    Eigen::VectorXcd f = F.col(m), h = H.col(m), g = G0.col(m);
    Eigen::VectorXcd src = double(n) * double(n) * f + g;
    Eigen::VectorXcd col = f - k->C.cast<cplx>() * f(J) - k->S.cast<cplx>() * h(0);
    col += k->A.cast<cplx>() * src - k->B.cast<cplx>() * h;
    out.col(m) = col;
  }
  return out;
}

}  // namespace detail

inline StripSolution solve_strip(const PeriodicField& eta, const PeriodicField& psi, const DNOConfig& cfg = {}) {
  cfg.validate();
  if (eta.grid() != psi.grid()) throw ContractError("solve_strip: grid mismatch between eta and psi");
  auto zg = make_zgrid(cfg.J, cfg.zgrid);
  auto G = build_G_coefficients(eta);
  StripField phi0 = harmonic_extension_flat(psi, zg);
  FieldFlags fl{eta.flags().is_real && psi.flags().is_real, eta.flags().is_even && psi.flags().is_even, MeanConvention::free};
  StripSolution sol{phi0, phi0, {}};
  const double scale = std::max(detail::max_abs(phi0.coeffs()), 1e-300);
  CoeffMatrix w = CoeffMatrix::Zero(cfg.J + 1, psi.M());
  if (!G.is_zero()) {
    double prev = 0.0;
    int growing = 0;
    bool done = false;
    for (int k = 0; k < cfg.max_iter; ++k) {
      CoeffMatrix next = detail::neumann_map(G, *zg, phi0.coeffs() + w);
      double delta = detail::max_abs(next - w) / scale;
      w = std::move(next);
      sol.diag.increments.push_back(delta);
      sol.diag.iterations = k + 1;
      if (k > 0 && prev > 0.0) {
        sol.diag.contraction_ratio = delta / prev;
        growing = sol.diag.contraction_ratio >= 1.0 ? growing + 1 : 0;
        if (growing >= 3)
          throw ConvergenceError("solve_strip: Neumann iteration does not contract (ratio " +
                                     std::to_string(sol.diag.contraction_ratio) + ")",
                                 sol.diag.contraction_ratio);
      }
      prev = delta;
      if (delta <= cfg.tol) {
        done = true;
        break;
      }
    }
    if (!done)
      throw ConvergenceError("solve_strip: no convergence after " + std::to_string(cfg.max_iter) +
                                 " iterations (last increment " + std::to_string(prev) + ")",
                             prev);
    CoeffMatrix again = detail::neumann_map(G, *zg, phi0.coeffs() + w);
    sol.diag.residual = detail::max_abs(again - w) / scale;
  }
  CoeffMatrix phi = phi0.coeffs() + w;

  // Differential residual: (d_x^2 + d_z^2) phi - d_z^2 F - d_z H - G0 phi.
  {
    CoeffMatrix F, H, G0;
    G.apply(*zg, phi, F, H, G0);
    const Eigen::MatrixXcd D = zg->D().cast<cplx>(), D2 = zg->D2().cast<cplx>();
    CoeffMatrix res = D2 * (phi - F) - D * H - G0;
    double ref = 0.0;
    for (int m = 0; m < psi.M(); ++m) {
      const int n = psi.grid().mode(m);
      if (std::abs(n) == psi.grid().nmax()) {
        res.col(m).setZero();
        continue;
      }
      res.col(m) -= double(n) * double(n) * phi.col(m);
      ref = std::max(ref, double(n) * double(n) * phi.col(m).cwiseAbs().maxCoeff());
    }
    sol.diag.pde_residual = detail::max_abs(res) / std::max(ref, 1e-300);
  }
  {
    double top = 0.0;
    for (int m = 0; m < psi.M(); ++m) top = std::max(top, std::abs(phi(cfg.J, m) - psi.coeffs()[m]));
    sol.diag.trace_top = top / scale;
    Eigen::RowVectorXcd bottom = zg->D().row(0).cast<cplx>() * phi;
    sol.diag.trace_bottom = bottom.cwiseAbs().maxCoeff() / scale;
  }
  sol.phi = StripField(zg, psi.grid(), std::move(phi), fl);
  return sol;
}

struct DNResult {
  PeriodicField G;
  StripSolution strip;
  double mean_before_projection = 0.0;
};

namespace detail {

// d phi / dz at z = 0: exact for the flat extension, spectral for the rest.
inline std::vector<cplx> top_normal_derivative(const StripSolution& s) {
  const auto& grid = s.phi.grid();
  const int J = s.phi.J();
  std::vector<cplx> out(grid.M());
  Eigen::RowVectorXd d = s.phi.zgrid().D().row(J);
  for (int m = 0; m < grid.M(); ++m) {
    const int n = grid.mode(m);
    cplx flat = s.phi0.coeffs()(J, m) * (n == 0 ? 0.0 : double(n) * std::tanh(double(n)));
    cplx corr = 0.0;
    for (int i = 0; i <= J; ++i) corr += d(i) * (s.phi.coeffs()(i, m) - s.phi0.coeffs()(i, m));
    out[m] = flat + corr;
  }
  return out;
}

inline FieldFlags dn_flags(const PeriodicField& eta, const PeriodicField& psi) {
  return {eta.flags().is_real && psi.flags().is_real, eta.flags().is_even && psi.flags().is_even, MeanConvention::zero_mean};
}

}  // namespace detail

// With y = eta + z (1 + eta): Phi_y = phi_z / (1+eta) and, at z = 0,
// Phi_x = psi' - eta' phi_z / (1+eta), hence
//   G(eta) psi = (1 + eta'^2) phi_z / (1 + eta) - eta' psi'.
inline DNResult dirichlet_neumann_full(const PeriodicField& eta, const PeriodicField& psi, const DNOConfig& cfg = {}) {
  StripSolution s = solve_strip(eta, psi, cfg);
  const auto& grid = psi.grid();
  const int L = 2 * grid.M();
  auto dz = detail::top_normal_derivative(s);
  auto pz = detail::padded_row(dz.data(), grid, L);
  auto pe = detail::padded_row(eta.coeffs().data(), grid, L);
  auto pe1 = detail::padded_row(eta.coeffs().data(), grid, L, 1);
  auto pp1 = detail::padded_row(psi.coeffs().data(), grid, L, 1);
  std::vector<cplx> g(L);
  for (int j = 0; j < L; ++j) g[j] = (1.0 + pe1[j] * pe1[j]) * pz[j] / (1.0 + pe[j]) - pe1[j] * pp1[j];
  auto c = detail::truncate_from_padded(g, grid.M());
  double mean = std::abs(c[0]);
  c[0] = 0.0;
  PeriodicField G(grid, std::move(c), detail::dn_flags(eta, psi));
  G = resymmetrize(G);
  return DNResult{G, std::move(s), mean};
}

inline PeriodicField dirichlet_neumann(const PeriodicField& eta, const PeriodicField& psi, const DNOConfig& cfg = {}) {
  return dirichlet_neumann_full(eta, psi, cfg).G;
}

// Second route through the flattened-top coordinates Phi~(x, z) = phi(x, z/(1+eta)):
// Phi~ is interpolated on a fresh Chebyshev grid of [-1/2, 0] at every x_j and
// differentiated there, then G = (1 + eta'^2) dPhi~/dz - eta' psi'.
inline PeriodicField dirichlet_neumann_flattened(const PeriodicField& eta, const PeriodicField& psi, const StripSolution& s) {
  const auto& grid = psi.grid();
  const int M = grid.M(), L = 2 * M, J = s.phi.J();
  const auto& zg = s.phi.zgrid();
  std::vector<std::vector<cplx>> cols(J + 1);
  for (int i = 0; i <= J; ++i) cols[i] = detail::padded_row(s.phi.coeffs().row(i).data(), grid, L);
  auto sg = make_zgrid(std::max(16, J), ZGridKind::chebyshev);
  const int K = sg->J();
  Eigen::RowVectorXd dtop = sg->D().row(K);
  auto e = detail::padded_row(eta.coeffs().data(), grid, L);
  auto e1 = detail::padded_row(eta.coeffs().data(), grid, L, 1);
  auto p1 = detail::padded_row(psi.coeffs().data(), grid, L, 1);
  std::vector<cplx> g(L);
  for (int j = 0; j < L; ++j) {
    const double one_eta = 1.0 + e[j].real();
    cplx d = 0.0;
    for (int k = 0; k <= K; ++k) {
      const double zt = 0.5 * sg->z(k) / one_eta;
      auto w = zg.interpolation_weights(zt);
      cplx v = 0.0;
      for (int i = 0; i <= J; ++i)
        if (w[i] != 0.0) v += w[i] * cols[i][j];
      d += 2.0 * dtop(k) * v;
    }
    g[j] = (1.0 + e1[j] * e1[j]) * d - e1[j] * p1[j];
  }
  auto c = detail::truncate_from_padded(g, M);
  c[0] = 0.0;
  return resymmetrize(PeriodicField(grid, std::move(c), detail::dn_flags(eta, psi)));
}

struct GoodUnknown {
  PeriodicField G;
  PeriodicField B;
  PeriodicField V;
  PeriodicField omega;
};

// B = (G psi + eta' psi') / (1 + eta'^2), V = psi' - eta' B, omega = psi - Op^BW(B) eta.
inline GoodUnknown good_unknown_from_G(const PeriodicField& eta, const PeriodicField& psi, const PeriodicField& G,
                                       const CutoffProfile& cutoff = {}) {
  const auto& grid = psi.grid();
  const int L = 2 * grid.M();
  auto g = detail::padded_row(G.coeffs().data(), grid, L);
  auto e1 = detail::padded_row(eta.coeffs().data(), grid, L, 1);
  auto p1 = detail::padded_row(psi.coeffs().data(), grid, L, 1);
  std::vector<cplx> b(L), v(L);
  for (int j = 0; j < L; ++j) {
    b[j] = (g[j] + e1[j] * p1[j]) / (1.0 + e1[j] * e1[j]);
    v[j] = p1[j] - e1[j] * b[j];
  }
  const bool real = eta.flags().is_real && psi.flags().is_real;
  const bool even = eta.flags().is_even && psi.flags().is_even;
  PeriodicField B = resymmetrize(PeriodicField(grid, detail::truncate_from_padded(b, grid.M()), {real, even, MeanConvention::free}));
  PeriodicField V = resymmetrize(PeriodicField(grid, detail::truncate_from_padded(v, grid.M()), {real, false, MeanConvention::free}));
  PeriodicField para = op_bw_apply(SymbolObject::function(B), eta, cutoff);
  PeriodicField omega = (psi - para).with_flags({real, even, psi.flags().mean == MeanConvention::zero_mean ? MeanConvention::free : psi.flags().mean});
  return GoodUnknown{G, B, V, resymmetrize(omega)};
}

inline GoodUnknown good_unknown_fields(const PeriodicField& eta, const PeriodicField& psi, const DNOConfig& cfg = {},
                                       const CutoffProfile& cutoff = {}) {
  return good_unknown_from_G(eta, psi, dirichlet_neumann(eta, psi, cfg), cutoff);
}

// Principal paralinearization G ~ (D tanh D) omega - i Op^BW(V xi) eta and the
// good-unknown trace dPhi/dz ~ (D tanh D) omega + Op^BW(a1) omega.
struct PrincipalExpansion {
  PeriodicField G;
  PeriodicField G_approx;
  PeriodicField residual;
  double residual_ratio = 0.0;
  PeriodicField dz_strip;
  PeriodicField dz_approx;
  double dz_mismatch = 0.0;
  GoodUnknown gu;
};

inline SymbolObject a1_symbol(const PeriodicField& eta) {
  const auto& grid = eta.grid();
  const int L = 2 * grid.M();
  auto e1 = detail::padded_row(eta.coeffs().data(), grid, L, 1);
  std::vector<cplx> p(L), q(L);
  for (int j = 0; j < L; ++j) {
    p[j] = e1[j] / (1.0 + e1[j] * e1[j]);
    q[j] = -e1[j] * e1[j] / (1.0 + e1[j] * e1[j]);
  }
  const bool real = eta.flags().is_real, even = eta.flags().is_even;
  PeriodicField f1 = resymmetrize(PeriodicField(grid, detail::truncate_from_padded(p, grid.M()), {real, false, MeanConvention::free}));
  PeriodicField f2 = resymmetrize(PeriodicField(grid, detail::truncate_from_padded(q, grid.M()), {real, even, MeanConvention::free}));
  return SymbolObject({{f1, XiFunction::xi_pow(1, cplx(0.0, 1.0)), 0.0}, {f2, XiFunction::xi_pow(1) * XiFunction::tanh_xi(), 0.0}}, 1.0);
}

inline PrincipalExpansion dn_principal_expand(const PeriodicField& eta, const PeriodicField& psi, const DNOConfig& cfg = {},
                                              const CutoffProfile& cutoff = {}) {
  DNResult dn = dirichlet_neumann_full(eta, psi, cfg);
  GoodUnknown gu = good_unknown_from_G(eta, psi, dn.G, cutoff);
  auto dtanh = [](double xi) { return cplx(xi == 0.0 ? 0.0 : xi * std::tanh(xi)); };
  PeriodicField lin = apply_multiplier(gu.omega, dtanh);
  PeriodicField tr = op_bw_apply(SymbolObject::separable(gu.V, XiFunction::xi_pow(1)), eta, cutoff);
  PeriodicField approx = lin - cplx(0.0, 1.0) * tr;
  PeriodicField res = dn.G - approx;
  double den = l2_norm(approx);
  PrincipalExpansion out{dn.G, approx, res, den > 0.0 ? l2_norm(res) / den : l2_norm(res), lin, lin, 0.0, gu};

  // Strip side: dPhi/dz = dPhi~/dz - Op^BW(d^2Phi~/dz^2) eta at z = 0, with
  // dPhi~/dz = B and d^2Phi~/dz^2 = phi_zz / (1 + eta)^2.
  const auto& grid = psi.grid();
  const int J = dn.strip.phi.J(), L = 2 * grid.M();
  Eigen::RowVectorXcd dzz = dn.strip.phi.zgrid().D2().row(J).cast<cplx>() * dn.strip.phi.coeffs();
  std::vector<cplx> row(dzz.data(), dzz.data() + grid.M());
  auto pzz = detail::padded_row(row.data(), grid, L);
  auto pe = detail::padded_row(eta.coeffs().data(), grid, L);
  for (int j = 0; j < L; ++j) pzz[j] /= (1.0 + pe[j]) * (1.0 + pe[j]);
  PeriodicField second(grid, detail::truncate_from_padded(pzz, grid.M()), {gu.B.flags().is_real, gu.B.flags().is_even, MeanConvention::free});
  out.dz_strip = gu.B - op_bw_apply(SymbolObject::function(resymmetrize(second)), eta, cutoff);
  out.dz_approx = lin + op_bw_apply(a1_symbol(eta), gu.omega, cutoff);
  double dn2 = l2_norm(out.dz_strip);
  out.dz_mismatch = dn2 > 0.0 ? l2_norm(out.dz_strip - out.dz_approx) / dn2 : 0.0;
  return out;
}

}  // namespace capgrav
