#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "capgrav/errors.hpp"
#include "capgrav/grid.hpp"
#include "capgrav/symbols.hpp"

namespace capgrav {

// Phi(x) = x + beta(x) and its inverse y -> y + gamma(y).
struct DiffeoPair {
  PeriodicField beta;
  PeriodicField gamma;
  double composition_residual = 0.0;  // max_j |gamma(y_j) + beta(y_j + gamma(y_j))|
  double beta_mean = 0.0;
  double gamma_mean = 0.0;
  int iterations = 0;
};

// Trigonometric interpolant of u at an arbitrary point.
inline cplx evaluate_at(const PeriodicField& u, double x) {
  cplx s{};
  const auto& g = u.grid();
  for (int i = 0; i < g.M(); ++i) {
    cplx c = u.coeffs()[i];
    if (c != 0.0) s += c * std::exp(cplx(0.0, g.mode(i) * x));
  }
  return s;
}

inline std::vector<double> evaluate_at(const PeriodicField& u, const std::vector<double>& xs) {
  std::vector<double> out(xs.size());
  for (size_t k = 0; k < xs.size(); ++k) out[k] = evaluate_at(u, xs[k]).real();
  return out;
}

inline double sup_derivative(const PeriodicField& beta) {
  PeriodicField d = derivative(beta);
  auto s = d.samples_on(8 * beta.M());
  double m = 0.0;
  for (const auto& v : s) m = std::max(m, std::abs(v));
  return m;
}

// gamma = -beta o (Id + gamma) by fixed-point iteration on the grid points.
inline DiffeoPair invert_diffeo(const PeriodicField& beta, double tol = 1e-12, int max_iter = 500) {
  if (!beta.flags().is_real) throw ContractError("invert_diffeo: beta must be real");
  double lip = sup_derivative(beta);
  if (lip > 0.5)
    throw ContractError("invert_diffeo: sup|beta'| = " + std::to_string(lip) + " exceeds 1/2, contraction not guaranteed");
  const auto& grid = beta.grid();
  const int M = grid.M();
  std::vector<double> y = grid.points(), gam(M, 0.0), next(M);
  DiffeoPair dp{beta, PeriodicField::zero(grid)};
  double delta = 1.0;
  int it = 0;
  for (; it < max_iter && delta > tol; ++it) {
    delta = 0.0;
    for (int j = 0; j < M; ++j) {
      next[j] = -evaluate_at(beta, y[j] + gam[j]).real();
      delta = std::max(delta, std::abs(next[j] - gam[j]));
    }
    gam.swap(next);
  }
  if (delta > tol) throw ConvergenceError("invert_diffeo: fixed point did not converge", delta);
  FieldFlags f{true, false, MeanConvention::free};
  dp.gamma = make_field(gam, grid, f);
  double res = 0.0;
  for (int j = 0; j < M; ++j) res = std::max(res, std::abs(gam[j] + evaluate_at(beta, y[j] + gam[j]).real()));
  dp.composition_residual = res;
  dp.beta_mean = beta.mean().real();
  dp.gamma_mean = dp.gamma.mean().real();
  dp.iterations = it;
  return dp;
}

// Transport symbol b(theta, x) xi with b = beta / (1 + theta beta').
inline SymbolObject transport_symbol(const PeriodicField& beta, double theta) {
  const int L = padded_size(beta.M());
  auto b = beta.samples_on(L);
  auto db = derivative(beta).samples_on(L);
  for (int j = 0; j < L; ++j) b[j] /= 1.0 + theta * db[j];
  PeriodicField f = resymmetrize(PeriodicField(beta.grid(), detail::truncate_from_padded(b, beta.M()), {true, false, MeanConvention::free}));
  return SymbolObject({{f, XiFunction::xi_pow(1, cplx(0.0, 1.0)), 0.0}}, 1.0, false);
}

// Solves d/dtheta u = i Op^BW(b(theta) xi) u from theta0 to theta1 with RK4.
// Without a cutoff the plain Weyl quantization is used.
inline PeriodicField paracomposition_flow_between(const PeriodicField& beta, const PeriodicField& u, double theta0,
                                                  double theta1, int steps,
                                                  const std::optional<CutoffProfile>& cutoff = CutoffProfile{}) {
  if (steps <= 0) throw ContractError("paracomposition_flow: step count must be positive");
  if (beta.grid() != u.grid()) throw ContractError("paracomposition_flow: grid mismatch");
  if (theta0 == theta1) return u;
  const double h = (theta1 - theta0) / steps;
  PeriodicField v = u;
  auto F = [&](double th, const PeriodicField& w) {
    auto sym = transport_symbol(beta, th);
    return cutoff ? op_bw_apply(sym, w, *cutoff) : op_weyl_apply(sym, w);
  };
  for (int s = 0; s < steps; ++s) {
    double th = theta0 + s * h;
    PeriodicField k1 = F(th, v);
    PeriodicField k2 = F(th + 0.5 * h, v + (0.5 * h) * k1);
    PeriodicField k3 = F(th + 0.5 * h, v + (0.5 * h) * k2);
    PeriodicField k4 = F(th + h, v + h * k3);
    v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return v.with_flags({u.flags().is_real, false, MeanConvention::free});
}

inline PeriodicField paracomposition_flow(const PeriodicField& beta, const PeriodicField& u, double theta, int steps = 64,
                                          const std::optional<CutoffProfile>& cutoff = CutoffProfile{}) {
  return paracomposition_flow_between(beta, u, 0.0, theta, steps, cutoff);
}

// Inverse of Omega(1): the flow integrated backwards from theta = 1 to 0.
inline PeriodicField paracomposition_inverse(const PeriodicField& beta, const PeriodicField& v, int steps = 64,
                                             const std::optional<CutoffProfile>& cutoff = CutoffProfile{}) {
  return paracomposition_flow_between(beta, v, 1.0, 0.0, steps, cutoff);
}

// Principal symbol of the conjugated operator:
// a0(x, xi) = a(x + beta(x), xi (1 + gamma'(y)) at y = x + beta(x)).
inline SymbolObject conjugate_principal(const SymbolObject& a, const DiffeoPair& dp) {
  if (a.is_sampled() || a.has_shift()) throw ContractError("conjugate_principal needs an unshifted separable symbol");
  const auto& grid = a.grid();
  const int M = grid.M();
  bool trivial_beta = true;
  for (const auto& c : dp.beta.coeffs())
    if (c != 0.0) trivial_beta = false;
  if (trivial_beta) return a;
  bool identity = a.terms().size() == 1 && a.terms()[0].g.groups().empty();
  if (identity) {
    const auto& f = a.terms()[0].f;
    bool unit = std::abs(f.coeff(0) * a.terms()[0].g.coef() - 1.0) < 1e-15;
    for (int i = 1; i < M && unit; ++i) unit = f.coeffs()[i] == 0.0;
    if (unit) return a;
  }
  std::vector<double> xs = grid.points(), ys(M);
  auto bvals = dp.beta.real_samples();
  for (int j = 0; j < M; ++j) ys[j] = xs[j] + bvals[j];
  std::vector<double> stretch = evaluate_at(derivative(dp.gamma), ys);
  for (auto& s : stretch) s += 1.0;
  std::vector<std::vector<cplx>> fvals;
  for (const auto& t : a.terms()) {
    std::vector<cplx> v(M);
    for (int j = 0; j < M; ++j) v[j] = evaluate_at(t.f, ys[j]);
    fvals.push_back(std::move(v));
  }
  std::vector<std::vector<cplx>> table(2 * M + 1);
  for (int h = -M; h <= M; ++h) {
    double xi = 0.5 * h;
    std::vector<cplx> s(M);
    for (size_t q = 0; q < a.terms().size(); ++q)
      for (int j = 0; j < M; ++j) s[j] += fvals[q][j] * a.terms()[q].g(xi * stretch[j]);
    auto c = fft::forward(s);
    for (auto& v : c) v /= double(M);
    c[M / 2] = 0.0;
    table[h + M] = std::move(c);
  }
  return SymbolObject::sampled(grid, std::move(table), a.order());
}

}  // namespace capgrav
