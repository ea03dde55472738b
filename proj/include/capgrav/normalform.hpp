#pragma once

#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "capgrav/dispersion.hpp"
#include "capgrav/dynamics.hpp"
#include "capgrav/errors.hpp"
#include "capgrav/fft.hpp"
#include "capgrav/grid.hpp"

namespace capgrav {

// (D_t - m_kappa(D)) u = a u^ell conj(u)^(p - ell), Galerkin-truncated to the
// modes 1 <= |n| <= Nc.
struct ModelSpec {
  double kappa = 1.0;
  int p = 2;
  int ell = 2;
  cplx a = 1.0;
  int Nc = 8;

  void validate() const {
    if (!(kappa > 0.0)) throw ContractError("ModelSpec: kappa must be positive");
    if (p < 2) throw ContractError("ModelSpec: homogeneity p must be >= 2");
    if (ell < 0 || ell > p) throw ContractError("ModelSpec: ell must lie in [0, p]");
    if (Nc < 1) throw ContractError("ModelSpec: cutoff Nc must be >= 1");
  }
  bool reversible() const { return a.imag() == 0.0; }
  PhysParams params() const { return PhysParams{1.0, kappa}; }
};

inline SpectralGrid model_grid(const ModelSpec& spec) {
  int M = 16;
  while (M < 4 * spec.Nc) M *= 2;
  return SpectralGrid(M);
}

namespace detail {

inline int fft_size_above(int n) {
  int L = 16;
  while (L <= n) L *= 2;
  return L;
}

// Keep 1 <= |n| <= Nc.
inline PeriodicField cutoff_project(const PeriodicField& u, int Nc) {
  const auto& g = u.grid();
  std::vector<cplx> c(g.M());
  for (int n = 1; n <= Nc; ++n) {
    c[g.index(n)] = u.coeff(n);
    c[g.index(-n)] = u.coeff(-n);
  }
  return PeriodicField(g, std::move(c), {false, u.flags().is_even, MeanConvention::zero_mean});
}

}  // namespace detail

// Pi_{1..Nc}(u^ell conj(u)^(p-ell)), alias free.
inline PeriodicField model_nonlinearity(const PeriodicField& u, const ModelSpec& spec) {
  const auto& g = u.grid();
  const int L = detail::fft_size_above((spec.p + 1) * spec.Nc);
  auto s = u.samples_on(L);
  for (auto& v : s) v = std::pow(v, spec.ell) * std::pow(std::conj(v), spec.p - spec.ell);
  auto c = fft::forward(s);
  std::vector<cplx> out(g.M());
  for (int n = 1; n <= spec.Nc; ++n) {
    out[g.index(n)] = c[n] / double(L);
    out[g.index(-n)] = c[L - n] / double(L);
  }
  return PeriodicField(g, std::move(out), {false, u.flags().is_even, MeanConvention::zero_mean});
}

// du/dt = i m(D) u + i a Pi(u^ell conj(u)^(p-ell)).
inline PeriodicField model_rhs(const PeriodicField& u, const ModelSpec& spec) {
  spec.validate();
  const auto p = spec.params();
  PeriodicField lin = apply_multiplier(u, [&](double xi) { return cplx(0.0, m_kappa(xi, p)); });
  return detail::cutoff_project(lin + (cplx(0.0, 1.0) * spec.a) * model_nonlinearity(u, spec), spec.Nc);
}

enum class NFFlag { divided, resonant_skipped };

inline std::string to_string(NFFlag f) { return f == NFFlag::divided ? "divided" : "resonant_skipped"; }

// One ordered tuple of signed input modes k_1..k_p (slots > ell act on
// conj(u)) with output n = k_1 + ... + k_p. In the exponential basis the
// monomial u^ell conj(u)^(p-ell) has coefficient a on every such tuple, so
// no combinatorial factor enters.
struct NFEntry {
  std::vector<int> k;
  int n = 0;
  double divisor = 0.0;
  cplx value = 0.0;
  NFFlag flag = NFFlag::divided;
};

struct NFMap {
  ModelSpec spec;
  std::vector<NFEntry> entries;
  double min_divisor = std::numeric_limits<double>::infinity();
  std::string convention =
      "exponential basis e^{inx}; Q_n = sum over ordered signed tuples k_1+..+k_p = n of M(k) u_{k_1}..u_{k_ell} "
      "conj(u)_{k_ell+1}..conj(u)_{k_p}, where conj(u)_k = conj(u_{-k}); M = -a / D(|k_1|..|k_p|; |n|)";

  std::size_t divided_count() const {
    std::size_t c = 0;
    for (const auto& e : entries) c += e.flag == NFFlag::divided;
    return c;
  }
};

inline DivisorTuple model_divisor_tuple(const ModelSpec& spec, const std::vector<int>& k, int n) {
  std::vector<int> f;
  for (int v : k) f.push_back(std::abs(v));
  f.push_back(std::abs(n));
  return DivisorTuple(spec.p - 1, spec.ell - 1, std::move(f));
}

namespace detail {

inline void for_each_tuple(int p, int Nc, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> k(p, -Nc);
  std::vector<int> vals;
  for (int v = -Nc; v <= Nc; ++v)
    if (v != 0) vals.push_back(v);
  std::vector<int> idx(p, 0);
  const int B = static_cast<int>(vals.size());
  while (true) {
    for (int j = 0; j < p; ++j) k[j] = vals[idx[j]];
    fn(k);
    int j = p - 1;
    while (j >= 0 && ++idx[j] == B) idx[j--] = 0;
    if (j < 0) break;
  }
}

}  // namespace detail

inline constexpr double kNearResonanceThreshold = 1e-8;

// M = -a / D on non-resonant tuples within the cutoff. A non-resonant
// divisor below the threshold aborts the construction.
inline NFMap build_nf_map(const ModelSpec& spec, double threshold = kNearResonanceThreshold) {
  spec.validate();
  const PhysParams params = spec.params();
  NFMap map;
  map.spec = spec;
  detail::for_each_tuple(spec.p, spec.Nc, [&](const std::vector<int>& k) {
    int n = 0;
    for (int v : k) n += v;
    if (n == 0 || std::abs(n) > spec.Nc) return;
    NFEntry e{k, n, 0.0, 0.0, NFFlag::divided};
    DivisorTuple t = model_divisor_tuple(spec, k, n);
    if (is_resonant_tuple(t)) {
      e.flag = NFFlag::resonant_skipped;
    } else {
      e.divisor = small_divisor(t, params);
      if (std::abs(e.divisor) < threshold) {
        std::ostringstream os;
        os << "build_nf_map: near resonance at kappa = " << spec.kappa << ", tuple (" << t.to_string() << "), |D| = "
           << std::abs(e.divisor);
        throw ContractError(os.str());
      }
      map.min_divisor = std::min(map.min_divisor, std::abs(e.divisor));
      e.value = -spec.a / e.divisor;
    }
    map.entries.push_back(std::move(e));
  });
  return map;
}

// max over divided entries of |D M + a|.
inline double homological_residual(const NFMap& map) {
  double r = 0.0;
  for (const auto& e : map.entries)
    if (e.flag == NFFlag::divided) r = std::max(r, std::abs(e.divisor * e.value + map.spec.a));
  return r;
}

// Q(f_1, ..., f_p); slots after ell read conj(f_j).
inline PeriodicField nf_multilinear(const NFMap& map, const std::vector<const PeriodicField*>& f) {
  const auto& g = f.front()->grid();
  const int ell = map.spec.ell;
  std::vector<cplx> out(g.M());
  for (const auto& e : map.entries) {
    if (e.flag != NFFlag::divided) continue;
    cplx prod = e.value;
    for (size_t j = 0; j < e.k.size() && prod != 0.0; ++j)
      prod *= static_cast<int>(j) < ell ? f[j]->coeff(e.k[j]) : std::conj(f[j]->coeff(-e.k[j]));
    out[g.index(e.n)] += prod;
  }
  bool even = true;
  for (const auto* p : f) even = even && p->flags().is_even;
  return PeriodicField(g, std::move(out), {false, even, MeanConvention::zero_mean});
}

inline PeriodicField nf_Q(const NFMap& map, const PeriodicField& u) {
  std::vector<const PeriodicField*> f(map.spec.p, &u);
  return nf_multilinear(map, f);
}

// Directional derivative dQ(u)[w].
inline PeriodicField nf_dQ(const NFMap& map, const PeriodicField& u, const PeriodicField& w) {
  PeriodicField acc = PeriodicField::zero(u.grid(), {false, true, MeanConvention::zero_mean});
  for (int j = 0; j < map.spec.p; ++j) {
    std::vector<const PeriodicField*> f(map.spec.p, &u);
    f[j] = &w;
    acc += nf_multilinear(map, f);
  }
  return acc;
}

enum class NFDirection { forward, inverse };

// forward: v = u + Q(u). inverse: u = v - Q(u) by fixed-point iteration.
inline PeriodicField apply_nf_transform(const PeriodicField& u, const NFMap& map, NFDirection dir, double tol = 1e-13,
                                        int max_iter = 200) {
  const double nu = l2_norm(u);
  if (nu == 0.0) return u;
  if (!(l2_norm(nf_Q(map, u)) < 0.5 * nu))
    throw ContractError("apply_nf_transform: |Q(u)| must stay below |u|/2 for the near-identity map");
  if (dir == NFDirection::forward) return u + nf_Q(map, u);
  PeriodicField w = u;
  for (int it = 0; it < max_iter; ++it) {
    PeriodicField next = u - nf_Q(map, w);
    double d = l2_norm(next - w);
    w = next;
    if (d <= tol * nu) return w;
  }
  throw ConvergenceError("apply_nf_transform: inverse iteration did not converge", l2_norm(u - nf_Q(map, w) - w) / nu);
}

// Real part of the H^s pairing, 2 pi sum |n|^{2s} f_n conj(g_n).
inline double hs_pairing(const PeriodicField& f, const PeriodicField& g, double s) {
  const auto& gr = f.grid();
  double acc = 0.0;
  for (int n = -gr.nmax() + 1; n < gr.nmax(); ++n)
    if (n != 0) acc += std::pow(std::abs(double(n)), 2.0 * s) * (f.coeff(n) * std::conj(g.coeff(n))).real();
  return 2.0 * kPi * acc;
}

inline double hs_norm(const PeriodicField& u, double s) { return std::sqrt(std::max(0.0, hs_pairing(u, u, s))); }

// RK4 for a generic generator; stop(u, t) ends the run early.
inline PeriodicField model_integrate(const PeriodicField& u0, const std::function<PeriodicField(const PeriodicField&)>& F, double T,
                                     double dt, const std::function<bool(const PeriodicField&, double)>& stop = {},
                                     double* t_end = nullptr) {
  const int n = T <= 0.0 ? 0 : static_cast<int>(std::ceil(T / dt - 1e-9));
  const double h = n ? T / n : 0.0;
  PeriodicField u = u0;
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    PeriodicField k1 = F(u);
    PeriodicField k2 = F(u + (0.5 * h) * k1);
    PeriodicField k3 = F(u + (0.5 * h) * k2);
    PeriodicField k4 = F(u + h * k3);
    u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = (i + 1 == n) ? T : t + h;
    if (stop && stop(u, t)) break;
  }
  if (t_end) *t_end = t;
  return u;
}

inline double model_cfl(const ModelSpec& spec, double safety = 0.5) { return cfl_limit(2 * spec.Nc, spec.params(), safety); }

// d/dt |u|^2_{H^s} and d/dt |u + Q(u)|^2_{H^s} at t = 0 along the model flow.
struct OrderBumpPoint {
  double eps = 0.0;
  double raw = 0.0;
  double transformed = 0.0;
};

inline OrderBumpPoint norm_derivatives(const PeriodicField& u, const NFMap& map, double s) {
  PeriodicField ut = model_rhs(u, map.spec);
  PeriodicField v = u + nf_Q(map, u);
  PeriodicField vt = ut + nf_dQ(map, u, ut);
  return {0.0, 2.0 * hs_pairing(ut, u, s), 2.0 * hs_pairing(vt, v, s)};
}

struct OrderBumpReport {
  std::vector<OrderBumpPoint> points;
  double raw_exponent = 0.0;
  double transformed_exponent = 0.0;
};

inline OrderBumpReport order_bump(const NFMap& map, const PeriodicField& u1, const std::vector<double>& eps_list, double s = 1.0) {
  OrderBumpReport r;
  std::vector<double> le, lr, lt;
  for (double eps : eps_list) {
    auto pt = norm_derivatives(eps * u1, map, s);
    pt.eps = eps;
    r.points.push_back(pt);
    le.push_back(std::log(eps));
    lr.push_back(std::log(std::abs(pt.raw)));
    lt.push_back(std::log(std::abs(pt.transformed)));
  }
  double lo, hi;
  std::vector<double> e(eps_list), a, b;
  for (const auto& pt : r.points) {
    a.push_back(std::abs(pt.raw));
    b.push_back(std::abs(pt.transformed));
  }
  detail::fit_loglog(e, a, r.raw_exponent, lo, hi);
  detail::fit_loglog(e, b, r.transformed_exponent, lo, hi);
  return r;
}

// Resonant truncation of the model: only monomials on resonant tuples.
struct ResonantSystem {
  ModelSpec spec;
  std::vector<NFEntry> tuples;
};

inline ResonantSystem resonant_system(const ModelSpec& spec) {
  spec.validate();
  if (spec.p % 2 == 0 || 2 * spec.ell != spec.p + 1) throw ContractError("resonant_system: needs p odd and ell = (p+1)/2");
  ResonantSystem rs{spec, {}};
  detail::for_each_tuple(spec.p, spec.Nc, [&](const std::vector<int>& k) {
    int n = 0;
    for (int v : k) n += v;
    if (n == 0 || std::abs(n) > spec.Nc) return;
    if (is_resonant_tuple(model_divisor_tuple(spec, k, n))) rs.tuples.push_back({k, n, 0.0, 1.0, NFFlag::resonant_skipped});
  });
  return rs;
}

inline PeriodicField resonant_rhs(const PeriodicField& u, const ResonantSystem& rs) {
  const auto& g = u.grid();
  const auto p = rs.spec.params();
  std::vector<cplx> out(g.M());
  for (int n = 1; n <= rs.spec.Nc; ++n)
    for (int sg : {-1, 1}) out[g.index(sg * n)] = cplx(0.0, m_kappa(n, p)) * u.coeff(sg * n);
  const cplx ia = cplx(0.0, 1.0) * rs.spec.a;
  for (const auto& e : rs.tuples) {
    cplx prod = ia;
    for (size_t j = 0; j < e.k.size(); ++j)
      prod *= static_cast<int>(j) < rs.spec.ell ? u.coeff(e.k[j]) : std::conj(u.coeff(-e.k[j]));
    out[g.index(e.n)] += prod;
  }
  return PeriodicField(g, std::move(out), {false, u.flags().is_even, MeanConvention::zero_mean});
}

inline std::vector<double> actions(const PeriodicField& u, int Nc) {
  std::vector<double> a(Nc + 1, 0.0);
  for (int n = 1; n <= Nc; ++n) a[n] = 2.0 * kPi * (std::norm(u.coeff(n)) + std::norm(u.coeff(-n)));
  return a;
}

struct ActionReport {
  double max_drift = 0.0;          // max_n |A_n(T) - A_n(0)| / sum A(0)
  double control_drift = 0.0;      // same with a -> -i |a|
  bool control_monotone = false;   // some action grows monotonically in the control run
  bool passed = false;
};

inline ActionReport action_check(const ModelSpec& spec, const PeriodicField& u0, double T, double dt, double tol = 1e-9) {
  ResonantSystem rs = resonant_system(spec);
  auto a0 = actions(u0, spec.Nc);
  double total = 0.0;
  for (double v : a0) total += v;
  // The control run grows without bound, so it stops once the total action has doubled.
  auto run = [&](const ResonantSystem& sys, std::vector<std::vector<double>>* history) {
    auto F = [&](const PeriodicField& u) { return resonant_rhs(u, sys); };
    const int samples = history ? 200 : 20;
    PeriodicField u = u0;
    if (history) history->push_back(actions(u, spec.Nc));
    for (int k = 0; k < samples; ++k) {
      u = model_integrate(u, F, T / samples, dt);
      if (!history) continue;
      auto a = actions(u, spec.Nc);
      double sum = 0.0;
      for (double v : a) sum += v;
      if (!std::isfinite(sum)) break;
      history->push_back(a);
      if (sum > 2.0 * total) break;
    }
    return u;
  };
  ActionReport r;
  if (total == 0.0) {
    r.passed = true;
    return r;
  }
  auto a1 = actions(run(rs, nullptr), spec.Nc);
  for (int n = 1; n <= spec.Nc; ++n) r.max_drift = std::max(r.max_drift, std::abs(a1[n] - a0[n]) / total);
  ResonantSystem ctl = rs;
  ctl.spec.a = cplx(0.0, -std::abs(spec.a));
  std::vector<std::vector<double>> hist;
  run(ctl, &hist);
  for (int n = 1; n <= spec.Nc; ++n) {
    r.control_drift = std::max(r.control_drift, std::abs(hist.back()[n] - a0[n]) / total);
    bool mono = a0[n] > 0.0;
    for (size_t k = 1; k < hist.size() && mono; ++k) mono = hist[k][n] > hist[k - 1][n];
    r.control_monotone = r.control_monotone || mono;
  }
  r.passed = r.max_drift < tol && r.control_monotone && r.control_drift > 1e3 * tol;
  return r;
}

struct NFLifetimeRow {
  double eps = 0.0;
  double T_raw = 0.0;
  double T_transformed = 0.0;
  bool censored_raw = true;
  bool censored_transformed = true;
};

struct NFLifetimeTable {
  std::vector<NFLifetimeRow> rows;
  double raw_slope = std::numeric_limits<double>::quiet_NaN();
  double transformed_slope = std::numeric_limits<double>::quiet_NaN();
  double slope_gap = std::numeric_limits<double>::quiet_NaN();
};

// Doubling times of |u|_{H^s} and of |u + Q(u)|_{H^s} along the model flow
// from eps u1.
inline NFLifetimeTable nf_lifetime_compare(const ModelSpec& spec, const PeriodicField& u1, const std::vector<double>& eps_list,
                                           double s, double dt, double T_max) {
  if (dt > model_cfl(spec)) throw ContractError("nf_lifetime_compare: dt exceeds the stability limit " + std::to_string(model_cfl(spec)));
  NFMap map = build_nf_map(spec);
  std::vector<std::future<NFLifetimeRow>> jobs;
  for (double eps : eps_list)
    jobs.push_back(std::async(std::launch::async, [&, eps] {
      NFLifetimeRow row{eps, T_max, T_max, true, true};
      PeriodicField u0 = eps * u1;
      const double r0 = hs_norm(u0, s), v0 = hs_norm(u0 + nf_Q(map, u0), s);
      if (r0 == 0.0) return row;
      auto F = [&](const PeriodicField& u) { return model_rhs(u, spec); };
      model_integrate(u0, F, T_max, dt, [&](const PeriodicField& u, double t) {
        if (row.censored_raw && hs_norm(u, s) > 2.0 * r0) {
          row.T_raw = t;
          row.censored_raw = false;
        }
        if (row.censored_transformed && hs_norm(u + nf_Q(map, u), s) > 2.0 * v0) {
          row.T_transformed = t;
          row.censored_transformed = false;
        }
        return !row.censored_raw && !row.censored_transformed;
      });
      return row;
    }));
  NFLifetimeTable out;
  std::vector<double> er, tr, et, tt;
  for (auto& j : jobs) {
    auto row = j.get();
    if (!row.censored_raw) {
      er.push_back(row.eps);
      tr.push_back(row.T_raw);
    }
    if (!row.censored_transformed) {
      et.push_back(row.eps);
      tt.push_back(row.T_transformed);
    }
    out.rows.push_back(row);
  }
  double lo, hi;
  detail::fit_loglog(er, tr, out.raw_slope, lo, hi);
  detail::fit_loglog(et, tt, out.transformed_slope, lo, hi);
  out.slope_gap = out.raw_slope - out.transformed_slope;
  return out;
}

// zeta_bar = [(1/2pi) int (1 + zeta1)^{-2/3}]^{-3/2} - 1 and gamma the zero-mean
// primitive of (1 + zeta_bar)^{2/3} (1 + zeta1)^{-2/3} - 1.
struct FlatteningProfile {
  double zeta_bar = 0.0;
  PeriodicField integrand;
  PeriodicField gamma;
  double integrand_mean = 0.0;
};

inline FlatteningProfile flattening_profile(const PeriodicField& zeta1) {
  const auto& g = zeta1.grid();
  const int L = 4 * g.M();
  auto z = zeta1.samples_on(L);
  std::vector<cplx> w(L);
  for (int j = 0; j < L; ++j) {
    if (!(z[j].real() > -0.5)) throw ContractError("flattening_profile: 1 + zeta must stay above 1/2");
    w[j] = std::pow(1.0 + z[j].real(), -2.0 / 3.0);
  }
  auto c = detail::truncate_from_padded(w, g.M());
  const double mean = c[0].real();
  const double zeta_bar = std::pow(mean, -1.5) - 1.0;
  const double scale = std::pow(1.0 + zeta_bar, 2.0 / 3.0);
  for (auto& v : c) v *= scale;
  c[0] -= 1.0;
  const double integrand_mean = std::abs(c[0]);
  PeriodicField f = resymmetrize(PeriodicField(g, std::move(c), {zeta1.flags().is_real, zeta1.flags().is_even, MeanConvention::free}));
  std::vector<cplx> cz = f.coeffs();
  cz[0] = 0.0;
  PeriodicField gamma = antiderivative(PeriodicField(g, std::move(cz), f.flags()));
  return FlatteningProfile{zeta_bar, f, gamma, integrand_mean};
}

// zeta = (1 + eta'^2)^{-3/2} - 1.
inline PeriodicField canonical_zeta(const PeriodicField& eta) {
  return apply_pointwise(derivative(eta), [](cplx v) { return cplx(std::pow(1.0 + std::norm(v), -1.5) - 1.0); }).with_flags(
      {eta.flags().is_real, eta.flags().is_even, MeanConvention::free});
}

}  // namespace capgrav
