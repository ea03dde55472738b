#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <string>
#include <vector>

#include "capgrav/dispersion.hpp"
#include "capgrav/dno.hpp"
#include "capgrav/errors.hpp"
#include "capgrav/grid.hpp"

namespace capgrav {

struct WaveState {
  PeriodicField eta;
  PeriodicField psi;
  double t = 0.0;
  PhysParams params;
};

inline WaveState make_wave_state(const PeriodicField& eta, const PeriodicField& psi, const PhysParams& params, double t = 0.0) {
  if (eta.grid() != psi.grid()) throw ContractError("make_wave_state: grid mismatch between eta and psi");
  params.validate();
  auto e = eta.with_flags(real_even(MeanConvention::zero_mean));
  auto p = psi.with_flags(real_even(MeanConvention::mod_constants));
  detail::validate_flags(e, "make_wave_state(eta)");
  detail::validate_flags(p, "make_wave_state(psi)");
  if (!(sup_abs(e) < 0.5)) throw ContractError("make_wave_state: sup|eta| must stay below 1/2");
  return WaveState{resymmetrize(e), resymmetrize(p), t, params};
}

inline WaveState zero_wave_state(const SpectralGrid& g, const PhysParams& params) {
  return make_wave_state(PeriodicField::zero(g), PeriodicField::zero(g), params);
}

// The involution S(eta, psi) = (eta, -psi).
inline WaveState reverse(const WaveState& s) { return WaveState{s.eta, -s.psi, s.t, s.params}; }

struct WaveRhs {
  PeriodicField eta_t;
  PeriodicField psi_t;
  double mass_rate = 0.0;  // |int G(eta) psi dx| before the mean is projected out
};

namespace detail {

inline PeriodicField from_padded(const std::vector<cplx>& v, const SpectralGrid& g, FieldFlags f) {
  return resymmetrize(PeriodicField(g, truncate_from_padded(v, g.M()), f));
}

// d/dx [eta' (1 + eta'^2)^{-1/2}]
inline PeriodicField curvature(const PeriodicField& eta) {
  const auto& g = eta.grid();
  const int L = 2 * g.M();
  auto e1 = padded_row(eta.coeffs().data(), g, L, 1);
  for (auto& v : e1) v = v / std::sqrt(1.0 + v * v);
  return derivative(from_padded(e1, g, {eta.flags().is_real, false, MeanConvention::free}));
}

}  // namespace detail

//   eta_t = G(eta) psi
//   psi_t = -g eta + kappa H(eta) - psi'^2 / 2 + (eta' psi' + G(eta) psi)^2 / (2 (1 + eta'^2))
inline WaveRhs rhs(const WaveState& s, const DNOConfig& cfg = {}) {
  const auto& g = s.eta.grid();
  DNResult dn = dirichlet_neumann_full(s.eta, s.psi, cfg);
  const int L = 2 * g.M();
  auto e1 = detail::padded_row(s.eta.coeffs().data(), g, L, 1);
  auto p1 = detail::padded_row(s.psi.coeffs().data(), g, L, 1);
  auto gv = detail::padded_row(dn.G.coeffs().data(), g, L);
  std::vector<cplx> q(L);
  for (int j = 0; j < L; ++j) {
    cplx w = e1[j] * p1[j] + gv[j];
    q[j] = -0.5 * p1[j] * p1[j] + 0.5 * w * w / (1.0 + e1[j] * e1[j]);
  }
  PeriodicField quad = detail::from_padded(q, g, real_even());
  PeriodicField psi_t = -s.params.g * s.eta + s.params.kappa * detail::curvature(s.eta) + quad;
  psi_t = resymmetrize(psi_t.with_flags(real_even(MeanConvention::mod_constants)));
  PeriodicField eta_t = resymmetrize(dn.G.with_flags(real_even(MeanConvention::zero_mean)));
  return WaveRhs{eta_t, psi_t, 2.0 * kPi * dn.mean_before_projection};
}

struct IntegratorConfig {
  double dt = 1e-3;
  std::string scheme = "rk4";
  bool dealias = true;
  bool resym = true;
  int cadence = 10;  // steps between recorded snapshots
  double safety = 0.5;
  double s = 1.0;  // Sobolev index of the recorded norm

  void validate() const {
    if (!(dt > 0.0)) throw ContractError("IntegratorConfig: dt must be positive");
    if (scheme != "rk4") throw ContractError("IntegratorConfig: unknown scheme '" + scheme + "'");
    if (!dealias || !resym) throw ContractError("IntegratorConfig: dealiasing and resymmetrization cannot be disabled");
    if (cadence < 1) throw ContractError("IntegratorConfig: cadence must be >= 1");
    if (!(safety > 0.0)) throw ContractError("IntegratorConfig: safety must be positive");
  }
};

// safety / (sqrt(kappa) (M/2)^{3/2}): the stiffest linear frequency is about
// sqrt(kappa) |xi|^{3/2}.
inline double cfl_limit(int M, const PhysParams& p, double safety = 0.5) {
  return safety * std::pow(0.5 * M, -1.5) / std::sqrt(p.kappa);
}

struct Observables {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double hs_norm = 0.0;
  double linf_eta = 0.0;
};

// ||eta||_{H^{s+1/4}} and ||psi||_{H^{s-1/4}} combined in l2.
inline double state_norm(const PeriodicField& eta, const PeriodicField& psi, double s) {
  double a = sobolev_norm(eta, s + 0.25), b = sobolev_norm(psi, s - 0.25);
  return std::sqrt(a * a + b * b);
}

inline double state_norm(const WaveState& st, double s) { return state_norm(st.eta, st.psi, s); }

inline double state_distance(const WaveState& a, const WaveState& b, double s) {
  return state_norm((a.eta - b.eta).with_flags(real_even(MeanConvention::zero_mean)),
                    (a.psi - b.psi).with_flags(real_even(MeanConvention::mod_constants)), s);
}

// Energy 1/2 int psi G psi + g/2 int eta^2 + kappa int (sqrt(1 + eta'^2) - 1).
inline double energy(const WaveState& st, const DNOConfig& cfg = {}) {
  const auto& g = st.eta.grid();
  PeriodicField G = dirichlet_neumann(st.eta, st.psi, cfg);
  double kin = 0.5 * integral_product(st.psi, G).real();
  double pot = 0.5 * st.params.g * std::pow(l2_norm(st.eta), 2);
  const int L = 2 * g.M();
  auto e1 = detail::padded_row(st.eta.coeffs().data(), g, L, 1);
  double surf = 0.0;
  for (const auto& v : e1) surf += std::sqrt(1.0 + std::norm(v)) - 1.0;
  surf *= 2.0 * kPi / L;
  return kin + pot + st.params.kappa * surf;
}

inline Observables observables(const WaveState& st, const DNOConfig& cfg = {}, double s = 1.0) {
  Observables o;
  o.t = st.t;
  o.mass = 2.0 * kPi * st.eta.mean().real();
  o.energy = energy(st, cfg);
  o.hs_norm = state_norm(st, s);
  o.linf_eta = linf_norm(st.eta);
  return o;
}

struct Trajectory {
  std::vector<WaveState> states;
  std::vector<Observables> obs;
  bool truncated = false;
  std::string diagnostic;
  double max_mass_rate = 0.0;
  int steps = 0;

  const WaveState& final_state() const { return states.back(); }
};

namespace detail {

inline WaveState axpy(const WaveState& s, double h, const WaveRhs& k) {
  return WaveState{s.eta + h * k.eta_t, s.psi + h * k.psi_t, s.t, s.params};
}

inline WaveState snapshot(const WaveState& s) {
  WaveState out = s;
  std::vector<cplx> c = s.psi.coeffs();
  c[0] = 0.0;
  out.psi = s.psi.with_coeffs(std::move(c));
  return out;
}

}  // namespace detail

inline WaveState rk4_step(const WaveState& s, double h, const DNOConfig& cfg, double* mass_rate = nullptr) {
  WaveRhs k1 = rhs(s, cfg);
  WaveRhs k2 = rhs(detail::axpy(s, 0.5 * h, k1), cfg);
  WaveRhs k3 = rhs(detail::axpy(s, 0.5 * h, k2), cfg);
  WaveRhs k4 = rhs(detail::axpy(s, h, k3), cfg);
  if (mass_rate) *mass_rate = std::max({k1.mass_rate, k2.mass_rate, k3.mass_rate, k4.mass_rate});
  PeriodicField eta = s.eta + (h / 6.0) * (k1.eta_t + 2.0 * k2.eta_t + 2.0 * k3.eta_t + k4.eta_t);
  PeriodicField psi = s.psi + (h / 6.0) * (k1.psi_t + 2.0 * k2.psi_t + 2.0 * k3.psi_t + k4.psi_t);
  return WaveState{resymmetrize(eta.with_flags(real_even(MeanConvention::zero_mean))),
                   resymmetrize(psi.with_flags(real_even(MeanConvention::mod_constants))), s.t + h, s.params};
}

using StopPredicate = std::function<bool(const WaveState&)>;

// Integrates from state.t to t_final (either direction) with steps of at most
// icfg.dt. The run stops early, keeping what it has, when the surface leaves
// sup|eta| < 1/2, the solver fails, or `stop` returns true.
inline Trajectory evolve(const WaveState& state, double t_final, const IntegratorConfig& icfg, const DNOConfig& cfg = {},
                         const StopPredicate& stop = {}) {
  icfg.validate();
  cfg.validate();
  const double limit = cfl_limit(state.eta.M(), state.params, icfg.safety);
  if (icfg.dt > limit)
    throw ContractError("evolve: dt = " + std::to_string(icfg.dt) + " exceeds the stability limit " + std::to_string(limit));
  const double span = t_final - state.t;
  const int n = span == 0.0 ? 0 : static_cast<int>(std::ceil(std::abs(span) / icfg.dt - 1e-9));
  const double h = n == 0 ? 0.0 : span / n;
  Trajectory tr;
  WaveState cur = state;
  tr.states.push_back(detail::snapshot(cur));
  tr.obs.push_back(observables(cur, cfg, icfg.s));
  for (int i = 1; i <= n; ++i) {
    double rate = 0.0;
    try {
      cur = rk4_step(cur, h, cfg, &rate);
    } catch (const std::exception& e) {
      tr.truncated = true;
      tr.diagnostic = "step " + std::to_string(i) + " at t = " + std::to_string(cur.t) + ": " + e.what();
      break;
    }
    if (i == n) cur.t = t_final;
    tr.steps = i;
    tr.max_mass_rate = std::max(tr.max_mass_rate, rate);
    const bool left_domain = !(sup_abs(cur.eta) < 0.5);
    const bool stopped = !left_domain && stop && stop(cur);
    if (i % icfg.cadence == 0 || i == n || left_domain || stopped) {
      tr.states.push_back(detail::snapshot(cur));
      tr.obs.push_back(observables(cur, cfg, icfg.s));
    }
    if (left_domain) {
      tr.truncated = true;
      tr.diagnostic = "sup|eta| reached 1/2 at t = " + std::to_string(cur.t);
      break;
    }
    if (stopped) break;
  }
  return tr;
}

struct ReversibilityReport {
  double defect = 0.0;
  double self_error = 0.0;
  double ratio = 0.0;
  bool passed = false;
  WaveState backward;
  WaveState mirrored;
};

// A = Phi^{-T}(u0) and B = S Phi^T (S u0), compared in the state norm; the
// integrator error is estimated from A at dt/2.
inline ReversibilityReport reversibility_check(const WaveState& u0, double T, const IntegratorConfig& icfg,
                                               const DNOConfig& cfg = {}, double s = 1.0) {
  auto run = [&](const WaveState& from, double to, const IntegratorConfig& ic) {
    Trajectory tr = evolve(from, to, ic, cfg);
    if (tr.truncated) throw ConvergenceError("reversibility_check: run left the validity domain (" + tr.diagnostic + ")", tr.final_state().t);
    return tr.final_state();
  };
  IntegratorConfig half = icfg;
  half.dt = 0.5 * icfg.dt;
  half.cadence = 2 * icfg.cadence;
  WaveState A = run(u0, u0.t - T, icfg);
  WaveState B = reverse(run(reverse(u0), u0.t + T, icfg));
  WaveState A2 = run(u0, u0.t - T, half);
  ReversibilityReport r{state_distance(A, B, s), state_distance(A, A2, s), 0.0, false, A, B};
  r.ratio = r.self_error > 0.0 ? r.defect / r.self_error : (r.defect > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.passed = r.defect <= 10.0 * r.self_error;
  return r;
}

struct LifetimeRow {
  double kappa = 0.0;
  double eps = 0.0;
  double T_double = 0.0;
  bool censored = true;
  std::string note;
};

struct LifetimeTable {
  std::vector<LifetimeRow> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_lo = std::numeric_limits<double>::quiet_NaN();
  double slope_hi = std::numeric_limits<double>::quiet_NaN();
  int points = 0;
};

namespace detail {

// Least-squares slope of log y on log x with a 95% Student-t interval.
inline void fit_loglog(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& lo, double& hi) {
  const int n = static_cast<int>(x.size());
  slope = lo = hi = std::numeric_limits<double>::quiet_NaN();
  if (n < 2) return;
  std::vector<double> lx(n), ly(n);
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) return;
  slope = sxy / sxx;
  if (n < 3) {
    lo = hi = slope;
    return;
  }
  double rss = 0;
  for (int i = 0; i < n; ++i) rss += std::pow(ly[i] - my - slope * (lx[i] - mx), 2);
  double se = std::sqrt(rss / (n - 2) / sxx);
  boost::math::students_t dist(n - 2);
  double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
  lo = slope - tq * se;
  hi = slope + tq * se;
}

}  // namespace detail

// For each kappa and eps, evolve eps (eta1, psi1) until the state norm first
// exceeds twice its initial value or T_max is reached (censored).
inline LifetimeTable lifetime_experiment(const std::vector<double>& eps_list, const PeriodicField& eta1, const PeriodicField& psi1,
                                         const std::vector<PhysParams>& params, double s, const IntegratorConfig& icfg,
                                         const DNOConfig& cfg = {}, double T_max = 1e3) {
  std::vector<std::future<LifetimeRow>> jobs;
  for (const auto& p : params)
    for (double eps : eps_list)
      jobs.push_back(std::async(std::launch::async, [=, &eta1, &psi1] {
        LifetimeRow row{p.kappa, eps, T_max, true, ""};
        WaveState u0 = make_wave_state(eps * eta1, eps * psi1, p);
        const double n0 = state_norm(u0, s);
        if (n0 == 0.0) return row;
        Trajectory tr = evolve(u0, T_max, icfg, cfg, [&](const WaveState& st) { return state_norm(st, s) > 2.0 * n0; });
        const WaveState& last = tr.final_state();
        if (state_norm(last, s) > 2.0 * n0) {
          row.T_double = last.t;
          row.censored = false;
        } else if (tr.truncated) {
          row.T_double = last.t;
          row.note = tr.diagnostic;
        }
        return row;
      }));
  LifetimeTable out;
  for (auto& j : jobs) out.rows.push_back(j.get());
  std::vector<double> xs, ys;
  for (const auto& r : out.rows)
    if (!r.censored && (params.empty() || r.kappa == params.front().kappa)) {
      xs.push_back(r.eps);
      ys.push_back(r.T_double);
    }
  out.points = static_cast<int>(xs.size());
  detail::fit_loglog(xs, ys, out.slope, out.slope_lo, out.slope_hi);
  return out;
}

// Complex unknown u = Lambda(D) omega + i Lambda(D)^{-1} eta with
// Lambda = (|xi| tanh|xi| / (g + kappa xi^2))^{1/4}; mode 0 is dropped.
inline double lambda_factor(double xi, const PhysParams& p) {
  double a = std::abs(xi);
  if (a == 0.0) return 0.0;
  return std::pow(a * std::tanh(a) / (p.g + p.kappa * xi * xi), 0.25);
}

inline PeriodicField complex_from_eta_omega(const PeriodicField& eta, const PeriodicField& omega, const PhysParams& p) {
  if (eta.grid() != omega.grid()) throw ContractError("complex_from_eta_omega: grid mismatch");
  const auto& g = eta.grid();
  std::vector<cplx> c(g.M());
  for (int n = -g.nmax() + 1; n < g.nmax(); ++n) {
    if (n == 0) continue;
    double L = lambda_factor(n, p);
    c[g.index(n)] = L * omega.coeff(n) + cplx(0.0, 1.0) * eta.coeff(n) / L;
  }
  return PeriodicField(g, std::move(c), {false, eta.flags().is_even && omega.flags().is_even, MeanConvention::zero_mean});
}

// eta = Lambda (u - conj u) / 2i, omega = Lambda^{-1} (u + conj u) / 2.
inline std::pair<PeriodicField, PeriodicField> eta_omega_from_complex(const PeriodicField& u, const PhysParams& p) {
  const auto& g = u.grid();
  PeriodicField ub = u.conj();
  std::vector<cplx> e(g.M()), w(g.M());
  for (int n = -g.nmax() + 1; n < g.nmax(); ++n) {
    if (n == 0) continue;
    double L = lambda_factor(n, p);
    e[g.index(n)] = L * (u.coeff(n) - ub.coeff(n)) / cplx(0.0, 2.0);
    w[g.index(n)] = (u.coeff(n) + ub.coeff(n)) / (2.0 * L);
  }
  const bool even = u.flags().is_even;
  return {resymmetrize(PeriodicField(g, std::move(e), {true, even, MeanConvention::zero_mean})),
          resymmetrize(PeriodicField(g, std::move(w), {true, even, MeanConvention::mod_constants}))};
}

// The good unknown omega of the state, then u.
inline PeriodicField complex_coordinates(const WaveState& st, const DNOConfig& cfg = {}) {
  GoodUnknown gu = good_unknown_fields(st.eta, st.psi, cfg);
  return complex_from_eta_omega(st.eta, gu.omega, st.params);
}

}  // namespace capgrav
