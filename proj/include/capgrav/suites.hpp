#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "capgrav/dno.hpp"
#include "capgrav/grid.hpp"
#include "capgrav/resonance.hpp"
#include "capgrav/symbols.hpp"

namespace capgrav {

// A named check with its measured value and the bound it was held to.
struct CheckResult {
  std::string name;
  bool passed = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::string detail;
  double seconds = 0.0;
};

struct CheckSuite {
  std::vector<CheckResult> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }

  const CheckResult* first_failure() const {
    for (const auto& c : checks)
      if (!c.passed) return &c;
    return nullptr;
  }

  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  // fn fills value, passed and detail; any exception marks the check failed.
  void run(const std::string& name, double threshold, const std::function<void(CheckResult&)>& fn) {
    CheckResult r;
    r.name = name;
    r.threshold = threshold;
    auto t0 = std::chrono::steady_clock::now();
    try {
      fn(r);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    checks.push_back(std::move(r));
  }
};

namespace detail {

inline PeriodicField seeded_even(const SpectralGrid& g, int nmax, double amp, unsigned seed, MeanConvention mc) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::map<int, cplx> modes;
  for (int n = 1; n <= nmax; ++n) modes[n] = modes[-n] = amp * N(rng) * std::exp(-1.0 * n);
  return make_field_from_modes(modes, g, real_even(mc));
}

inline PeriodicField seeded_complex(const SpectralGrid& g, int nmax, double decay, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::map<int, cplx> modes;
  for (int n = -nmax; n <= nmax; ++n) modes[n] = std::exp(-decay * std::abs(n)) * cplx(N(rng), N(rng));
  return make_field_from_modes(modes, g, {false, false, MeanConvention::free});
}

inline double max_coeff_gap(const PeriodicField& a, const PeriodicField& b) {
  double m = 0.0;
  for (int i = 0; i < a.M(); ++i) m = std::max(m, std::abs(a.coeffs()[i] - b.coeffs()[i]));
  return m;
}

}  // namespace detail

struct DnoSuiteConfig {
  int M = 128;
  DNOConfig dno;
  std::vector<double> c_values{-0.2, -0.1, 0.1, 0.2};
  unsigned seed = 7;
  double eta_amp = 0.03;
  double contraction_h4 = 0.05;
  std::vector<int> principal_modes{4, 8, 16, 32};
  std::vector<std::string> only;  // empty runs every check

  bool enabled(const std::string& name) const { return only.empty() || std::find(only.begin(), only.end(), name) != only.end(); }
};

struct DnoSuiteReport {
  CheckSuite suite;
  std::vector<std::pair<std::string, StripDiagnostics>> solves;
  std::vector<double> case_seconds;  // one entry per exactness case
};

inline DnoSuiteReport dno_suite(const DnoSuiteConfig& cfg) {
  DnoSuiteReport rep;
  CheckSuite& all = rep.suite;
  struct Filtered {
    CheckSuite& s;
    const DnoSuiteConfig& c;
    void run(const std::string& name, double thr, const std::function<void(CheckResult&)>& fn) {
      if (c.enabled(name)) s.run(name, thr, fn);
    }
  } S{all, cfg};
  const DNOConfig& dc = cfg.dno;
  auto solve = [&](const std::string& tag, const PeriodicField& eta, const PeriodicField& psi, const DNOConfig& c) {
    DNResult r = dirichlet_neumann_full(eta, psi, c);
    rep.solves.emplace_back(tag, r.strip.diag);
    return r;
  };
  auto timed = [&](const std::function<void()>& f) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    rep.case_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };

  SpectralGrid g(cfg.M);
  auto eta = detail::seeded_even(g, 8, cfg.eta_amp, cfg.seed, MeanConvention::zero_mean);
  auto p1 = detail::seeded_even(g, 10, 1.0, cfg.seed + 1, MeanConvention::mod_constants);
  auto p2 = detail::seeded_even(g, 10, 1.0, cfg.seed + 2, MeanConvention::mod_constants);
  auto dtanh_depth = [](const PeriodicField& u, double depth) {
    return apply_multiplier(u, [depth](double xi) { return cplx(xi == 0.0 ? 0.0 : xi * std::tanh(depth * xi)); });
  };

  S.run("grid_convergence", 1e-8, [&](CheckResult& r) {
    SpectralGrid g2(2 * cfg.M);
    DNOConfig c2 = dc;
    c2.J = 2 * dc.J;
    auto G1 = solve("convergence_coarse", eta, p1, dc).G;
    auto G2 = solve("convergence_fine", resample(eta, g2), resample(p1, g2), c2).G;
    r.value = relative_difference(resample(G2, g), G1);
    r.passed = r.value < r.threshold;
    r.detail = "M=" + std::to_string(cfg.M) + ",J=" + std::to_string(dc.J) + " vs doubled";
  });

  S.run("flat_exactness", 1e-10, [&](CheckResult& r) {
    auto psi = cos_mode(g, 2);
    timed([&] {
      auto G = solve("flat", PeriodicField::zero(g), psi, dc).G;
      r.value = relative_difference(G, dtanh_depth(psi, 1.0));
    });
    r.passed = r.value < r.threshold;
  });

  S.run("constant_elevation", 1e-10, [&](CheckResult& r) {
    auto psi = cos_mode(g, 1) + cos_mode(g, 3, 0.5) + cos_mode(g, 7, 0.25);
    r.value = 0.0;
    for (double c : cfg.c_values) {
      auto eta_c = make_field_from_modes({{0, c}}, g, real_even());
      timed([&] {
        auto G = solve("constant_" + std::to_string(c), eta_c, psi, dc).G;
        r.value = std::max(r.value, relative_difference(G, dtanh_depth(psi, 1.0 + c)));
      });
    }
    r.passed = r.value < r.threshold;
  });

  S.run("zero_mean", 1e-10, [&](CheckResult& r) {
    auto res = solve("zero_mean", eta, p1, dc);
    r.value = res.mean_before_projection / l2_norm(p1);
    r.passed = r.value < r.threshold && res.G.mean() == 0.0;
  });

  S.run("self_adjoint", 1e-8, [&](CheckResult& r) {
    auto G1 = solve("adjoint_1", eta, p1, dc).G;
    auto G2 = solve("adjoint_2", eta, p2, dc).G;
    r.value = std::abs(integral_product(p1, G2) - integral_product(p2, G1));
    r.passed = r.value < r.threshold;
  });

  S.run("linearity", 1e-11, [&](CheckResult& r) {
    auto G1 = dirichlet_neumann(eta, p1, dc), G2 = dirichlet_neumann(eta, p2, dc);
    auto Gc = dirichlet_neumann(eta, 2.0 * p1 - 0.5 * p2, dc);
    r.value = linf_norm(Gc - (2.0 * G1 - 0.5 * G2)) / std::max(1.0, linf_norm(Gc));
    r.passed = r.value < r.threshold;
  });

  S.run("parity", kSymmetryTol, [&](CheckResult& r) {
    auto gu = good_unknown_fields(eta, p1, dc);
    auto G = dirichlet_neumann(eta, p1, dc);
    auto sym = check_symmetry(G);
    auto odd = check_symmetry(gu.V + gu.V.reflect());
    double vscale = std::max(linf_norm(gu.V), 1e-300);
    r.value = std::max({sym.real_defect, sym.even_defect, odd.max_magnitude / vscale, check_symmetry(gu.V).real_defect});
    r.passed = r.value <= r.threshold && G.flags().is_even && G.flags().is_real && gu.B.flags().is_even;
    if (!r.passed) r.detail = "output flags or symmetry defect";
  });

  S.run("contraction", 0.5, [&](CheckResult& r) {
    auto e = detail::seeded_even(g, 8, 1.0, cfg.seed + 3, MeanConvention::zero_mean);
    e = (cfg.contraction_h4 / sobolev_norm(e, 4.0)) * e;
    auto res = solve("contraction", e, p1, dc);
    r.value = res.strip.diag.contraction_ratio;
    r.passed = r.value < r.threshold;
    r.detail = "iterations=" + std::to_string(res.strip.diag.iterations);
  });

  S.run("principal_decay", 1.0, [&](CheckResult& r) {
    const double noise = 1e-13;
    std::vector<double> ratios;
    for (int n : cfg.principal_modes) {
      if (n >= g.nmax()) throw ContractError("principal_decay: mode " + std::to_string(n) + " not resolved on M=" + std::to_string(cfg.M));
      ratios.push_back(dn_principal_expand(cos_mode(g, 1, 1e-3), cos_mode(g, n), dc).residual_ratio);
    }
    r.value = 0.0;
    bool monotone = ratios.front() > 100 * noise;
    for (size_t k = 1; k < ratios.size(); ++k) {
      if (ratios[k] >= noise) r.value = std::max(r.value, ratios[k] / ratios[k - 1]);
      monotone = monotone && (ratios[k] < ratios[k - 1] || ratios[k] < noise);
    }
    r.passed = monotone;
    char buf[32];
    for (double v : ratios) {
      std::snprintf(buf, sizeof buf, "%.3e", v);
      r.detail += (r.detail.empty() ? "" : " ") + std::string(buf);
    }
  });
  return rep;
}

struct SymbolSuiteConfig {
  int M = 64;
  int pairs = 100;
  unsigned seed = 13;
  std::vector<int> rho{2, 3};
  int slope_M = 128;
  int n_lo = 8;
  int n_step = 4;
  double kappa = 0.7;  // parameter of the m_kappa family
};

struct SymbolSuiteReport {
  CheckSuite suite;
  std::vector<std::pair<int, std::vector<std::pair<int, double>>>> remainders;  // rho -> (n, residual)
};

inline std::vector<XiFunction> symbol_families(double kappa = 0.7) {
  return {XiFunction::constant(1.0),  XiFunction::xi_pow(1),          XiFunction::xi_pow(2),    XiFunction::m_kappa(kappa),
          XiFunction::tanh_xi(),      XiFunction::lambda_kappa(2.0), XiFunction::sech_profile()};
}

// Op^BW(a) Op^BW(b) - Op^BW((a#b)_rho) on cos(nx) for a = f xi, b = g xi.
inline std::vector<std::pair<int, double>> composition_remainders(int M, int rho, int n_lo, int n_hi, int n_step) {
  SpectralGrid g(M);
  auto f = cos_mode(g, 1);
  auto h = sin_mode(g, 1, 0.5) + cos_mode(g, 1, 0.5);
  auto a = SymbolObject::separable(f, XiFunction::xi_pow(1));
  auto b = SymbolObject::separable(h, XiFunction::xi_pow(1));
  auto ab = compose_symbols(a, b, rho);
  std::vector<std::pair<int, double>> out;
  for (int n = n_lo; n <= n_hi; n += n_step) {
    auto u = cos_mode(g, n);
    auto r = op_bw_apply(a, op_bw_apply(b, u)) - op_bw_apply(ab, u);
    out.emplace_back(n, l2_norm(r) / l2_norm(u));
  }
  return out;
}

inline SymbolSuiteReport symbol_suite(const SymbolSuiteConfig& cfg) {
  SymbolSuiteReport rep;
  auto& S = rep.suite;
  SpectralGrid g(cfg.M);
  const auto fams = symbol_families(cfg.kappa);
  std::mt19937 rng(cfg.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);

  S.run("conjugation", 1e-11, [&](CheckResult& r) {
    r.value = 0.0;
    for (int k = 0; k < cfg.pairs; ++k) {
      auto f = detail::seeded_complex(g, 8, 0.3, cfg.seed + 2 * k);
      auto a = SymbolObject::separable(f, fams[k % fams.size()].scaled(cplx(U(rng), U(rng))));
      auto u = detail::seeded_complex(g, g.nmax() - 8, 0.05, cfg.seed + 2 * k + 1);
      auto lhs = op_bw_apply(a, u).conj();
      auto rhs = op_bw_apply(a.conj_reflect(), u.conj());
      r.value = std::max(r.value, detail::max_coeff_gap(lhs, rhs) / std::max(1.0, l2_norm(lhs)));
    }
    r.passed = r.value < r.threshold;
    r.detail = std::to_string(cfg.pairs) + " pairs";
  });

  S.run("parity", 1e-11, [&](CheckResult& r) {
    r.value = 0.0;
    bool flags = true;
    for (int k = 0; k < cfg.pairs; ++k) {
      const auto& fam = fams[k % fams.size()];
      // a(-x, -xi) = a(x, xi): even f with even g, odd f with odd g
      std::map<int, cplx> fm, um;
      const double sgn = fam.parity() > 0 ? 1.0 : -1.0;
      for (int j = 1; j <= 6; ++j) {
        cplx c(U(rng), U(rng));
        fm[j] = c;
        fm[-j] = sgn * c;
      }
      if (sgn > 0) fm[0] = cplx(U(rng), U(rng));
      for (int j = 0; j <= g.nmax() - 8; ++j) um[j] = um[-j] = cplx(U(rng), U(rng)) * std::exp(-0.1 * j);
      auto f = make_field_from_modes(fm, g, {false, sgn > 0, MeanConvention::free});
      auto u = make_field_from_modes(um, g, {false, true, MeanConvention::free});
      auto a = SymbolObject::separable(f, fam);
      if (!a.even_in_x_xi()) throw ContractError("parity: constructed symbol is not even in (x, xi)");
      auto w = op_bw_apply(a, u);
      flags = flags && w.flags().is_even;
      r.value = std::max(r.value, check_symmetry(w).even_defect);
    }
    r.passed = flags && r.value < r.threshold;
    r.detail = std::to_string(cfg.pairs) + " pairs";
  });

  S.run("self_adjoint", 1e-10, [&](CheckResult& r) {
    r.value = 0.0;
    for (int k = 0; k < 10; ++k) {
      std::map<int, cplx> fm;
      for (int j = 1; j <= 6; ++j) {
        fm[j] = cplx(U(rng), U(rng));
        fm[-j] = std::conj(fm[j]);
      }
      auto f = make_field_from_modes(fm, g, {true, false, MeanConvention::free});
      const auto& fam = fams[k % fams.size()];
      auto a = SymbolObject::separable(f, fam);
      auto u = detail::seeded_complex(g, 20, 0.05, cfg.seed + 500 + k), v = detail::seeded_complex(g, 20, 0.05, cfg.seed + 600 + k);
      cplx lhs = inner_product(op_bw_apply(a, u), v), rhs = inner_product(u, op_bw_apply(a, v));
      r.value = std::max(r.value, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300));
    }
    r.passed = r.value < r.threshold;
  });

  S.run("spectral_support", 0.0, [&](CheckResult& r) {
    CutoffProfile cut;
    SpectralGrid gs(128);
    auto fs = detail::seeded_complex(gs, 40, 0.0, cfg.seed + 700);
    auto a = SymbolObject::separable(fs, XiFunction::xi_pow(1));
    r.value = 0.0;
    for (int n : {5, 20, 40}) {
      auto out = op_bw_apply(a, make_field_from_modes({{n, 1.0}}, gs, {false, false, MeanConvention::free}), cut);
      for (int k = -gs.nmax() + 1; k < gs.nmax(); ++k) {
        if (out.coeff(k) == 0.0) continue;
        double excess = std::abs(k - n) - (cut.delta * std::sqrt(1.0 + 0.25 * (k + n) * (k + n)) + 1.0);
        r.value = std::max(r.value, excess);
      }
    }
    r.passed = r.value <= r.threshold;
  });

  for (int rho : cfg.rho) {
    S.run("composition_slope_rho" + std::to_string(rho), 0.5, [&](CheckResult& r) {
      auto rem = composition_remainders(cfg.slope_M, rho, cfg.n_lo, cfg.slope_M / 4, cfg.n_step);
      rep.remainders.emplace_back(rho, rem);
      std::vector<double> x, y;
      for (auto [n, v] : rem) {
        x.push_back(std::log(double(n)));
        y.push_back(std::log(std::max(v, 1e-300)));
      }
      double slope = detail::least_squares_slope(x, y);
      r.value = std::abs(slope - (2.0 - rho));
      r.passed = r.value <= r.threshold;
      r.detail = "slope " + std::to_string(slope) + " target " + std::to_string(2 - rho);
    });
  }
  return rep;
}

}  // namespace capgrav
