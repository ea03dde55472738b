#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "capgrav/errors.hpp"
#include "capgrav/jet.hpp"

namespace capgrav {

inline constexpr int kMaxXiDerivative = 4;
using XiJet = Jet<double, kMaxXiDerivative>;

// C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t).
template <int N>
Jet<double, N> smooth_step(const Jet<double, N>& t) {
  const double t0 = t.value();
  if (t0 <= 0.0) return Jet<double, N>(0.0);
  if (t0 >= 1.0) return Jet<double, N>(1.0);
  Jet<double, N> one(1.0);
  auto f = [&](const Jet<double, N>& s) { return exp(-(one / s)); };
  Jet<double, N> a = f(t), b = f(one - t);
  return a / (a + b);
}

inline double smooth_step(double t) { return smooth_step(Jet<double, 0>(t)).value(); }

// Even bump equal to 1 on |r| <= inner and 0 on |r| >= outer.
template <int N>
Jet<double, N> bump(const Jet<double, N>& r, double inner, double outer) {
  Jet<double, N> ar = r.value() < 0.0 ? -r : r;
  Jet<double, N> t = (ar - Jet<double, N>(inner)) / Jet<double, N>(outer - inner);
  return Jet<double, N>(1.0) - smooth_step(t);
}

inline double bump(double r, double inner, double outer) { return bump(Jet<double, 0>(r), inner, outer).value(); }

// Low-frequency cutoff chi(xi) of the smoothed dispersion: 1 on |xi| <= 1/4,
// 0 on |xi| >= 1/2, so it vanishes on every nonzero integer and half-integer.
template <int N>
Jet<double, N> low_cutoff(const Jet<double, N>& xi) {
  return bump(xi, 0.25, 0.5);
}

// Paraproduct cutoff chi(xi', xi) = chi~(xi' / <xi>).
struct CutoffProfile {
  double delta = 0.4;

  CutoffProfile() = default;
  explicit CutoffProfile(double d) : delta(d) {
    if (!(d > 0.0 && d < 1.0)) throw ContractError("cutoff delta must lie in (0, 1)");
  }

  double profile(double r) const { return bump(r, 0.5 * delta, delta); }

  double operator()(double xi_prime, double xi) const { return profile(xi_prime / std::sqrt(1.0 + xi * xi)); }
};

enum class XiFamily { constant, xi_pow, m_kappa, tanh_xi, lambda_kappa, sech_profile };

inline std::string to_string(XiFamily f) {
  switch (f) {
    case XiFamily::constant: return "const";
    case XiFamily::xi_pow: return "xi_pow";
    case XiFamily::m_kappa: return "m_kappa";
    case XiFamily::tanh_xi: return "tanh_xi";
    case XiFamily::lambda_kappa: return "lambda_kappa";
    default: return "sech_profile";
  }
}

inline XiFamily xi_family_from_string(const std::string& s) {
  if (s == "const") return XiFamily::constant;
  if (s == "xi_pow") return XiFamily::xi_pow;
  if (s == "m_kappa") return XiFamily::m_kappa;
  if (s == "tanh_xi") return XiFamily::tanh_xi;
  if (s == "lambda_kappa") return XiFamily::lambda_kappa;
  if (s == "sech_profile") return XiFamily::sech_profile;
  throw ContractError("unknown multiplier family '" + s + "'");
}

struct XiFactor {
  XiFamily family = XiFamily::constant;
  double param = 0.0;  // power k for xi_pow, kappa for m_kappa / lambda_kappa

  template <int N>
  Jet<double, N> eval(double xi) const {
    using J = Jet<double, N>;
    J x = J::variable(xi);
    switch (family) {
      case XiFamily::constant: return J(1.0);
      case XiFamily::xi_pow: {
        J r(1.0);
        for (int k = 0; k < static_cast<int>(param); ++k) r = r * x;
        return r;
      }
      case XiFamily::tanh_xi: return tanh(x);
      case XiFamily::sech_profile: return J(1.0) / cosh(x);
      case XiFamily::m_kappa:
      case XiFamily::lambda_kappa: {
        J cut = J(1.0) - low_cutoff(x);
        if (cut.value() == 0.0 && std::abs(xi) < 0.5) return J(0.0);
        J xt = x * tanh(x);
        J cap = J(1.0) + J(param) * x * x;
        if (family == XiFamily::m_kappa) return sqrt(xt) * sqrt(cap) * cut;
        return pow(xt / cap, 0.25) * cut;
      }
    }
    return J(0.0);
  }

  int parity() const {
    if (family == XiFamily::xi_pow) return static_cast<int>(param) % 2 == 0 ? 1 : -1;
    if (family == XiFamily::tanh_xi) return -1;
    return 1;
  }

  double order() const {
    switch (family) {
      case XiFamily::xi_pow: return param;
      case XiFamily::m_kappa: return 1.5;
      case XiFamily::lambda_kappa: return -0.25;
      case XiFamily::sech_profile: return -std::numeric_limits<double>::infinity();
      default: return 0.0;
    }
  }
};

// Internal Taylor order used for symbol derivatives; compositions never
// need more than a handful of derivatives per factor group.
inline constexpr int kXiJetOrder = 12;

// A product of elementary factors, differentiated `deriv` times as a whole.
struct XiGroup {
  std::vector<XiFactor> factors;
  int deriv = 0;

  template <int N>
  Jet<double, N> base_jet(double xi) const {
    Jet<double, N> r(1.0);
    for (const auto& f : factors) r = r * f.template eval<N>(xi);
    return r;
  }

  int parity() const {
    int p = 1;
    for (const auto& f : factors) p *= f.parity();
    return deriv % 2 == 0 ? p : -p;
  }

  double order() const {
    double m = 0.0;
    for (const auto& f : factors) m += f.order();
    return m - deriv;
  }
};

// g(xi) = coef * prod_k (d/dxi)^{d_k} G_k(xi), with every G_k a product of
// real elementary factors. Derivatives are exact (Taylor arithmetic).
class XiFunction {
 public:
  XiFunction() = default;
  explicit XiFunction(std::complex<double> coef, std::vector<XiGroup> groups = {})
      : coef_(coef), groups_(std::move(groups)) {}

  static XiFunction constant(std::complex<double> c) { return XiFunction(c); }
  static XiFunction of(XiFamily fam, double param = 0.0, std::complex<double> c = 1.0) {
    return XiFunction(c, {XiGroup{{XiFactor{fam, param}}, 0}});
  }
  static XiFunction xi_pow(int k, std::complex<double> c = 1.0) {
    if (k < 0) throw ContractError("xi_pow needs k >= 0");
    return of(XiFamily::xi_pow, double(k), c);
  }
  static XiFunction m_kappa(double kappa) { return of(XiFamily::m_kappa, kappa); }
  static XiFunction lambda_kappa(double kappa) { return of(XiFamily::lambda_kappa, kappa); }
  static XiFunction tanh_xi() { return of(XiFamily::tanh_xi); }
  static XiFunction sech_profile() { return of(XiFamily::sech_profile); }

  std::complex<double> coef() const { return coef_; }
  const std::vector<XiGroup>& groups() const { return groups_; }

  int max_group_derivative() const {
    int d = 0;
    for (const auto& g : groups_) d = std::max(d, g.deriv);
    return d;
  }

  // Real part of g / coef as a Taylor jet of order N at xi.
  template <int N>
  Jet<double, N> real_jet(double xi) const {
    static_assert(N <= kXiJetOrder);
    Jet<double, N> r(1.0);
    for (const auto& g : groups_) {
      if (g.deriv == 0) {
        r = r * g.template base_jet<N>(xi);
        continue;
      }
      if (g.deriv + N > kXiJetOrder) throw ContractError("xi-derivative order exceeds available jet order");
      auto b = g.template base_jet<kXiJetOrder>(xi);
      Jet<double, N> shifted;
      for (int m = 0; m <= N; ++m) {
        double fac = 1.0;
        for (int q = m + 1; q <= m + g.deriv; ++q) fac *= q;
        shifted.c[m] = b.c[m + g.deriv] * fac;
      }
      r = r * shifted;
    }
    return r;
  }

  std::complex<double> operator()(double xi) const { return coef_ * real_jet<0>(xi).value(); }

  // d^k g / d xi^k at xi for k = 0..kMaxXiDerivative.
  std::array<std::complex<double>, kMaxXiDerivative + 1> derivatives(double xi) const {
    auto j = real_jet<kMaxXiDerivative>(xi);
    std::array<std::complex<double>, kMaxXiDerivative + 1> d;
    for (int k = 0; k <= kMaxXiDerivative; ++k) d[k] = coef_ * j.derivative(k);
    return d;
  }

  // (d/dxi)^r g as a sum of functions of the same form (Leibniz rule).
  std::vector<XiFunction> derivative_terms(int r) const {
    std::vector<XiFunction> cur{*this};
    for (int step = 0; step < r; ++step) {
      std::vector<XiFunction> next;
      for (const auto& t : cur) {
        for (size_t k = 0; k < t.groups_.size(); ++k) {
          XiFunction d = t;
          d.groups_[k].deriv += 1;
          next.push_back(std::move(d));
        }
      }
      cur = std::move(next);
    }
    return cur;
  }

  int parity() const {
    int p = 1;
    for (const auto& g : groups_) p *= g.parity();
    return p;
  }

  double order() const {
    double m = 0.0;
    for (const auto& g : groups_) m += g.order();
    return m;
  }

  XiFunction scaled(std::complex<double> s) const { return XiFunction(coef_ * s, groups_); }

  friend XiFunction operator*(const XiFunction& a, const XiFunction& b) {
    std::vector<XiGroup> g = a.groups_;
    g.insert(g.end(), b.groups_.begin(), b.groups_.end());
    return XiFunction(a.coef_ * b.coef_, std::move(g));
  }

 private:
  std::complex<double> coef_ = 1.0;
  std::vector<XiGroup> groups_;
};

}  // namespace capgrav
