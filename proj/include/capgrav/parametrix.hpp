#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "capgrav/errors.hpp"
#include "capgrav/jet.hpp"
#include "capgrav/strip.hpp"

namespace capgrav {

// Coefficients of the frozen ODE (d_z^2 - 2 i a xi d_z - (1+b) xi^2) e = 0.
inline double coef_a(double ep) { return ep / (1.0 + ep * ep); }
inline double coef_b(double ep) { return -ep * ep / (1.0 + ep * ep); }
inline double coef_c(double a, double b) {
  double d = 1.0 + b - a * a;
  if (!(d > 0.0)) throw ContractError("fundamental solutions need 1 + b - a^2 > 0");
  return std::sqrt(d) - 1.0;
}

namespace detail {

template <class T>
T make_const(double v) {
  return T(cplx(v, 0.0));
}
template <>
inline cplx make_const<cplx>(double v) {
  return cplx(v, 0.0);
}

template <class T>
double re_value(const T& x) {
  if constexpr (std::is_same_v<T, cplx>)
    return x.real();
  else
    return x.value().real();
}

// cosh(s X) / cosh(X) and sinh(s X) / cosh(X) through decaying exponentials.
template <class T>
T cosh_ratio(double s, T X) {
  using std::exp;
  if (re_value(X) < 0.0) X = -X;
  const T one = make_const<T>(1.0);
  return (exp((s - 1.0) * X) + exp(-(s + 1.0) * X)) / (one + exp(-2.0 * X));
}

template <class T>
T sinh_ratio(double s, T X) {
  using std::exp;
  const T one = make_const<T>(1.0);
  if (re_value(X) < 0.0) return -sinh_ratio(s, -X);
  return (exp((s - 1.0) * X) - exp(-(s + 1.0) * X)) / (one + exp(-2.0 * X));
}

template <class T>
T tanh_of(T X) {
  using std::tanh;
  return tanh(X);
}

}  // namespace detail

// w_+, its z-derivative, and w_- for real constants a, b (any scalar or jet
// type T carrying xi and the coefficients).
template <class T>
struct WPlus {
  T w, wz;
};

template <class T>
WPlus<T> w_plus_jet(double z, const T& xi, const T& a, const T& b) {
  using std::exp;
  using std::sqrt;
  const T one = detail::make_const<T>(1.0);
  const T I = T(cplx(0.0, 1.0));
  T c1 = sqrt(one + b - a * a);  // 1 + c
  T X = xi * c1;
  T alpha = a / c1;
  T Tz = detail::tanh_of(T((z + 1.0) * X));
  T T0 = detail::tanh_of(X);
  T R = detail::cosh_ratio(z + 1.0, X);
  T den = one - I * alpha * T0;
  T ph = exp(I * (z * a * xi));
  T w = ph * R * (one - I * alpha * Tz) / den;
  // d/dz: i a xi w + e^{i z a xi} X R (T(z) - i alpha) / den
  T wz = I * a * xi * w + ph * X * R * (Tz - I * alpha) / den;
  return {w, wz};
}

inline cplx w_minus_value(double z, double xi, double a, double b) {
  const double c1 = std::sqrt(1.0 + b - a * a);
  const double X = xi * c1;
  const cplx I(0.0, 1.0);
  const cplx den = 1.0 - I * (a / c1) * std::tanh(X);
  const cplx ph = std::exp(I * ((z + 1.0) * a * xi));
  if (X == 0.0) return ph * z / den;
  return ph * detail::sinh_ratio(z, cplx(X)) / (X * den);
}

inline cplx w_minus_dz_value(double z, double xi, double a, double b) {
  const double c1 = std::sqrt(1.0 + b - a * a);
  const double X = xi * c1;
  const cplx I(0.0, 1.0);
  const cplx den = 1.0 - I * (a / c1) * std::tanh(X);
  const cplx ph = std::exp(I * ((z + 1.0) * a * xi));
  return I * a * xi * w_minus_value(z, xi, a, b) + ph * detail::cosh_ratio(z, cplx(X)) / den;
}

inline cplx wronskian_value(double z, double xi, double a, double b) {
  const double c1 = std::sqrt(1.0 + b - a * a);
  const double X = xi * c1;
  const cplx I(0.0, 1.0);
  const cplx den = 1.0 - I * (a / c1) * std::tanh(X);
  const double sech = 2.0 * std::exp(-std::abs(X)) / (1.0 + std::exp(-2.0 * std::abs(X)));
  return std::exp(I * ((2.0 * z + 1.0) * a * xi)) * sech / den;
}

struct FundamentalData {
  double eta_prime = 0.0;
  double xi = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;
  std::function<cplx(double, double)> w_plus;
  std::function<cplx(double, double)> w_plus_dz;
  std::function<cplx(double, double)> w_minus;
  std::function<cplx(double, double)> w_minus_dz;
  std::function<cplx(double, double)> wronskian;
};

inline FundamentalData fundamental_solutions(double eta_prime, double xi) {
  FundamentalData d;
  d.eta_prime = eta_prime;
  d.xi = xi;
  d.a = coef_a(eta_prime);
  d.b = coef_b(eta_prime);
  d.c = coef_c(d.a, d.b);
  const double a = d.a, b = d.b;
  d.w_plus = [a, b](double z, double x) { return w_plus_jet<cplx>(z, cplx(x), cplx(a), cplx(b)).w; };
  d.w_plus_dz = [a, b](double z, double x) { return w_plus_jet<cplx>(z, cplx(x), cplx(a), cplx(b)).wz; };
  d.w_minus = [a, b](double z, double x) { return w_minus_value(z, x, a, b); };
  d.w_minus_dz = [a, b](double z, double x) { return w_minus_dz_value(z, x, a, b); };
  d.wronskian = [a, b](double z, double x) { return wronskian_value(z, x, a, b); };
  return d;
}

// K^0(z, z') = (w_+(z) w_-(z') 1_{z<z'} + w_-(z) w_+(z') 1_{z>z'}) / W(z') / (1 + eta'^2).
inline std::function<cplx(double, double)> green_kernel_var(double eta_prime, double xi) {
  auto fd = fundamental_solutions(eta_prime, xi);
  const double norm = 1.0 + eta_prime * eta_prime;
  return [fd, norm](double z, double zp) {
    cplx k = z < zp ? fd.w_plus(z, fd.xi) * fd.w_minus(zp, fd.xi) : fd.w_minus(z, fd.xi) * fd.w_plus(zp, fd.xi);
    return k / fd.wronskian(zp, fd.xi) / norm;
  };
}

// The order -1 correction to d_z e_+ at z = 0, computed from the recursion:
// e solves P e = f with f minus the order-one part of the composition
// brackets,
//   f = -[ (1/2i){eta'^2, e_zz} - {eta' xi, e_z} - (1/2i){xi^2, e} ],
// zero Dirichlet data at z = 0 and zero Neumann data at z = -1. The brackets
// only see x through eta', so d_x = eta'' d_{eta'}. The routine returns
// (1 + eta'^2) d_z e(0) together with the closed form
// -(1/2) eta'' (sgn xi + i eta')^2 / (1 + eta'^2).
struct OrderMinusOneCheck {
  cplx recursion;
  cplx closed_form;
  double relative_error = 0.0;
};

inline OrderMinusOneCheck order_minus_one_correction(double eta_prime, double eta_second, double xi, int panels = 40,
                                                     int q = 16) {
  using J1 = Jet<cplx, 1>;
  const cplx I(0.0, 1.0);
  const double ep = eta_prime, epp = eta_second;
  auto coefs = [](const J1& e) {
    J1 one = J1(cplx(1.0));
    J1 den = one + e * e;
    return std::make_pair(e / den, -(e * e) / den);
  };
  // e, e_z, e_zz and their derivatives in xi and in eta' at height z.
  auto source = [&](double z) {
    J1 xv = J1::variable(cplx(xi)), xc = J1(cplx(xi));
    J1 ev = J1::variable(cplx(ep)), ec = J1(cplx(ep));
    auto [a_x, b_x] = coefs(ec);
    auto [a_e, b_e] = coefs(ev);
    auto wx = w_plus_jet<J1>(z, xv, a_x, b_x);
    auto we = w_plus_jet<J1>(z, xc, a_e, b_e);
    J1 Izz_x = J1(2.0 * I) * a_x * xv * wx.wz + (J1(cplx(1.0)) + b_x) * xv * xv * wx.w;
    cplx e0 = wx.w.value();
    (void)e0;
    cplx dxi_ezz = Izz_x.derivative(1);
    cplx dxi_ez = wx.wz.derivative(1);
    cplx dep_ez = we.wz.derivative(1);
    cplx dep_e = we.w.derivative(1);
    // {eta'^2, e_zz} = -2 eta' eta'' d_xi e_zz
    // {eta' xi, e_z} = eta' eta'' d_eta' e_z - eta'' xi d_xi e_z
    // {xi^2, e} = 2 xi eta'' d_eta' e
    cplx b1 = -2.0 * ep * epp * dxi_ezz;
    cplx b2 = ep * epp * dep_ez - epp * xi * dxi_ez;
    cplx b3 = 2.0 * xi * epp * dep_e;
    return -(b1 / (2.0 * I) - b2 - b3 / (2.0 * I));
  };
  auto fd = fundamental_solutions(ep, xi);
  // (1 + eta'^2) d_z K^0(0, z') = d_z w_-(0) w_+(z') / W(z')
  const double c1 = 1.0 + fd.c;
  const cplx dwm0 = std::exp(I * (fd.a * xi)) * (2.0 * std::exp(-std::abs(xi * c1)) / (1.0 + std::exp(-2.0 * std::abs(xi * c1)))) /
                    (1.0 - I * (fd.a / c1) * std::tanh(xi * c1));
  cplx acc = 0.0;
  std::vector<double> t, w;
  for (int p = 0; p < panels; ++p) {
    double lo = -1.0 + double(p) / panels, hi = -1.0 + double(p + 1) / panels;
    gauss_legendre(q, lo, hi, t, w);
    for (int k = 0; k < q; ++k) acc += w[k] * dwm0 * fd.w_plus(t[k], xi) / fd.wronskian(t[k], xi) * source(t[k]);
  }
  OrderMinusOneCheck out;
  out.recursion = acc;
  const double sg = xi > 0 ? 1.0 : -1.0;
  out.closed_form = -0.5 * epp * (sg + I * ep) * (sg + I * ep) / (1.0 + ep * ep);
  out.relative_error = std::abs(out.recursion - out.closed_form) / std::abs(out.closed_form);
  return out;
}

}  // namespace capgrav
