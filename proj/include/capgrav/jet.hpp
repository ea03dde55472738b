#pragma once

// Truncated Taylor arithmetic. A Jet<T, N> holds the normalized Taylor
// coefficients c[k] = f^(k)(x0) / k! for k = 0..N, so derivatives of any
// composition of the supported elementary functions come out exactly.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>

namespace capgrav {

template <class T, int N>
struct Jet {
  static_assert(N >= 0);
  std::array<T, N + 1> c{};

  Jet() = default;
  Jet(T v) { c[0] = v; }  // NOLINT: constants promote implicitly

  static Jet variable(T x0) {
    Jet j(x0);
    if constexpr (N >= 1) j.c[1] = T(1);
    return j;
  }

  T value() const { return c[0]; }

  // k-th derivative at the expansion point.
  T derivative(int k) const {
    double fact = 1.0;
    for (int i = 2; i <= k; ++i) fact *= i;
    return c[k] * fact;
  }

  T& operator[](std::size_t k) { return c[k]; }
  const T& operator[](std::size_t k) const { return c[k]; }

  Jet& operator+=(const Jet& o) {
    for (int k = 0; k <= N; ++k) c[k] += o.c[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int k = 0; k <= N; ++k) c[k] -= o.c[k];
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (auto& v : a.c) v = -v;
    return a;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int k = 0; k <= N; ++k) {
      T s{};
      for (int j = 0; j <= k; ++j) s += a.c[j] * b.c[k - j];
      r.c[k] = s;
    }
    return r;
  }
  friend Jet operator*(const T& s, Jet a) {
    for (auto& v : a.c) v *= s;
    return a;
  }
  friend Jet operator*(Jet a, const T& s) { return s * a; }
  friend Jet operator/(const Jet& a, const Jet& b) {
    Jet r;
    for (int k = 0; k <= N; ++k) {
      T s = a.c[k];
      for (int j = 1; j <= k; ++j) s -= b.c[j] * r.c[k - j];
      r.c[k] = s / b.c[0];
    }
    return r;
  }
};

template <class T, int N>
Jet<T, N> exp(const Jet<T, N>& a) {
  using std::exp;
  Jet<T, N> r;
  r.c[0] = exp(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    T s{};
    for (int j = 1; j <= k; ++j) s += double(j) * a.c[j] * r.c[k - j];
    r.c[k] = s / double(k);
  }
  return r;
}

template <class T, int N>
Jet<T, N> log(const Jet<T, N>& a) {
  using std::log;
  Jet<T, N> r;
  r.c[0] = log(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    T s = double(k) * a.c[k];
    for (int j = 1; j < k; ++j) s -= double(j) * r.c[j] * a.c[k - j];
    r.c[k] = s / (double(k) * a.c[0]);
  }
  return r;
}

template <class T, int N>
Jet<T, N> pow(const Jet<T, N>& a, double p) {
  using std::pow;
  Jet<T, N> r;
  r.c[0] = pow(a.c[0], p);
  for (int k = 1; k <= N; ++k) {
    T s{};
    for (int j = 1; j <= k; ++j) s += (p * j - (k - j)) * a.c[j] * r.c[k - j];
    r.c[k] = s / (double(k) * a.c[0]);
  }
  return r;
}

template <class T, int N>
Jet<T, N> sqrt(const Jet<T, N>& a) {
  return pow(a, 0.5);
}

namespace detail {

// sign = +1 gives (sinh, cosh), sign = -1 gives (sin, cos).
template <class T, int N>
void sin_cos_family(const Jet<T, N>& a, int sign, Jet<T, N>& s, Jet<T, N>& c) {
  using std::cos;
  using std::cosh;
  using std::sin;
  using std::sinh;
  if (sign > 0) {
    s.c[0] = sinh(a.c[0]);
    c.c[0] = cosh(a.c[0]);
  } else {
    s.c[0] = sin(a.c[0]);
    c.c[0] = cos(a.c[0]);
  }
  for (int k = 1; k <= N; ++k) {
    T ss{}, cc{};
    for (int j = 1; j <= k; ++j) {
      ss += double(j) * a.c[j] * c.c[k - j];
      cc += double(j) * a.c[j] * s.c[k - j];
    }
    s.c[k] = ss / double(k);
    c.c[k] = double(sign) * cc / double(k);
  }
}

}  // namespace detail

template <class T, int N>
Jet<T, N> sin(const Jet<T, N>& a) {
  Jet<T, N> s, c;
  detail::sin_cos_family(a, -1, s, c);
  return s;
}

template <class T, int N>
Jet<T, N> cos(const Jet<T, N>& a) {
  Jet<T, N> s, c;
  detail::sin_cos_family(a, -1, s, c);
  return c;
}

template <class T, int N>
Jet<T, N> sinh(const Jet<T, N>& a) {
  Jet<T, N> s, c;
  detail::sin_cos_family(a, +1, s, c);
  return s;
}

template <class T, int N>
Jet<T, N> cosh(const Jet<T, N>& a) {
  Jet<T, N> s, c;
  detail::sin_cos_family(a, +1, s, c);
  return c;
}

// tanh through t' = 1 - t^2, stable for large arguments.
template <class T, int N>
Jet<T, N> tanh(const Jet<T, N>& a) {
  using std::tanh;
  Jet<T, N> t;
  t.c[0] = tanh(a.c[0]);
  Jet<T, N> one_minus_t2;
  for (int k = 1; k <= N; ++k) {
    // q = 1 - t^2 known up to order k-1
    T q{};
    for (int j = 0; j <= k - 1; ++j) q -= t.c[j] * t.c[k - 1 - j];
    one_minus_t2.c[k - 1] = q + (k - 1 == 0 ? T(1) : T(0));
    T s{};
    for (int j = 1; j <= k; ++j) s += double(j) * a.c[j] * one_minus_t2.c[k - j];
    t.c[k] = s / double(k);
  }
  return t;
}

}  // namespace capgrav
