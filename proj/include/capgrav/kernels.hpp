#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "capgrav/strip.hpp"

namespace capgrav {

// Flat-strip Poisson symbols, written with decaying exponentials only so that
// they stay finite for any |xi|.

// cosh((z+1) xi) / cosh(xi)
inline double poisson_C(double z, double xi) {
  xi = std::abs(xi);
  if (xi == 0.0) return 1.0;
  return (std::exp(z * xi) + std::exp(-(z + 2.0) * xi)) / (1.0 + std::exp(-2.0 * xi));
}

// sinh(z xi) / (xi cosh xi)
inline double poisson_S(double z, double xi) {
  xi = std::abs(xi);
  if (xi == 0.0) return z;
  if (xi < 1e-3) return std::sinh(z * xi) / (xi * std::cosh(xi));
  return (std::exp((z - 1.0) * xi) - std::exp(-(z + 1.0) * xi)) / (xi * (1.0 + std::exp(-2.0 * xi)));
}

namespace detail {

// sinh(xi hi) cosh(xi (lo + 1)) / (xi cosh xi)
inline double k0_product(double hi, double lo, double xi) {
  if (xi == 0.0) return hi;
  if (xi < 1e-3) return std::sinh(xi * hi) * std::cosh(xi * (lo + 1.0)) / (xi * std::cosh(xi));
  const double a = xi * hi, b = xi * (lo + 1.0);
  double num = std::exp(a + b - xi) + std::exp(a - b - xi) - std::exp(-a + b - xi) - std::exp(-a - b - xi);
  return num / (2.0 * xi * (1.0 + std::exp(-2.0 * xi)));
}

}  // namespace detail

// Green function of d^2/dz^2 - xi^2 with K = 0 at z = 0 and dK/dz = 0 at z = -1.
inline double kernel_K0(double z, double zp, double xi) {
  return detail::k0_product(std::max(z, zp), std::min(z, zp), std::abs(xi));
}

// One smooth branch of K0 (z' <= z when `below`), continued past z' = z.
inline double kernel_K0_branch(double z, double zp, double xi, bool below) {
  return below ? detail::k0_product(z, zp, std::abs(xi)) : detail::k0_product(zp, z, std::abs(xi));
}

// d/dz' of K0. `below` selects the branch z' <= z (the derivative jumps by 1
// across z' = z).
inline double kernel_dK0(double z, double zp, double xi, bool below) {
  xi = std::abs(xi);
  if (xi == 0.0) return below ? 0.0 : 1.0;
  const double hi = below ? z : zp, lo = below ? zp : z;
  const double s = below ? -1.0 : 1.0;
  const double a = xi * hi, b = xi * (lo + 1.0);
  double num = std::exp(a + b - xi) + s * std::exp(a - b - xi) + s * std::exp(-a + b - xi) + std::exp(-a - b - xi);
  return num / (2.0 * (1.0 + std::exp(-2.0 * xi)));
}

// Discretized z'-integrals against K0 and dK0/dz' for one |n|:
// (A f)_i ~ int K0(z_i, z') f(z') dz',  (B f)_i ~ int dK0/dz'(z_i, z') f(z') dz'.
struct ModeKernels {
  Eigen::MatrixXd A, B;
  Eigen::VectorXd C, S;
};

namespace detail {

inline ModeKernels build_mode_kernels(const ZGrid& zg, int n) {
  const int J = zg.J();
  const double xi = std::abs(n);
  ModeKernels k;
  k.A = Eigen::MatrixXd::Zero(J + 1, J + 1);
  k.B = Eigen::MatrixXd::Zero(J + 1, J + 1);
  k.C.resize(J + 1);
  k.S.resize(J + 1);
  for (int i = 0; i <= J; ++i) {
    k.C(i) = poisson_C(zg.z(i), xi);
    k.S(i) = poisson_S(zg.z(i), xi);
  }
  if (zg.kind() == ZGridKind::chebyshev) {
    // Integrate the polynomial interpolant of f against the kernel, split at
    // z' = z_i where the kernel has its kink.
    const int q = J + 16 + n / 4;
    std::vector<double> t, w;
    for (int i = 0; i <= J; ++i) {
      const double zi = zg.z(i);
      for (int side = 0; side < 2; ++side) {
        double a = side == 0 ? -1.0 : zi, b = side == 0 ? zi : 0.0;
        if (b - a <= 0.0) continue;
        gauss_legendre(q, a, b, t, w);
        for (int m = 0; m < q; ++m) {
          auto L = zg.interpolation_weights(t[m]);
          double kv = w[m] * kernel_K0(zi, t[m], xi);
          double dv = w[m] * kernel_dK0(zi, t[m], xi, side == 0);
          for (int j = 0; j <= J; ++j) {
            k.A(i, j) += kv * L[j];
            k.B(i, j) += dv * L[j];
          }
        }
      }
    }
  } else {
    for (int i = 0; i <= J; ++i) {
      const double zi = zg.z(i);
      auto lower = zg.simpson_weights(0, i);
      auto upper = zg.simpson_weights(i, J);
      for (int j = 0; j <= J; ++j) {
        double zj = zg.z(j);
        k.A(i, j) = lower[j] * kernel_K0_branch(zi, zj, xi, true) + upper[j] * kernel_K0_branch(zi, zj, xi, false);
        k.B(i, j) = lower[j] * kernel_dK0(zi, zj, xi, true) + upper[j] * kernel_dK0(zi, zj, xi, false);
      }
    }
  }
  return k;
}

}  // namespace detail

// Cached per (grid kind, J, |n|).
inline std::shared_ptr<const ModeKernels> mode_kernels(const ZGrid& zg, int n) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::shared_ptr<const ModeKernels>> cache;
  auto key = std::make_tuple(static_cast<int>(zg.kind()), zg.J(), std::abs(n));
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto k = std::make_shared<const ModeKernels>(detail::build_mode_kernels(zg, std::abs(n)));
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(key, k).first->second;
}

// phi0(z) = cosh((z+1)D)/cosh(D) psi, mode by mode.
inline StripField harmonic_extension_flat(const PeriodicField& psi, std::shared_ptr<const ZGrid> zgrid) {
  const auto& g = psi.grid();
  CoeffMatrix c(zgrid->J() + 1, g.M());
  for (int i = 0; i <= zgrid->J(); ++i)
    for (int m = 0; m < g.M(); ++m) c(i, m) = psi.coeffs()[m] * poisson_C(zgrid->z(i), g.mode(m));
  return StripField(std::move(zgrid), g, std::move(c), psi.flags());
}

// z -> int K0(z, z', D) f(z') dz' with the grid's quadrature.
inline StripField poisson_kernel_apply(const StripField& f) {
  const auto& g = f.grid();
  CoeffMatrix out(f.J() + 1, g.M());
  for (int m = 0; m < g.M(); ++m) {
    auto k = mode_kernels(f.zgrid(), g.mode(m));
    out.col(m) = k->A.cast<cplx>() * f.coeffs().col(m);
  }
  return StripField(f.zgrid_ptr(), g, std::move(out), f.flags());
}

}  // namespace capgrav
