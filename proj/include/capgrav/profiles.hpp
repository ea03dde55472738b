#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "capgrav/errors.hpp"
#include "capgrav/grid.hpp"

namespace capgrav {

// Named initial profiles. All are real, even cosine series.

inline PeriodicField single_mode(const SpectralGrid& g, int n, double eps) {
  if (n < 1 || n >= g.nmax()) throw ContractError("single_mode: mode " + std::to_string(n) + " outside [1, M/2)");
  return cos_mode(g, n, eps);
}

inline PeriodicField two_mode(const SpectralGrid& g, int n1, int n2, double eps, double ratio = 0.5) {
  return single_mode(g, n1, eps) + single_mode(g, n2, eps * ratio);
}

// Cosine coefficients drawn uniformly in [-1, 1] with weight exp(-decay n),
// for 1 <= n <= nmax, scaled so that the largest coefficient is eps.
inline PeriodicField random_even(const SpectralGrid& g, unsigned seed, double decay, double eps, int nmax = -1) {
  if (nmax < 0) nmax = g.nmax() / 2;
  if (nmax >= g.nmax()) throw ContractError("random_even: nmax must stay below M/2");
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::map<int, cplx> modes;
  double peak = 0.0;
  std::vector<double> a(nmax + 1);
  for (int n = 1; n <= nmax; ++n) {
    a[n] = U(rng) * std::exp(-decay * n);
    peak = std::max(peak, std::abs(a[n]));
  }
  for (int n = 1; n <= nmax; ++n) {
    double v = peak > 0.0 ? eps * a[n] / peak : 0.0;
    modes[n] = 0.5 * v;
    modes[-n] = 0.5 * v;
  }
  return make_field_from_modes(modes, g, real_even(MeanConvention::zero_mean));
}

}  // namespace capgrav
