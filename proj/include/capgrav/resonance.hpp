#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "capgrav/dispersion.hpp"

namespace capgrav {

struct KappaScan {
  double kappa = 0.0;
  double min_abs_D = std::numeric_limits<double>::infinity();
  double fitted_N0 = 0.0;
  DivisorTuple worst;
  std::map<int, double> min_by_max_frequency;  // nu -> min |D| over tuples with max n = nu
  bool candidate_resonance = false;              // min |D| < 1e-10
};

struct ResonanceReport {
  std::vector<KappaScan> rows;
  std::vector<double> wilton_roots;
  long long tuples_scanned = 0;  // per kappa, after canonical ordering
};

namespace detail {

// Nondecreasing k-tuples with entries >= lo and entry sum <= budget.
inline void for_each_multiset(int k, int lo, int budget, std::vector<int>& cur,
                              const std::function<void(const std::vector<int>&, int)>& fn, int used = 0) {
  if (k == 0) {
    fn(cur, used);
    return;
  }
  for (int v = lo; used + v * k <= budget; ++v) {
    cur.push_back(v);
    for_each_multiset(k - 1, v, budget, cur, fn, used + v);
    cur.pop_back();
  }
}

inline double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

// Minimum non-resonant |D| over all tuples with p <= p_max and sum n_j <=
// n_sum_max. Blocks are sorted and the plus block is never smaller than the
// minus block (swapping blocks only flips the sign of D); equal-size blocks
// are additionally taken in lexicographic order.
inline KappaScan scan_kappa(const PhysParams& base, double kappa, int p_max, int n_sum_max, long long* count = nullptr) {
  PhysParams params{base.g, kappa};
  std::vector<double> m(n_sum_max + 1);
  for (int n = 1; n <= n_sum_max; ++n) m[n] = m_kappa(double(n), params);
  KappaScan row;
  row.kappa = kappa;
  long long scanned = 0;
  std::vector<int> a, b;
  for (int p = 0; p <= p_max; ++p) {
    const int q = p + 2;
    for (int qp = (q + 1) / 2; qp <= q; ++qp) {
      const int qm = q - qp;
      detail::for_each_multiset(qp, 1, n_sum_max - qm, a, [&](const std::vector<int>& A, int sumA) {
        double mA = 0.0;
        int maxA = A.back();
        for (int v : A) mA += m[v];
        detail::for_each_multiset(qm, 1, n_sum_max - sumA, b, [&](const std::vector<int>& B, int) {
          if (qp == qm && !(A < B)) return;  // resonant (A == B) or duplicate of a swapped pair
          double mB = 0.0;
          for (int v : B) mB += m[v];
          int nu = qm > 0 ? std::max(maxA, B.back()) : maxA;
          double d = std::abs(mA - mB);
          ++scanned;
          auto it = row.min_by_max_frequency.find(nu);
          if (it == row.min_by_max_frequency.end() || d < it->second) row.min_by_max_frequency[nu] = d;
          if (d < row.min_abs_D) {
            row.min_abs_D = d;
            std::vector<int> n = A;
            n.insert(n.end(), B.begin(), B.end());
            row.worst = DivisorTuple(p, qp - 1, n);
          }
        });
      });
    }
  }
  if (scanned == 0) throw ContractError("scan_nonresonance: empty tuple family (n_sum_max too small)");
  std::vector<double> lx, ly;
  for (const auto& [nu, d] : row.min_by_max_frequency) {
    if (nu >= 2 && d > 0.0) {
      lx.push_back(std::log(double(nu)));
      ly.push_back(std::log(d));
    }
  }
  row.fitted_N0 = lx.size() >= 2 ? -detail::least_squares_slope(lx, ly) : 0.0;
  row.candidate_resonance = row.min_abs_D < 1e-10;
  if (count) *count = scanned;
  return row;
}

// F(kappa) = m(a) + m(b) - m(a+b); returns the first root on (1e-6, 1e3)
// bracketed by a sign change on a logarithmic scan, refined by bisection.
inline std::optional<double> find_wilton_kappa(int a, int b, const PhysParams& params) {
  if (a < 1 || b < 1) throw ContractError("find_wilton_kappa: frequencies must be >= 1");
  auto F = [&](double kappa) {
    PhysParams p{params.g, kappa};
    return m_kappa(double(a), p) + m_kappa(double(b), p) - m_kappa(double(a + b), p);
  };
  const double lo = 1e-6, hi = 1e3;
  const int samples = 400;
  double k0 = lo, f0 = F(lo);
  for (int i = 1; i <= samples; ++i) {
    double k1 = lo * std::pow(hi / lo, double(i) / samples);
    double f1 = F(k1);
    if (f0 == 0.0) return k0;
    if ((f0 < 0.0) != (f1 < 0.0)) {
      double l = k0, r = k1, fl = f0;
      for (int it = 0; it < 200 && r - l > 1e-14 * std::max(1.0, r); ++it) {
        double mid = 0.5 * (l + r);
        double fm = F(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (fl < 0.0)) {
          l = mid;
          fl = fm;
        } else {
          r = mid;
        }
      }
      return 0.5 * (l + r);
    }
    k0 = k1;
    f0 = f1;
  }
  return std::nullopt;
}

inline ResonanceReport scan_nonresonance(const PhysParams& params, int p_max, int n_sum_max,
                                         const std::vector<double>& kappa_grid) {
  if (p_max < 0 || p_max > 4) throw ContractError("scan_nonresonance: p_max must lie in [0, 4]");
  if (n_sum_max > 200) throw ContractError("scan_nonresonance: n_sum_max must be <= 200");
  if (kappa_grid.empty()) throw ContractError("scan_nonresonance: empty kappa grid");
  ResonanceReport rep;
  for (double kappa : kappa_grid) {
    if (!(kappa > 0.0)) throw ContractError("scan_nonresonance: kappa must be > 0");
    rep.rows.push_back(scan_kappa(params, kappa, p_max, n_sum_max, &rep.tuples_scanned));
  }
  return rep;
}

}  // namespace capgrav
