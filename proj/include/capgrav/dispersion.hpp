#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "capgrav/errors.hpp"
#include "capgrav/multiplier.hpp"

namespace capgrav {

struct PhysParams {
  double g = 1.0;
  double kappa = 1.0;
  double h = 1.0;

  PhysParams() = default;
  PhysParams(double g_, double kappa_) : g(g_), kappa(kappa_) { validate(); }

  void validate() const {
    if (!(g > 0.0)) throw ContractError("gravity g must be > 0");
    if (!(kappa > 0.0)) throw ContractError("surface tension kappa must be > 0");
    if (h != 1.0) throw ContractError("depth is fixed at h = 1");
  }
};

// (|xi| tanh|xi|)^{1/2} (g + kappa xi^2)^{1/2}, optionally times (1 - chi(xi)).
// For g = 1 this is m_kappa; for other g it equals sqrt(g) m_{kappa/g}.
inline double m_kappa(double xi, const PhysParams& p, bool smoothed = false) {
  double a = std::abs(xi);
  if (a == 0.0) return 0.0;
  double v = std::sqrt(a * std::tanh(a)) * std::sqrt(p.g + p.kappa * xi * xi);
  if (smoothed) v *= 1.0 - bump(xi, 0.25, 0.5);
  return v;
}

inline double m_kappa(double xi, double kappa) { return m_kappa(xi, PhysParams{1.0, kappa}); }

// (xi tanh xi / (1 + kappa xi^2))^{1/4} (1 - chi(xi)), g = 1 units.
inline double lambda_kappa(double xi, const PhysParams& p) {
  double a = std::abs(xi);
  if (a == 0.0) return 0.0;
  double v = std::pow(a * std::tanh(a) / (1.0 + p.kappa * xi * xi), 0.25);
  return v * (1.0 - bump(xi, 0.25, 0.5));
}

struct ReducedParams {
  PhysParams params;  // g = 1
  double time_scale = 1.0;
  double psi_scale = 1.0;
};

// (g, kappa) -> (1, kappa/g). Reduced time is tau = time_scale * t and the
// reduced potential is psi / psi_scale; eta is unchanged. Frequencies in the
// original units are time_scale times the reduced ones.
inline ReducedParams reduce_g(const PhysParams& p) {
  p.validate();
  ReducedParams r;
  r.params = PhysParams{1.0, p.kappa / p.g};
  r.time_scale = std::sqrt(p.g);
  r.psi_scale = std::sqrt(p.g);
  return r;
}

// Indices 0..ell carry a plus sign, ell+1..p+1 a minus sign.
struct DivisorTuple {
  int p = 0;
  int ell = 0;
  std::vector<int> n;

  DivisorTuple() = default;
  DivisorTuple(int p_, int ell_, std::vector<int> n_) : p(p_), ell(ell_), n(std::move(n_)) { validate(); }

  void validate() const {
    if (p < 0) throw ContractError("divisor tuple needs p >= 0");
    if (ell < -1 || ell > p + 1) throw ContractError("divisor tuple needs -1 <= ell <= p+1");
    if (static_cast<int>(n.size()) != p + 2) throw ContractError("divisor tuple needs p+2 frequencies");
    for (int v : n)
      if (v < 1) throw ContractError("divisor tuple frequencies must be >= 1");
  }

  std::vector<int> plus_block() const { return {n.begin(), n.begin() + (ell + 1)}; }
  std::vector<int> minus_block() const { return {n.begin() + (ell + 1), n.end()}; }

  int max_frequency() const { return *std::max_element(n.begin(), n.end()); }

  DivisorTuple swapped() const {
    auto plus = plus_block(), minus = minus_block();
    std::vector<int> m = minus;
    m.insert(m.end(), plus.begin(), plus.end());
    return DivisorTuple(p, static_cast<int>(minus.size()) - 1, m);
  }

  std::string to_string() const {
    std::ostringstream os;
    auto plus = plus_block(), minus = minus_block();
    for (size_t i = 0; i < plus.size(); ++i) os << (i ? " " : "") << plus[i];
    os << " |";
    for (int v : minus) os << " " << v;
    return os.str();
  }
};

inline double small_divisor(const DivisorTuple& t, const PhysParams& params) {
  t.validate();
  double plus = 0.0, minus = 0.0;
  for (int j = 0; j <= t.p + 1; ++j) (j <= t.ell ? plus : minus) += m_kappa(double(t.n[j]), params);
  return plus - minus;
}

inline bool is_resonant_tuple(const DivisorTuple& t) {
  t.validate();
  auto plus = t.plus_block(), minus = t.minus_block();
  if (plus.size() != minus.size()) return false;
  std::sort(plus.begin(), plus.end());
  std::sort(minus.begin(), minus.end());
  return plus == minus;
}

}  // namespace capgrav
