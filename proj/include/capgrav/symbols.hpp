#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "capgrav/errors.hpp"
#include "capgrav/grid.hpp"
#include "capgrav/multiplier.hpp"

namespace capgrav {

// One separable piece f(x) g(xi). With shift s != 0 the x-Fourier
// coefficient at frequency j is f_j g(xi + s j); this is how a standard
// symbol is rewritten in Weyl form.
struct SymbolTerm {
  PeriodicField f;
  XiFunction g;
  double shift = 0.0;
};

enum class RealityTag { self_conjugate, anti_self_conjugate, none };

inline std::string to_string(RealityTag t) {
  switch (t) {
    case RealityTag::self_conjugate: return "conj_reflect_equals_a";
    case RealityTag::anti_self_conjugate: return "conj_reflect_equals_minus_a";
    default: return "none";
  }
}

// a(x, xi) either as a finite separable sum or as a table of x-Fourier
// coefficients on the half-integer lattice xi = h/2, |h| <= M.
class SymbolObject {
 public:
  SymbolObject(std::vector<SymbolTerm> terms, double order, bool check_order = true)
      : grid_(terms.empty() ? throw ContractError("symbol needs at least one term") : terms.front().f.grid()),
        terms_(std::move(terms)),
        order_(order) {
    for (const auto& t : terms_)
      if (t.f.grid() != grid_) throw ContractError("symbol terms live on different grids");
    if (check_order) validate_order();
  }

  static SymbolObject multiplier(const SpectralGrid& grid, const XiFunction& g) {
    return SymbolObject({{PeriodicField(grid, unit_coeffs(grid), real_even()), g, 0.0}}, finite_order(g.order()));
  }

  static SymbolObject function(const PeriodicField& f) { return SymbolObject({{f, XiFunction::constant(1.0), 0.0}}, 0.0); }

  static SymbolObject separable(const PeriodicField& f, const XiFunction& g) {
    return SymbolObject({{f, g, 0.0}}, finite_order(g.order()));
  }

  static SymbolObject constant(const SpectralGrid& grid, cplx c) { return multiplier(grid, XiFunction::constant(c)); }

  // table[h + M][i] is the FFT-ordered x-coefficient i at xi = h/2.
  static SymbolObject sampled(const SpectralGrid& grid, std::vector<std::vector<cplx>> table, double order) {
    SymbolObject s(grid, order);
    if (static_cast<int>(table.size()) != 2 * grid.M() + 1) throw ContractError("sampled symbol table has wrong size");
    s.table_ = std::make_shared<const std::vector<std::vector<cplx>>>(std::move(table));
    return s;
  }

  const SpectralGrid& grid() const { return grid_; }
  const std::vector<SymbolTerm>& terms() const { return terms_; }
  double order() const { return order_; }
  bool is_sampled() const { return static_cast<bool>(table_); }

  bool has_shift() const {
    for (const auto& t : terms_)
      if (t.shift != 0.0) return true;
    return false;
  }

  // x-Fourier coefficient of a(., xi) at frequency j.
  cplx hat(int j, double xi) const {
    if (!grid_.contains(j)) return 0.0;
    if (table_) {
      int h = static_cast<int>(std::lround(2.0 * xi));
      if (std::abs(2.0 * xi - h) > 1e-12 || std::abs(h) > grid_.M())
        throw ContractError("sampled symbol evaluated off its half-integer lattice");
      return (*table_)[h + grid_.M()][grid_.index(j)];
    }
    cplx s{};
    for (const auto& t : terms_) {
      cplx fj = t.f.coeff(j);
      if (fj != 0.0) s += fj * t.g(xi + t.shift * j);
    }
    return s;
  }

  // Pointwise value a(x, xi), for tests and dumps.
  cplx operator()(double x, double xi) const {
    cplx s{};
    for (int i = 0; i < grid_.M(); ++i) {
      int j = grid_.mode(i);
      s += hat(j, xi) * std::exp(cplx(0, j * x));
    }
    return s;
  }

  // conj(a(x, -xi)).
  SymbolObject conj_reflect() const {
    if (table_) {
      const int M = grid_.M();
      std::vector<std::vector<cplx>> t(2 * M + 1, std::vector<cplx>(M));
      for (int h = -M; h <= M; ++h)
        for (int i = 0; i < M; ++i) {
          int j = grid_.mode(i);
          int jm = j == M / 2 ? j : -j;
          t[h + M][i] = std::conj((*table_)[-h + M][grid_.index(jm)]);
        }
      return sampled(grid_, std::move(t), order_);
    }
    std::vector<SymbolTerm> out;
    for (const auto& t : terms_)
      out.push_back({t.f.conj(), XiFunction(std::conj(t.g.coef()) * double(t.g.parity()), t.g.groups()), t.shift});
    return SymbolObject(std::move(out), order_, false);
  }

  SymbolObject scaled(cplx c) const {
    if (table_) {
      auto t = *table_;
      for (auto& row : t)
        for (auto& v : row) v *= c;
      return sampled(grid_, std::move(t), order_);
    }
    std::vector<SymbolTerm> out = terms_;
    for (auto& t : out) t.g = t.g.scaled(c);
    return SymbolObject(std::move(out), order_, false);
  }

  friend SymbolObject operator+(const SymbolObject& a, const SymbolObject& b) {
    if (a.table_ || b.table_) throw ContractError("sum of sampled symbols is not supported");
    std::vector<SymbolTerm> t = a.terms_;
    t.insert(t.end(), b.terms_.begin(), b.terms_.end());
    return SymbolObject(std::move(t), std::max(a.order_, b.order_), false);
  }

  // a(-x, -xi) = a(x, xi). Checked term by term first, then on the lattice.
  bool even_in_x_xi() const {
    std::call_once(tags_->even_once, [&] {
      bool termwise = !table_;
      for (const auto& t : terms_) {
        if (!termwise) break;
        PeriodicField r = double(t.g.parity()) * t.f.reflect();
        termwise = relative_difference(r, t.f) <= kSymmetryTol;
      }
      tags_->even = termwise || lattice_defect([](cplx v) { return v; }, 1.0) <= kSymmetryTol;
    });
    return tags_->even;
  }

  // Whether conj(a(x, -xi)) equals a or -a.
  RealityTag reality_tag() const {
    std::call_once(tags_->real_once, [&] {
      auto conj = [](cplx v) { return std::conj(v); };
      for (double sign : {1.0, -1.0}) {
        bool termwise = !table_;
        for (const auto& t : terms_) {
          if (!termwise) break;
          PeriodicField lhs = (std::conj(t.g.coef()) * double(t.g.parity())) * t.f.conj();
          PeriodicField rhs = (sign * t.g.coef()) * t.f;
          termwise = relative_difference(lhs, rhs) <= kSymmetryTol;
        }
        if (termwise || lattice_defect(conj, sign) <= kSymmetryTol) {
          tags_->real = sign > 0 ? RealityTag::self_conjugate : RealityTag::anti_self_conjugate;
          return;
        }
      }
      tags_->real = RealityTag::none;
    });
    return tags_->real;
  }

 private:
  SymbolObject(const SpectralGrid& grid, double order) : grid_(grid), order_(order) {}

  static std::vector<cplx> unit_coeffs(const SpectralGrid& grid) {
    std::vector<cplx> c(grid.M());
    c[0] = 1.0;
    return c;
  }

  static double finite_order(double m) { return std::isfinite(m) ? m : 0.0; }

  struct TagCache {
    std::once_flag even_once, real_once;
    bool even = false;
    RealityTag real = RealityTag::none;
  };

  // max over lattice of |a^(j, xi) - sign * op(a^(-j, -xi))| relative to max |a^|.
  template <class Op>
  double lattice_defect(Op op, double sign) const {
    const int M = grid_.M();
    double num = 0.0, den = 0.0;
    for (int h = -M; h <= M; ++h) {
      double xi = 0.5 * h;
      for (int j = -M / 2 + 1; j < M / 2; ++j) {
        cplx a = hat(j, xi), b = hat(-j, -xi);
        den = std::max(den, std::abs(a));
        num = std::max(num, std::abs(a - sign * op(b)));
      }
    }
    return den == 0.0 ? 0.0 : num / den;
  }

  // Growth of |g| beyond <xi>^order on the grid range, with a factor-10 slack
  // relative to the low-frequency size.
  void validate_order() const {
    const int M = grid_.M();
    for (const auto& t : terms_) {
      double low = 0.0, worst = 0.0;
      for (int h = -M; h <= M; ++h) {
        double xi = 0.5 * h;
        double r = std::abs(t.g(xi)) / std::pow(1.0 + xi * xi, 0.5 * order_);
        if (std::abs(xi) <= 2.0) low = std::max(low, r);
        worst = std::max(worst, r);
      }
      if (worst > 10.0 * std::max(low, 1e-300) && worst > 1e-300)
        throw ContractError("symbol term grows faster than the declared order " + std::to_string(order_));
    }
  }

  SpectralGrid grid_;
  std::vector<SymbolTerm> terms_;
  double order_ = 0.0;
  std::shared_ptr<const std::vector<std::vector<cplx>>> table_;
  std::shared_ptr<TagCache> tags_ = std::make_shared<TagCache>();
};

namespace detail {

// Values g(h/2) for h in [-2M, 2M], the range reached by Weyl midpoints
// shifted by half an x-frequency.
inline std::vector<cplx> half_lattice_values(const XiFunction& g, int M) {
  std::vector<cplx> v(4 * M + 1);
  for (int h = -2 * M; h <= 2 * M; ++h) v[h + 2 * M] = g(0.5 * h);
  return v;
}

enum class Quantization { weyl, bony_weyl, standard };

inline FieldFlags output_flags(const SymbolObject& a, const PeriodicField& u) {
  FieldFlags f;
  f.is_even = u.flags().is_even && a.even_in_x_xi();
  f.is_real = u.flags().is_real && a.reality_tag() == RealityTag::self_conjugate;
  f.mean = MeanConvention::free;
  return f;
}

inline PeriodicField quantize(const SymbolObject& a, const PeriodicField& u, Quantization q, const CutoffProfile& cutoff) {
  if (a.grid() != u.grid()) throw ContractError("grid mismatch between symbol coefficients and field");
  const auto& grid = u.grid();
  const int M = grid.M();
  const int lo = -M / 2 + 1, hi = M / 2 - 1;
  std::vector<cplx> out(M);

  std::vector<std::vector<cplx>> gvals;
  if (!a.is_sampled())
    for (const auto& t : a.terms()) gvals.push_back(half_lattice_values(t.g, M));

  for (int k = lo; k <= hi; ++k) {
    cplx acc{};
    for (int n = lo; n <= hi; ++n) {
      cplx un = u.coeff(n);
      if (un == 0.0) continue;
      int j = k - n;
      if (!grid.contains(j)) continue;
      // twice the xi argument before any term shift
      int h2 = q == Quantization::standard ? 2 * n : k + n;
      double chi = 1.0;
      if (q == Quantization::bony_weyl) {
        chi = cutoff(double(j), 0.5 * h2);
        if (chi == 0.0) continue;
      }
      cplx sym{};
      if (a.is_sampled()) {
        if (q == Quantization::standard) throw ContractError("standard quantization of a sampled symbol is not supported");
        sym = a.hat(j, 0.5 * h2);
      } else {
        const auto& terms = a.terms();
        for (size_t s = 0; s < terms.size(); ++s) {
          cplx fj = terms[s].f.coeff(j);
          if (fj == 0.0) continue;
          double hs = h2 + 2.0 * terms[s].shift * j;
          int hi2 = static_cast<int>(std::lround(hs));
          if (std::abs(hs - hi2) < 1e-12 && std::abs(hi2) <= 2 * M)
            sym += fj * gvals[s][hi2 + 2 * M];
          else
            sym += fj * terms[s].g(0.5 * hs);
        }
      }
      acc += chi * sym * un;
    }
    out[grid.index(k)] = acc;
  }
  return resymmetrize(PeriodicField(grid, std::move(out), output_flags(a, u)));
}

}  // namespace detail

// Bony-Weyl quantization with the paraproduct cutoff.
inline PeriodicField op_bw_apply(const SymbolObject& a, const PeriodicField& u, const CutoffProfile& cutoff = {}) {
  return detail::quantize(a, u, detail::Quantization::bony_weyl, cutoff);
}

// Weyl quantization without cutoff.
inline PeriodicField op_weyl_apply(const SymbolObject& a, const PeriodicField& u) {
  return detail::quantize(a, u, detail::Quantization::weyl, {});
}

// Standard (Kohn-Nirenberg) quantization: out_k = sum_n a^(k-n, n) u_n.
inline PeriodicField op_standard_apply(const SymbolObject& a, const PeriodicField& u) {
  return detail::quantize(a, u, detail::Quantization::standard, {});
}

// b^(j, xi) = a^(j, xi - j/2).
inline SymbolObject weyl_from_standard(const SymbolObject& a) {
  if (a.is_sampled()) throw ContractError("weyl_from_standard needs a separable symbol");
  std::vector<SymbolTerm> out = a.terms();
  for (auto& t : out) t.shift -= 0.5;
  return SymbolObject(std::move(out), a.order(), false);
}

// Truncated asymptotic expansion of the Weyl composition:
// sum_{l < rho} (1/l!) ((i/2)(d_x d_eta - d_xi d_y))^l [a(x,xi) b(y,eta)] on the diagonal.
inline SymbolObject compose_symbols(const SymbolObject& a, const SymbolObject& b, int rho) {
  if (rho < 0 || rho > 4) throw ContractError("compose_symbols: rho must lie in [0, 4]");
  if (a.is_sampled() || b.is_sampled() || a.has_shift() || b.has_shift())
    throw ContractError("compose_symbols needs unshifted separable symbols");
  if (a.grid() != b.grid()) throw ContractError("compose_symbols: grid mismatch");
  for (const auto* s : {&a, &b})
    for (const auto& t : s->terms())
      if (t.g.max_group_derivative() + rho > kXiJetOrder)
        throw ContractError("compose_symbols: rho exceeds the available derivative order");
  std::vector<SymbolTerm> out;
  double fact = 1.0;
  for (int l = 0; l < rho; ++l) {
    if (l > 0) fact *= l;
    cplx pref = std::pow(cplx(0.0, 0.5), l) / fact;
    for (int r = 0; r <= l; ++r) {
      double binom = 1.0;
      for (int q = 1; q <= r; ++q) binom = binom * (l - q + 1) / q;
      cplx c = pref * binom * ((l - r) % 2 == 0 ? 1.0 : -1.0);
      // d_x^r d_xi^{l-r} a  times  d_y^{l-r} d_eta^r b
      for (const auto& ta : a.terms()) {
        PeriodicField fa = derivative(ta.f, r);
        auto ga = ta.g.derivative_terms(l - r);
        for (const auto& tb : b.terms()) {
          PeriodicField f = multiply(fa, derivative(tb.f, l - r));
          auto gb = tb.g.derivative_terms(r);
          for (const auto& x : ga)
            for (const auto& y : gb) out.push_back({f, (x * y).scaled(c), 0.0});
        }
      }
    }
  }
  if (out.empty()) return SymbolObject::constant(a.grid(), 0.0);
  return SymbolObject(std::move(out), a.order() + b.order(), false);
}

}  // namespace capgrav
