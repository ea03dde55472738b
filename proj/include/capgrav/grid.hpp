#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "capgrav/errors.hpp"
#include "capgrav/fft.hpp"

namespace capgrav {

using cplx = std::complex<double>;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSymmetryTol = 1e-12;

enum class MeanConvention { zero_mean, mod_constants, free };

inline std::string to_string(MeanConvention m) {
  switch (m) {
    case MeanConvention::zero_mean: return "zero_mean";
    case MeanConvention::mod_constants: return "mod_constants";
    default: return "free";
  }
}

inline MeanConvention mean_convention_from_string(const std::string& s) {
  if (s == "zero_mean") return MeanConvention::zero_mean;
  if (s == "mod_constants") return MeanConvention::mod_constants;
  if (s == "free") return MeanConvention::free;
  throw ContractError("unknown mean convention '" + s + "'");
}

struct FieldFlags {
  bool is_real = false;
  bool is_even = false;
  MeanConvention mean = MeanConvention::free;
};

inline FieldFlags real_even(MeanConvention m = MeanConvention::free) { return {true, true, m}; }

// Equispaced periodic grid x_j = 2 pi j / M on [0, 2 pi).
class SpectralGrid {
 public:
  explicit SpectralGrid(int M) : M_(M) {
    if (M < 8 || M % 2 != 0) throw ContractError("grid size M must be even and >= 8, got " + std::to_string(M));
  }

  int M() const { return M_; }
  int nmax() const { return M_ / 2; }
  double x(int j) const { return 2.0 * kPi * j / M_; }
  bool contains(int n) const { return n > -M_ / 2 && n <= M_ / 2; }
  // FFT storage slot of mode n.
  int index(int n) const { return n >= 0 ? n : n + M_; }
  int mode(int i) const { return i <= M_ / 2 ? i : i - M_; }

  std::vector<double> points() const {
    std::vector<double> xs(M_);
    for (int j = 0; j < M_; ++j) xs[j] = x(j);
    return xs;
  }

  bool operator==(const SpectralGrid& o) const { return M_ == o.M_; }
  bool operator!=(const SpectralGrid& o) const { return M_ != o.M_; }

 private:
  int M_;
};

// Size of the zero-padded grid used for dealiased products (3/2 rule).
inline int padded_size(int M) {
  int L = (3 * M + 1) / 2;
  return L + (L % 2);
}

// A band-limited 2 pi periodic function u(x) = sum_n c_n e^{inx}. The
// coefficients are stored in FFT order; mode M/2 (Nyquist) is kept for
// fields built from data and zeroed by every derived operation.
class PeriodicField {
 public:
  PeriodicField(const SpectralGrid& grid, std::vector<cplx> coeffs, FieldFlags flags = {})
      : grid_(grid), c_(std::move(coeffs)), flags_(flags) {
    if (static_cast<int>(c_.size()) != grid_.M())
      throw ContractError("coefficient array length does not match grid size");
  }

  static PeriodicField zero(const SpectralGrid& grid, FieldFlags flags = {true, true, MeanConvention::free}) {
    return PeriodicField(grid, std::vector<cplx>(grid.M()), flags);
  }

  const SpectralGrid& grid() const { return grid_; }
  int M() const { return grid_.M(); }
  const FieldFlags& flags() const { return flags_; }
  const std::vector<cplx>& coeffs() const { return c_; }

  cplx coeff(int n) const { return grid_.contains(n) ? c_[grid_.index(n)] : cplx{}; }
  cplx mean() const { return c_[0]; }

  std::vector<cplx> samples() const { return samples_on(M()); }

  std::vector<double> real_samples() const {
    auto s = samples();
    std::vector<double> r(s.size());
    for (size_t j = 0; j < s.size(); ++j) r[j] = s[j].real();
    return r;
  }

  // Values on an L-point grid (L >= M), i.e. trigonometric interpolation.
  std::vector<cplx> samples_on(int L) const {
    std::vector<cplx> buf(L);
    const int M = this->M();
    for (int i = 0; i < M; ++i) {
      int n = grid_.mode(i);
      buf[n >= 0 ? n : n + L] += c_[i];
    }
    return fft::backward(buf);
  }

  PeriodicField with_flags(FieldFlags f) const { return PeriodicField(grid_, c_, f); }

  PeriodicField with_coeffs(std::vector<cplx> c) const { return PeriodicField(grid_, std::move(c), flags_); }

  // Complex conjugate: coefficient n becomes conj(c_{-n}).
  PeriodicField conj() const {
    std::vector<cplx> r(M());
    for (int i = 0; i < M(); ++i) {
      int n = grid_.mode(i);
      r[i] = std::conj(coeff(n == M() / 2 ? n : -n));
    }
    return PeriodicField(grid_, std::move(r), flags_);
  }

  // x -> -x.
  PeriodicField reflect() const {
    std::vector<cplx> r(M());
    for (int i = 0; i < M(); ++i) {
      int n = grid_.mode(i);
      r[i] = coeff(n == M() / 2 ? n : -n);
    }
    return PeriodicField(grid_, std::move(r), flags_);
  }

  PeriodicField& operator+=(const PeriodicField& o) {
    require_same_grid(o);
    for (int i = 0; i < M(); ++i) c_[i] += o.c_[i];
    flags_ = combine(flags_, o.flags_);
    return *this;
  }
  PeriodicField& operator-=(const PeriodicField& o) {
    require_same_grid(o);
    for (int i = 0; i < M(); ++i) c_[i] -= o.c_[i];
    flags_ = combine(flags_, o.flags_);
    return *this;
  }
  PeriodicField& operator*=(cplx s) {
    for (auto& v : c_) v *= s;
    if (s.imag() != 0.0) flags_.is_real = false;
    return *this;
  }
  PeriodicField& operator*=(double s) {
    for (auto& v : c_) v *= s;
    return *this;
  }

  friend PeriodicField operator+(PeriodicField a, const PeriodicField& b) { return a += b; }
  friend PeriodicField operator-(PeriodicField a, const PeriodicField& b) { return a -= b; }
  friend PeriodicField operator-(PeriodicField a) { return a *= -1.0; }
  friend PeriodicField operator*(double s, PeriodicField a) { return a *= s; }
  friend PeriodicField operator*(cplx s, PeriodicField a) { return a *= s; }

  void require_same_grid(const PeriodicField& o) const {
    if (grid_ != o.grid_) throw ContractError("grid mismatch between fields");
  }

 private:
  static FieldFlags combine(FieldFlags a, FieldFlags b) {
    FieldFlags r;
    r.is_real = a.is_real && b.is_real;
    r.is_even = a.is_even && b.is_even;
    r.mean = a.mean == b.mean ? a.mean : MeanConvention::free;
    return r;
  }

  SpectralGrid grid_;
  std::vector<cplx> c_;
  FieldFlags flags_;
};

struct SymmetryReport {
  double real_defect = 0.0;  // max |c_{-n} - conj(c_n)| / max |c|
  double even_defect = 0.0;  // max |c_{-n} - c_n| / max |c|
  double mean = 0.0;         // |c_0|
  double max_magnitude = 0.0;
  bool is_real = true;
  bool is_even = true;
};

inline SymmetryReport check_symmetry(const PeriodicField& u) {
  SymmetryReport r;
  const auto& g = u.grid();
  for (const auto& v : u.coeffs()) r.max_magnitude = std::max(r.max_magnitude, std::abs(v));
  r.mean = std::abs(u.mean());
  if (r.max_magnitude == 0.0) return r;
  for (int n = 0; n <= g.nmax(); ++n) {
    cplx a = u.coeff(n);
    cplx b = n == g.nmax() ? a : u.coeff(-n);
    r.real_defect = std::max(r.real_defect, std::abs(b - std::conj(a)));
    r.even_defect = std::max(r.even_defect, std::abs(b - a));
  }
  r.real_defect /= r.max_magnitude;
  r.even_defect /= r.max_magnitude;
  r.is_real = r.real_defect <= kSymmetryTol;
  r.is_even = r.even_defect <= kSymmetryTol;
  return r;
}

// Average with the conjugated / reflected copy as the flags demand, and pin
// the mean for zero-mean fields.
inline PeriodicField resymmetrize(const PeriodicField& u) {
  const auto& g = u.grid();
  const int M = g.M();
  std::vector<cplx> c = u.coeffs();
  const FieldFlags f = u.flags();
  auto at = [&](int n) -> cplx& { return c[g.index(n)]; };
  if (f.is_even) {
    for (int n = 1; n < M / 2; ++n) {
      cplx avg = 0.5 * (at(n) + at(-n));
      at(n) = avg;
      at(-n) = avg;
    }
  }
  if (f.is_real) {
    for (int n = 1; n < M / 2; ++n) {
      cplx avg = 0.5 * (at(n) + std::conj(at(-n)));
      at(n) = avg;
      at(-n) = std::conj(avg);
    }
    at(0) = at(0).real();
    at(M / 2) = at(M / 2).real();
  }
  if (f.mean == MeanConvention::zero_mean) at(0) = 0.0;
  return PeriodicField(g, std::move(c), f);
}

namespace detail {

inline void validate_flags(const PeriodicField& u, const std::string& origin) {
  const auto rep = check_symmetry(u);
  const FieldFlags& f = u.flags();
  if (f.is_real && !rep.is_real)
    throw ContractError(origin + ": is_real requested but data is not real (defect " + std::to_string(rep.real_defect) + ")");
  if (f.is_even && !rep.is_even)
    throw ContractError(origin + ": is_even requested but data is not even (defect " + std::to_string(rep.even_defect) + ")");
  if (f.mean == MeanConvention::zero_mean && rep.mean > kSymmetryTol * std::max(1.0, rep.max_magnitude))
    throw ContractError(origin + ": zero_mean requested but mean is " + std::to_string(rep.mean));
}

// Coefficients of a padded grid, truncated back to |n| < M/2.
inline std::vector<cplx> truncate_from_padded(const std::vector<cplx>& values, int M) {
  const int L = static_cast<int>(values.size());
  auto F = fft::forward(values);
  std::vector<cplx> c(M);
  for (int n = -M / 2 + 1; n < M / 2; ++n) c[n >= 0 ? n : n + M] = F[n >= 0 ? n : n + L] / double(L);
  return c;
}

}  // namespace detail

inline PeriodicField make_field(const std::vector<cplx>& samples, const SpectralGrid& grid, FieldFlags flags) {
  if (static_cast<int>(samples.size()) != grid.M())
    throw ContractError("make_field: expected " + std::to_string(grid.M()) + " samples, got " + std::to_string(samples.size()));
  if (flags.is_real) {
    double scale = 0.0, imag = 0.0;
    for (const auto& v : samples) {
      scale = std::max(scale, std::abs(v));
      imag = std::max(imag, std::abs(v.imag()));
    }
    if (imag > kSymmetryTol * std::max(scale, 1e-300))
      throw ContractError("make_field: is_real requested but samples are complex (max |Im| = " + std::to_string(imag) + ")");
  }
  auto c = fft::forward(samples);
  for (auto& v : c) v /= double(grid.M());
  PeriodicField u(grid, std::move(c), flags);
  detail::validate_flags(u, "make_field");
  return resymmetrize(u);
}

inline PeriodicField make_field(const std::vector<double>& samples, const SpectralGrid& grid, FieldFlags flags) {
  std::vector<cplx> s(samples.begin(), samples.end());
  return make_field(s, grid, flags);
}

inline PeriodicField make_field_from_modes(const std::map<int, cplx>& modes, const SpectralGrid& grid, FieldFlags flags) {
  std::vector<cplx> c(grid.M());
  for (const auto& [n, v] : modes) {
    if (!grid.contains(n)) throw ContractError("make_field_from_modes: mode " + std::to_string(n) + " outside grid range");
    c[grid.index(n)] = v;
  }
  PeriodicField u(grid, std::move(c), flags);
  detail::validate_flags(u, "make_field_from_modes");
  return resymmetrize(u);
}

template <class F>
PeriodicField make_field_from_function(const SpectralGrid& grid, F&& f, FieldFlags flags) {
  std::vector<cplx> s(grid.M());
  for (int j = 0; j < grid.M(); ++j) s[j] = f(grid.x(j));
  return make_field(s, grid, flags);
}

// Real cosine/sine shorthands used throughout the tests and tools.
inline PeriodicField cos_mode(const SpectralGrid& grid, int n, double amp = 1.0) {
  if (n == 0) return make_field_from_modes({{0, amp}}, grid, real_even());
  return make_field_from_modes({{n, amp / 2}, {-n, amp / 2}}, grid, real_even(MeanConvention::zero_mean));
}

inline PeriodicField sin_mode(const SpectralGrid& grid, int n, double amp = 1.0) {
  return make_field_from_modes({{n, cplx(0, -amp / 2)}, {-n, cplx(0, amp / 2)}}, grid,
                               {true, false, MeanConvention::zero_mean});
}

struct ModePair {
  int n = 0;
  cplx plus_part;
  cplx minus_part;
};

// Pi_n u: the component of u on modes +n and -n.
inline PeriodicField project_mode(const PeriodicField& u, int n) {
  const auto& g = u.grid();
  if (n < 1 || n > g.nmax()) throw ContractError("project_mode: n = " + std::to_string(n) + " outside [1, M/2]");
  std::vector<cplx> c(g.M());
  c[g.index(n)] = u.coeff(n);
  if (n != g.nmax()) c[g.index(-n)] = u.coeff(-n);
  FieldFlags f = u.flags();
  if (f.mean == MeanConvention::free) f.mean = MeanConvention::zero_mean;
  return PeriodicField(g, std::move(c), f);
}

// Amplitudes of u and conj(u) against phi_n = cos(nx)/sqrt(pi).
inline ModePair project_mode_pair(const PeriodicField& u, int n) {
  const auto& g = u.grid();
  if (n < 1 || n > g.nmax()) throw ContractError("project_mode: n = " + std::to_string(n) + " outside [1, M/2]");
  cplx cm = n == g.nmax() ? cplx{} : u.coeff(-n);
  cplx plus = std::sqrt(kPi) * (u.coeff(n) + cm);
  return {n, plus, std::conj(plus)};
}

inline double sobolev_norm(const PeriodicField& u, double s) {
  if (u.flags().mean == MeanConvention::free && std::abs(u.mean()) > kSymmetryTol)
    throw ContractError("sobolev_norm: free mean convention with nonzero mean");
  const auto& g = u.grid();
  double acc = 0.0;
  for (int n = 1; n <= g.nmax(); ++n) {
    double e = std::norm(u.coeff(n)) + (n == g.nmax() ? 0.0 : std::norm(u.coeff(-n)));
    acc += std::pow(double(n), 2.0 * s) * 2.0 * kPi * e;
  }
  return std::sqrt(acc);
}

inline double l2_norm(const PeriodicField& u) {
  double acc = 0.0;
  for (const auto& v : u.coeffs()) acc += std::norm(v);
  return std::sqrt(2.0 * kPi * acc);
}

inline double linf_norm(const PeriodicField& u) {
  double m = 0.0;
  for (const auto& v : u.samples()) m = std::max(m, std::abs(v));
  return m;
}

// Hermitian L2 inner product  int u conj(v) dx.
inline cplx inner_product(const PeriodicField& u, const PeriodicField& v) {
  u.require_same_grid(v);
  cplx acc{};
  for (int i = 0; i < u.M(); ++i) acc += u.coeffs()[i] * std::conj(v.coeffs()[i]);
  return 2.0 * kPi * acc;
}

// Bilinear pairing  int u v dx.
inline cplx integral_product(const PeriodicField& u, const PeriodicField& v) {
  u.require_same_grid(v);
  cplx acc{};
  const auto& g = u.grid();
  for (int n = -g.nmax() + 1; n < g.nmax(); ++n) acc += u.coeff(n) * v.coeff(-n);
  return 2.0 * kPi * acc;
}

// coeff_out(n) = g(n) coeff_in(n). Mode M/2 is dropped.
template <class G>
PeriodicField apply_multiplier(const PeriodicField& u, G&& g) {
  const auto& grid = u.grid();
  std::vector<cplx> c(u.M());
  bool even_g = true, real_g = true;
  for (int n = -grid.nmax() + 1; n < grid.nmax(); ++n) {
    cplx gn = g(double(n));
    cplx gm = g(double(-n));
    if (std::abs(gn - gm) > kSymmetryTol * std::max(1.0, std::abs(gn))) even_g = false;
    if (std::abs(gn.imag()) > kSymmetryTol * std::max(1.0, std::abs(gn))) real_g = false;
    c[grid.index(n)] = gn * u.coeff(n);
  }
  FieldFlags f = u.flags();
  f.is_even = f.is_even && even_g;
  f.is_real = f.is_real && real_g && even_g;
  if (std::abs(cplx(g(0.0))) != 0.0 && f.mean == MeanConvention::zero_mean && u.mean() != 0.0) f.mean = MeanConvention::free;
  return resymmetrize(PeriodicField(grid, std::move(c), f));
}

// k-th derivative, (in)^k on mode n.
inline PeriodicField derivative(const PeriodicField& u, int k = 1) {
  const auto& grid = u.grid();
  std::vector<cplx> c(u.M());
  for (int n = -grid.nmax() + 1; n < grid.nmax(); ++n) c[grid.index(n)] = std::pow(cplx(0, n), k) * u.coeff(n);
  FieldFlags f = u.flags();
  if (k % 2 == 1) f.is_even = false;
  if (k > 0) f.mean = MeanConvention::zero_mean;
  return PeriodicField(grid, std::move(c), f);
}

// Dealiased product on the padded grid, truncated to |n| < M/2.
inline PeriodicField multiply(const PeriodicField& u, const PeriodicField& v) {
  u.require_same_grid(v);
  const int L = padded_size(u.M());
  auto a = u.samples_on(L);
  auto b = v.samples_on(L);
  for (int j = 0; j < L; ++j) a[j] *= b[j];
  FieldFlags f{u.flags().is_real && v.flags().is_real, u.flags().is_even && v.flags().is_even, MeanConvention::free};
  return resymmetrize(PeriodicField(u.grid(), detail::truncate_from_padded(a, u.M()), f));
}

inline PeriodicField multiply(const PeriodicField& u, const PeriodicField& v, const PeriodicField& w) {
  return multiply(multiply(u, v), w);
}

// A nonlinear pointwise map u -> f(u) evaluated on the padded grid.
// `preserves_real` says whether f maps real values to real values.
template <class F>
PeriodicField apply_pointwise(const PeriodicField& u, F&& f, bool preserves_real = true) {
  const int L = padded_size(u.M());
  auto a = u.samples_on(L);
  for (auto& v : a) v = f(v);
  FieldFlags fl{u.flags().is_real && preserves_real, u.flags().is_even, MeanConvention::free};
  return resymmetrize(PeriodicField(u.grid(), detail::truncate_from_padded(a, u.M()), fl));
}

// Zero-mean primitive of a zero-mean field.
inline PeriodicField antiderivative(const PeriodicField& u) {
  const auto& grid = u.grid();
  std::vector<cplx> c(u.M());
  for (int n = -grid.nmax() + 1; n < grid.nmax(); ++n)
    if (n != 0) c[grid.index(n)] = u.coeff(n) / cplx(0, n);
  FieldFlags f = u.flags();
  f.is_even = false;
  f.mean = MeanConvention::zero_mean;
  return PeriodicField(grid, std::move(c), f);
}

// Relative coefficient distance, ignoring mode 0 when either field is taken
// modulo constants.
inline double relative_difference(const PeriodicField& a, const PeriodicField& b) {
  a.require_same_grid(b);
  bool skip0 = a.flags().mean == MeanConvention::mod_constants || b.flags().mean == MeanConvention::mod_constants;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < a.M(); ++i) {
    if (i == 0 && skip0) continue;
    num += std::norm(a.coeffs()[i] - b.coeffs()[i]);
    den += std::norm(b.coeffs()[i]);
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

// Change of grid by zero padding or truncation in Fourier space.
inline PeriodicField resample(const PeriodicField& u, const SpectralGrid& target) {
  std::vector<cplx> c(target.M());
  int nm = std::min(u.grid().nmax(), target.nmax());
  for (int n = -nm + 1; n < nm; ++n) c[target.index(n)] = u.coeff(n);
  return PeriodicField(target, std::move(c), u.flags());
}

}  // namespace capgrav
