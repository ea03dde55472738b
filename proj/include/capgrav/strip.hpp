#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "capgrav/errors.hpp"
#include "capgrav/grid.hpp"

namespace capgrav {

enum class ZGridKind { chebyshev, uniform };

inline std::string to_string(ZGridKind k) { return k == ZGridKind::chebyshev ? "chebyshev" : "uniform"; }

inline ZGridKind zgrid_kind_from_string(const std::string& s) {
  if (s == "chebyshev") return ZGridKind::chebyshev;
  if (s == "uniform") return ZGridKind::uniform;
  throw ContractError("unknown z-grid kind '" + s + "'");
}

// Finite-difference weights (Fornberg) for derivatives 0..m at x0 from the
// given nodes. Result[k][j] multiplies f(nodes[j]) for the k-th derivative.
inline std::vector<std::vector<double>> fornberg_weights(double x0, const std::vector<double>& nodes, int m) {
  const int n = static_cast<int>(nodes.size());
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0, c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    int mn = std::min(i, m);
    double c2 = 1.0, c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j < i; ++j) {
      double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

// Gauss-Legendre nodes and weights on [a, b].
inline void gauss_legendre(int q, double a, double b, std::vector<double>& t, std::vector<double>& w) {
  t.assign(q, 0.0);
  w.assign(q, 0.0);
  for (int i = 0; i < (q + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (q + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= q; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= q; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (x * p1 - p0) / (x * x - 1.0);
    }
    double wi = 2.0 / ((1.0 - x * x) * dp * dp);
    t[i] = -x;
    t[q - 1 - i] = x;
    w[i] = w[q - 1 - i] = wi;
  }
  for (int i = 0; i < q; ++i) {
    t[i] = a + 0.5 * (b - a) * (t[i] + 1.0);
    w[i] *= 0.5 * (b - a);
  }
}

// Vertical grid z_0 = -1 < ... < z_J = 0 with differentiation matrices and
// interpolation weights.
class ZGrid {
 public:
  ZGrid(int J, ZGridKind kind) : J_(J), kind_(kind) {
    if (J < 16) throw ContractError("z-grid needs J >= 16, got " + std::to_string(J));
    if (kind == ZGridKind::uniform && J % 2 != 0) throw ContractError("uniform z-grid needs even J for Simpson weights");
    z_.resize(J + 1);
    for (int i = 0; i <= J; ++i)
      z_[i] = kind == ZGridKind::chebyshev ? 0.5 * (-std::cos(kPi * i / J) - 1.0) : -1.0 + double(i) / J;
    z_[0] = -1.0;
    z_[J] = 0.0;
    if (kind == ZGridKind::chebyshev) {
      bary_.resize(J + 1);
      for (int i = 0; i <= J; ++i) bary_[i] = (i % 2 ? -1.0 : 1.0) * ((i == 0 || i == J) ? 0.5 : 1.0);
      D_ = Eigen::MatrixXd::Zero(J + 1, J + 1);
      for (int i = 0; i <= J; ++i) {
        double s = 0.0;
        for (int j = 0; j <= J; ++j) {
          if (i == j) continue;
          D_(i, j) = (bary_[j] / bary_[i]) / (z_[i] - z_[j]);
          s += D_(i, j);
        }
        D_(i, i) = -s;
      }
      D2_ = D_ * D_;
    } else {
      D_ = Eigen::MatrixXd::Zero(J + 1, J + 1);
      D2_ = Eigen::MatrixXd::Zero(J + 1, J + 1);
      for (int i = 0; i <= J; ++i) {
        auto [lo, nodes] = stencil(z_[i], 7);
        auto w = fornberg_weights(z_[i], nodes, 2);
        for (size_t k = 0; k < nodes.size(); ++k) {
          D_(i, lo + k) = w[1][k];
          D2_(i, lo + k) = w[2][k];
        }
      }
    }
  }

  int J() const { return J_; }
  ZGridKind kind() const { return kind_; }
  const std::vector<double>& z() const { return z_; }
  double z(int i) const { return z_[i]; }
  const Eigen::MatrixXd& D() const { return D_; }
  const Eigen::MatrixXd& D2() const { return D2_; }

  // Weights w_j with p(t) = sum_j w_j f(z_j): barycentric for Chebyshev,
  // local 8-point interpolation for the uniform grid.
  std::vector<double> interpolation_weights(double t) const {
    std::vector<double> w(J_ + 1, 0.0);
    if (kind_ == ZGridKind::chebyshev) {
      double s = 0.0;
      for (int j = 0; j <= J_; ++j) {
        double d = t - z_[j];
        if (d == 0.0) {
          std::fill(w.begin(), w.end(), 0.0);
          w[j] = 1.0;
          return w;
        }
        w[j] = bary_[j] / d;
        s += w[j];
      }
      for (auto& v : w) v /= s;
    } else {
      auto [lo, nodes] = stencil(t, 8);
      auto f = fornberg_weights(t, nodes, 0);
      for (size_t k = 0; k < nodes.size(); ++k) w[lo + k] = f[0][k];
    }
    return w;
  }

  // Composite Simpson weights on nodes i0..i1 of the uniform grid; an odd
  // number of intervals takes a 3/8 panel. A single interval borrows the
  // neighbouring nodes, so the integrand must extend smoothly past it.
  std::vector<double> simpson_weights(int i0, int i1) const {
    std::vector<double> w(J_ + 1, 0.0);
    const double h = 1.0 / J_;
    int n = i1 - i0;
    if (n <= 0) return w;
    if (n == 1) {
      // cubic through four nodes, integrated over the end interval only
      const double c[4] = {9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0};
      for (int k = 0; k < 4; ++k) {
        if (i0 == 0)
          w[i0 + k] += c[k] * h;
        else
          w[i1 - k] += c[k] * h;
      }
      return w;
    }
    int start = i0;
    if (n % 2 == 1) {
      w[i0] += 3.0 * h / 8.0;
      w[i0 + 1] += 9.0 * h / 8.0;
      w[i0 + 2] += 9.0 * h / 8.0;
      w[i0 + 3] += 3.0 * h / 8.0;
      start = i0 + 3;
    }
    for (int i = start; i < i1; i += 2) {
      w[i] += h / 3.0;
      w[i + 1] += 4.0 * h / 3.0;
      w[i + 2] += h / 3.0;
    }
    return w;
  }

 private:
  std::pair<int, std::vector<double>> stencil(double t, int width) const {
    int c = static_cast<int>(std::lround((t + 1.0) * J_));
    int lo = std::clamp(c - width / 2, 0, J_ + 1 - width);
    return {lo, std::vector<double>(z_.begin() + lo, z_.begin() + lo + width)};
  }

  int J_;
  ZGridKind kind_;
  std::vector<double> z_, bary_;
  Eigen::MatrixXd D_, D2_;
};

inline std::shared_ptr<const ZGrid> make_zgrid(int J, ZGridKind kind) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const ZGrid>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(J, static_cast<int>(kind));
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto g = std::make_shared<const ZGrid>(J, kind);
  cache.emplace(key, g);
  return g;
}

using CoeffMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A function on [-1,0] x T^1: row i holds the Fourier coefficients at z_i.
class StripField {
 public:
  StripField(std::shared_ptr<const ZGrid> zgrid, SpectralGrid grid, CoeffMatrix coeffs, FieldFlags flags = {})
      : zgrid_(std::move(zgrid)), grid_(grid), c_(std::move(coeffs)), flags_(flags) {
    if (c_.rows() != zgrid_->J() + 1 || c_.cols() != grid_.M())
      throw ContractError("StripField: coefficient matrix shape does not match grids");
  }

  static StripField zero(std::shared_ptr<const ZGrid> zgrid, const SpectralGrid& grid, FieldFlags flags = {}) {
    CoeffMatrix c = CoeffMatrix::Zero(zgrid->J() + 1, grid.M());
    return StripField(std::move(zgrid), grid, std::move(c), flags);
  }

  const ZGrid& zgrid() const { return *zgrid_; }
  const std::shared_ptr<const ZGrid>& zgrid_ptr() const { return zgrid_; }
  const SpectralGrid& grid() const { return grid_; }
  const CoeffMatrix& coeffs() const { return c_; }
  CoeffMatrix& coeffs() { return c_; }
  const FieldFlags& flags() const { return flags_; }
  int J() const { return zgrid_->J(); }

  PeriodicField at(int i) const {
    std::vector<cplx> row(c_.row(i).data(), c_.row(i).data() + grid_.M());
    return PeriodicField(grid_, std::move(row), flags_);
  }

  // d/dz of the strip function, returned at every node.
  StripField dz(int order = 1) const {
    const Eigen::MatrixXd& D = order == 1 ? zgrid_->D() : zgrid_->D2();
    CoeffMatrix out = D.cast<cplx>() * c_;
    return StripField(zgrid_, grid_, std::move(out), flags_);
  }

 private:
  std::shared_ptr<const ZGrid> zgrid_;
  SpectralGrid grid_;
  CoeffMatrix c_;
  FieldFlags flags_;
};

}  // namespace capgrav
