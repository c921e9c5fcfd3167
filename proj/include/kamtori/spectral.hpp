#pragma once

// Band-limited Fourier calculus on the 2-torus.
//
// Grid node (i, j) sits at phi = (2 pi i / n1, 2 pi j / n2) and is stored
// column-major, p = i + n1 * j. Coefficients are normalized so that
// f(phi) = sum_k c_k exp(i k.phi), c_0 = mean.
// Retained band: |k_i| < n_i / 2. Nyquist content is dropped by every
// spectral operation (derivatives, solves, off-grid evaluation).

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "kamtori/errors.hpp"

namespace kamtori {

using Grid = Eigen::ArrayXXd;
using Spectrum = Eigen::ArrayXXcd;
using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct GridSize {
  int n1 = 0;
  int n2 = 0;
  int size() const { return n1 * n2; }
  bool operator==(const GridSize&) const = default;
  GridSize doubled() const { return {2 * n1, 2 * n2}; }
};

inline void check_grid(GridSize g) {
  if (g.n1 <= 0 || g.n2 <= 0 || g.n1 % 2 || g.n2 % 2)
    throw std::invalid_argument("grid sizes must be positive and even");
}

inline std::string to_string(GridSize g) {
  return std::to_string(g.n1) + "x" + std::to_string(g.n2);
}

// FFT index -> signed wavenumber (Nyquist maps to +n/2)
inline int wavenumber(int idx, int n) { return idx <= n / 2 ? idx : idx - n; }
inline bool is_nyquist(int idx, int n) { return 2 * idx == n; }
inline int fft_index(int k, int n) { return k >= 0 ? k : k + n; }

inline double node_angle(int idx, int n) { return two_pi * idx / n; }

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> f = [] {
    Eigen::FFT<double> e;
    e.SetFlag(Eigen::FFT<double>::Unscaled);
    return e;
  }();
  return f;
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline Spectrum analyze(const Grid& v) {
  auto& fft = detail::fft_engine();
  const Eigen::Index n1 = v.rows(), n2 = v.cols();
  Spectrum tmp(n1, n2);
  Eigen::VectorXcd in, out;
  for (Eigen::Index j = 0; j < n2; ++j) {
    in = v.col(j).matrix().cast<cplx>();
    fft.fwd(out, in);
    tmp.col(j) = out.array();
  }
  for (Eigen::Index i = 0; i < n1; ++i) {
    in = tmp.row(i).transpose().matrix();
    fft.fwd(out, in);
    tmp.row(i) = out.array().transpose();
  }
  return tmp / double(n1 * n2);
}

// Real part of the synthesis; exact for Hermitian input.
inline Grid synthesize(const Spectrum& c) {
  auto& fft = detail::fft_engine();
  const Eigen::Index n1 = c.rows(), n2 = c.cols();
  Spectrum tmp = c;
  Eigen::VectorXcd in, out;
  for (Eigen::Index i = 0; i < n1; ++i) {
    in = tmp.row(i).transpose().matrix();
    fft.inv(out, in);
    tmp.row(i) = out.array().transpose();
  }
  Grid v(n1, n2);
  for (Eigen::Index j = 0; j < n2; ++j) {
    in = tmp.col(j).matrix();
    fft.inv(out, in);
    v.col(j) = out.array().real();
  }
  return v;
}

class TorusScalar {
 public:
  TorusScalar() = default;
  explicit TorusScalar(GridSize g, double value = 0.0) {
    check_grid(g);
    v_ = Grid::Constant(g.n1, g.n2, value);
  }
  explicit TorusScalar(Grid values) : v_(std::move(values)) {
    check_grid(grid());
  }

  static TorusScalar from_coeffs(const Spectrum& c) { return TorusScalar(synthesize(c)); }

  template <class F>
  static TorusScalar sample(GridSize g, F&& f) {
    TorusScalar s(g);
    for (int j = 0; j < g.n2; ++j)
      for (int i = 0; i < g.n1; ++i) s.v_(i, j) = f(node_angle(i, g.n1), node_angle(j, g.n2));
    return s;
  }

  GridSize grid() const { return {int(v_.rows()), int(v_.cols())}; }
  int size() const { return int(v_.size()); }
  bool empty() const { return v_.size() == 0; }

  const Grid& values() const { return v_; }
  Grid& values() { return v_; }
  double operator[](int p) const { return v_.data()[p]; }
  double& operator[](int p) { return v_.data()[p]; }
  double operator()(int i, int j) const { return v_(i, j); }

  Spectrum coeffs() const { return analyze(v_); }
  double mean() const { return v_.mean(); }
  double max_abs() const { return v_.abs().maxCoeff(); }
  double min() const { return v_.minCoeff(); }
  double max() const { return v_.maxCoeff(); }

  TorusScalar& operator+=(const TorusScalar& o) { v_ += o.v_; return *this; }
  TorusScalar& operator-=(const TorusScalar& o) { v_ -= o.v_; return *this; }
  TorusScalar& operator*=(const TorusScalar& o) { v_ *= o.v_; return *this; }
  TorusScalar& operator/=(const TorusScalar& o) { v_ /= o.v_; return *this; }
  TorusScalar& operator+=(double a) { v_ += a; return *this; }
  TorusScalar& operator-=(double a) { v_ -= a; return *this; }
  TorusScalar& operator*=(double a) { v_ *= a; return *this; }
  TorusScalar& operator/=(double a) { v_ /= a; return *this; }

  friend TorusScalar operator+(TorusScalar a, const TorusScalar& b) { return a += b; }
  friend TorusScalar operator-(TorusScalar a, const TorusScalar& b) { return a -= b; }
  friend TorusScalar operator*(TorusScalar a, const TorusScalar& b) { return a *= b; }
  friend TorusScalar operator/(TorusScalar a, const TorusScalar& b) { return a /= b; }
  friend TorusScalar operator+(TorusScalar a, double b) { return a += b; }
  friend TorusScalar operator-(TorusScalar a, double b) { return a -= b; }
  friend TorusScalar operator*(TorusScalar a, double b) { return a *= b; }
  friend TorusScalar operator/(TorusScalar a, double b) { return a /= b; }
  friend TorusScalar operator+(double b, TorusScalar a) { return a += b; }
  friend TorusScalar operator*(double b, TorusScalar a) { return a *= b; }
  friend TorusScalar operator-(double b, const TorusScalar& a) { return TorusScalar(b - a.v_); }
  friend TorusScalar operator-(const TorusScalar& a) { return TorusScalar(Grid(-a.v_)); }

 private:
  Grid v_;
};

// Fixed-size vector/matrix valued functions, one TorusScalar per entry.
template <int R, int C = 1>
class TorusTensor {
 public:
  using Node = Eigen::Matrix<double, R, C>;
  static constexpr int rows = R, cols = C, count = R * C;

  TorusTensor() = default;
  explicit TorusTensor(GridSize g) { c_.fill(TorusScalar(g)); }

  template <class F>
  static TorusTensor generate(GridSize g, F&& f) {
    TorusTensor t(g);
    for (int p = 0; p < g.size(); ++p) t.set_node(p, f(p));
    return t;
  }

  GridSize grid() const { return c_[0].grid(); }
  TorusScalar& operator()(int r, int c = 0) { return c_[r + R * c]; }
  const TorusScalar& operator()(int r, int c = 0) const { return c_[r + R * c]; }
  TorusScalar& operator[](int i) { return c_[i]; }
  const TorusScalar& operator[](int i) const { return c_[i]; }

  Node node(int p) const {
    Node m;
    for (int c = 0; c < C; ++c)
      for (int r = 0; r < R; ++r) m(r, c) = c_[r + R * c][p];
    return m;
  }
  void set_node(int p, const Node& m) {
    for (int c = 0; c < C; ++c)
      for (int r = 0; r < R; ++r) c_[r + R * c][p] = m(r, c);
  }

  Node mean() const {
    Node m;
    for (int c = 0; c < C; ++c)
      for (int r = 0; r < R; ++r) m(r, c) = c_[r + R * c].mean();
    return m;
  }
  // sup over nodes of the Euclidean (Frobenius) norm
  double max_norm() const {
    double s = 0;
    for (int p = 0; p < grid().size(); ++p) s = std::max(s, node(p).norm());
    return s;
  }
  double max_abs() const {
    double s = 0;
    for (const auto& x : c_) s = std::max(s, x.max_abs());
    return s;
  }

  template <class Op>
  TorusTensor map(Op op) const {
    TorusTensor t;
    for (int i = 0; i < count; ++i) t.c_[i] = op(c_[i]);
    return t;
  }

  TorusTensor& operator+=(const TorusTensor& o) { for (int i = 0; i < count; ++i) c_[i] += o.c_[i]; return *this; }
  TorusTensor& operator-=(const TorusTensor& o) { for (int i = 0; i < count; ++i) c_[i] -= o.c_[i]; return *this; }
  TorusTensor& operator*=(double a) { for (auto& x : c_) x *= a; return *this; }
  friend TorusTensor operator+(TorusTensor a, const TorusTensor& b) { return a += b; }
  friend TorusTensor operator-(TorusTensor a, const TorusTensor& b) { return a -= b; }
  friend TorusTensor operator*(TorusTensor a, double b) { return a *= b; }
  friend TorusTensor operator*(double b, TorusTensor a) { return a *= b; }

  const std::array<TorusScalar, count>& components() const { return c_; }

 private:
  std::array<TorusScalar, count> c_;
};

using TorusVec2 = TorusTensor<2>;
using TorusVec3 = TorusTensor<3>;
using TorusMat2 = TorusTensor<2, 2>;
using TorusMat32 = TorusTensor<3, 2>;
using TorusMat3 = TorusTensor<3, 3>;

// ---- modewise operators --------------------------------------------------

template <class M>
TorusScalar apply_multiplier(const TorusScalar& f, M&& mult) {
  const GridSize g = f.grid();
  Spectrum c = f.coeffs();
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      if (is_nyquist(i, g.n1) || is_nyquist(j, g.n2)) {
        c(i, j) = 0.0;
        continue;
      }
      c(i, j) *= mult(wavenumber(i, g.n1), wavenumber(j, g.n2));
    }
  return TorusScalar::from_coeffs(c);
}

inline TorusScalar d1(const TorusScalar& f) {
  return apply_multiplier(f, [](int k1, int) { return cplx(0, k1); });
}
inline TorusScalar d2(const TorusScalar& f) {
  return apply_multiplier(f, [](int, int k2) { return cplx(0, k2); });
}

inline TorusScalar l_omega(const TorusScalar& f, const Eigen::Vector2d& w) {
  return apply_multiplier(f, [&](int k1, int k2) { return cplx(0, k1 * w[0] + k2 * w[1]); });
}

// Drops Nyquist modes, keeps everything else.
inline TorusScalar project(const TorusScalar& f) {
  return apply_multiplier(f, [](int, int) { return cplx(1, 0); });
}

// Rigid translation f(phi + s).
inline TorusScalar shift(const TorusScalar& f, const Eigen::Vector2d& s) {
  return apply_multiplier(f, [&](int k1, int k2) { return std::exp(cplx(0, k1 * s[0] + k2 * s[1])); });
}

template <int R, int C>
TorusTensor<R, C> d1(const TorusTensor<R, C>& t) { return t.map([](const TorusScalar& x) { return d1(x); }); }
template <int R, int C>
TorusTensor<R, C> d2(const TorusTensor<R, C>& t) { return t.map([](const TorusScalar& x) { return d2(x); }); }
template <int R, int C>
TorusTensor<R, C> l_omega(const TorusTensor<R, C>& t, const Eigen::Vector2d& w) {
  return t.map([&](const TorusScalar& x) { return l_omega(x, w); });
}
template <int R, int C>
TorusTensor<R, C> shift(const TorusTensor<R, C>& t, const Eigen::Vector2d& s) {
  return t.map([&](const TorusScalar& x) { return shift(x, s); });
}

// Columns d1 f, d2 f of the Jacobian of a vector function.
template <int R>
TorusTensor<R, 2> jacobian(const TorusTensor<R>& v) {
  TorusTensor<R, 2> J;
  for (int r = 0; r < R; ++r) {
    J(r, 0) = d1(v[r]);
    J(r, 1) = d2(v[r]);
  }
  return J;
}

inline TorusVec2 gradient(const TorusScalar& f) {
  TorusVec2 g;
  g[0] = d1(f);
  g[1] = d2(f);
  return g;
}

// ---- norms and diagnostics ----------------------------------------------

inline constexpr double strip_rho_guard = 50.0;

inline double strip_norm(const TorusScalar& f, double rho) {
  if (rho < 0 || rho > strip_rho_guard) throw std::invalid_argument("strip_norm: rho outside [0, guard]");
  const GridSize g = f.grid();
  const Spectrum c = f.coeffs();
  double s = 0;
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int k1 = wavenumber(i, g.n1), k2 = wavenumber(j, g.n2);
      s += std::abs(c(i, j)) * std::exp(rho * (std::abs(k1) + std::abs(k2)));
    }
  return s;
}

// Share of l1 coefficient mass in the outer third of the band.
inline double tail_ratio(const TorusScalar& f) {
  const GridSize g = f.grid();
  const Spectrum c = f.coeffs();
  double tot = 0, tail = 0;
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const double a = std::abs(c(i, j));
      tot += a;
      const int k1 = std::abs(wavenumber(i, g.n1)), k2 = std::abs(wavenumber(j, g.n2));
      if (3 * k1 > g.n1 || 3 * k2 > g.n2) tail += a;
    }
  return tot > 0 ? tail / tot : 0.0;
}

template <int R, int C>
double tail_ratio(const TorusTensor<R, C>& t) {
  double s = 0;
  for (const auto& x : t.components()) s = std::max(s, tail_ratio(x));
  return s;
}

// Analyticity strip estimate from the decay slope of shell maxima.
inline double estimate_strip(const TorusScalar& f) {
  const GridSize g = f.grid();
  const Spectrum c = f.coeffs();
  const int kmax = std::min(g.n1, g.n2) / 2 - 1;
  std::vector<double> shell(kmax + 1, 0.0);
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int k = std::max(std::abs(wavenumber(i, g.n1)), std::abs(wavenumber(j, g.n2)));
      if (k <= kmax) shell[k] = std::max(shell[k], std::abs(c(i, j)));
    }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int k = 1; k <= kmax; ++k)
    if (shell[k] > 1e-15 * shell[0] + 1e-300) {
      const double y = std::log(shell[k]);
      sx += k; sy += y; sxx += double(k) * k; sxy += k * y; ++n;
    }
  if (n < 2) return strip_rho_guard;
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return std::max(0.0, -slope);
}

// ---- grids --------------------------------------------------------------

// Zero-pad or truncate the retained band onto another grid.
inline TorusScalar resample(const TorusScalar& f, GridSize to) {
  check_grid(to);
  const GridSize g = f.grid();
  const Spectrum c = f.coeffs();
  Spectrum out = Spectrum::Zero(to.n1, to.n2);
  const int h1 = std::min(g.n1, to.n1) / 2, h2 = std::min(g.n2, to.n2) / 2;
  for (int k2 = -h2 + 1; k2 < h2; ++k2)
    for (int k1 = -h1 + 1; k1 < h1; ++k1)
      out(fft_index(k1, to.n1), fft_index(k2, to.n2)) = c(fft_index(k1, g.n1), fft_index(k2, g.n2));
  return TorusScalar::from_coeffs(out);
}

template <int R, int C>
TorusTensor<R, C> resample(const TorusTensor<R, C>& t, GridSize to) {
  return t.map([&](const TorusScalar& x) { return resample(x, to); });
}

inline GridSize padded_grid(GridSize g) {
  auto up = [](int n) { int m = (3 * n + 1) / 2; return m + (m % 2); };
  return {up(g.n1), up(g.n2)};
}

// Dealiased product (3/2 rule).
inline TorusScalar product(const TorusScalar& f, const TorusScalar& h) {
  const GridSize g = f.grid();
  const GridSize pg = padded_grid(g);
  const TorusScalar fp = resample(f, pg), hp = resample(h, pg);
  return resample(fp * hp, g);
}

// ---- off-grid evaluation ------------------------------------------------

// Evaluates a batch of real functions (and derivatives) at arbitrary points
// by direct summation over the half spectrum.
class FourierEvaluator {
 public:
  FourierEvaluator() = default;
  explicit FourierEvaluator(const std::vector<TorusScalar>& fs) {
    if (fs.empty()) return;
    g_ = fs.front().grid();
    nf_ = int(fs.size());
    m1_ = g_.n1 / 2;       // k1 = 0 .. n1/2 - 1
    m2_ = g_.n2 - 1;       // k2 = -(n2/2-1) .. n2/2-1
    H_.resize(Eigen::Index(nf_) * m1_, m2_);
    for (int f = 0; f < nf_; ++f) {
      if (!(fs[f].grid() == g_)) throw std::invalid_argument("FourierEvaluator: mixed grids");
      const Spectrum c = fs[f].coeffs();
      for (int k1 = 0; k1 < m1_; ++k1)
        for (int q = 0; q < m2_; ++q) {
          const int k2 = q - (g_.n2 / 2 - 1);
          H_(f * m1_ + k1, q) = c(k1, fft_index(k2, g_.n2));
        }
    }
  }

  int count() const { return nf_; }
  GridSize grid() const { return g_; }

  // out rows: function index; cols: value, d1, d2, d11, d12, d22 (order 2)
  void eval(double p1, double p2, int order, Eigen::Ref<Eigen::ArrayXXd> out) const {
    const int ncol = order == 0 ? 1 : (order == 1 ? 3 : 6);
    const int nsum = order == 0 ? 1 : (order == 1 ? 2 : 3);
    Eigen::MatrixXcd E2(m2_, nsum);
    const int h2 = g_.n2 / 2 - 1;
    {
      const cplx step = std::exp(cplx(0, p2));
      cplx e = std::exp(cplx(0, -h2 * p2));
      for (int q = 0; q < m2_; ++q) {
        const double k2 = q - h2;
        E2(q, 0) = e;
        if (nsum > 1) E2(q, 1) = cplx(0, k2) * e;
        if (nsum > 2) E2(q, 2) = -k2 * k2 * e;
        e *= step;
      }
    }
    const Eigen::MatrixXcd S = H_ * E2;  // (nf*m1) x nsum
    std::vector<cplx> E1(m1_);
    {
      const cplx step = std::exp(cplx(0, p1));
      cplx e = 1.0;
      for (int k1 = 0; k1 < m1_; ++k1) { E1[k1] = e; e *= step; }
    }
    for (int f = 0; f < nf_; ++f) {
      double acc[6] = {0, 0, 0, 0, 0, 0};
      for (int k1 = 0; k1 < m1_; ++k1) {
        const double w = k1 == 0 ? 1.0 : 2.0;
        const cplx e = E1[k1];
        const cplx s0 = S(f * m1_ + k1, 0) * e;
        acc[0] += w * s0.real();
        if (order >= 1) {
          const cplx s2 = S(f * m1_ + k1, 1) * e;
          acc[1] += w * (cplx(0, k1) * s0).real();
          acc[2] += w * s2.real();
          if (order >= 2) {
            const cplx s22 = S(f * m1_ + k1, 2) * e;
            acc[3] += w * (-double(k1) * k1 * s0).real();
            acc[4] += w * (cplx(0, k1) * s2).real();
            acc[5] += w * s22.real();
          }
        }
      }
      for (int c = 0; c < ncol; ++c) out(f, c) = acc[c];
    }
  }

  Eigen::ArrayXXd eval(double p1, double p2, int order) const {
    Eigen::ArrayXXd out(nf_, order == 0 ? 1 : (order == 1 ? 3 : 6));
    eval(p1, p2, order, out);
    return out;
  }

 private:
  GridSize g_{};
  int nf_ = 0, m1_ = 0, m2_ = 0;
  Eigen::MatrixXcd H_;
};

template <int R, int C>
std::vector<TorusScalar> flatten(const TorusTensor<R, C>& t) {
  return {t.components().begin(), t.components().end()};
}

// ---- composition with near-identity maps --------------------------------

inline void check_diffeo(const TorusVec2& v) {
  const TorusMat2 Dv = jacobian(v);
  for (int p = 0; p < v.grid().size(); ++p) {
    const Eigen::Matrix2d J = Eigen::Matrix2d::Identity() + Dv.node(p);
    if (J.determinant() <= 0) throw NotDiffeomorphism("det(I + Dv) <= 0 at grid node " + std::to_string(p));
  }
}

// Evaluates fs at phi + v(phi) on the grid of v.
inline std::vector<TorusScalar> compose_shift(const std::vector<TorusScalar>& fs, const TorusVec2& v) {
  check_diffeo(v);
  const GridSize g = v.grid();
  FourierEvaluator ev(fs);
  std::vector<TorusScalar> out(fs.size(), TorusScalar(g));
  Eigen::ArrayXXd buf(fs.size(), 1);
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int p = i + g.n1 * j;
      ev.eval(node_angle(i, g.n1) + v[0][p], node_angle(j, g.n2) + v[1][p], 0, buf);
      for (size_t f = 0; f < fs.size(); ++f) out[f][p] = buf(f, 0);
    }
  return out;
}

inline TorusScalar compose_shift(const TorusScalar& f, const TorusVec2& v) {
  return compose_shift(std::vector<TorusScalar>{f}, v)[0];
}

template <int R, int C>
TorusTensor<R, C> compose_shift(const TorusTensor<R, C>& t, const TorusVec2& v) {
  const auto out = compose_shift(flatten(t), v);
  TorusTensor<R, C> r;
  for (int i = 0; i < TorusTensor<R, C>::count; ++i) r[i] = out[i];
  return r;
}

// w with (id + w) = (id + v)^{-1}, by the fixed point w = -v(id + w).
inline TorusVec2 invert_shift(const TorusVec2& v, double tol = 1e-11, int max_iter = 200) {
  check_diffeo(v);
  const GridSize g = v.grid();
  FourierEvaluator ev(flatten(v));
  TorusVec2 w = v * -1.0;
  Eigen::ArrayXXd buf(2, 1);
  for (int it = 0; it < max_iter; ++it) {
    double change = 0;
    for (int j = 0; j < g.n2; ++j)
      for (int i = 0; i < g.n1; ++i) {
        const int p = i + g.n1 * j;
        ev.eval(node_angle(i, g.n1) + w[0][p], node_angle(j, g.n2) + w[1][p], 0, buf);
        for (int c = 0; c < 2; ++c) {
          change = std::max(change, std::abs(-buf(c, 0) - w[c][p]));
          w[c][p] = -buf(c, 0);
        }
      }
    if (change < tol) return w;
  }
  throw NoConvergence("invert_shift: fixed point did not settle");
}

// ---- coefficient files --------------------------------------------------

inline void write_coeffs_csv(std::ostream& os, const TorusScalar& f) {
  const GridSize g = f.grid();
  const Spectrum c = f.coeffs();
  os << "# grid=" << to_string(g) << "\n" << "k1,k2,re,im\n";
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i)
      os << wavenumber(i, g.n1) << ',' << wavenumber(j, g.n2) << ',' << detail::fmt(c(i, j).real()) << ','
         << detail::fmt(c(i, j).imag()) << '\n';
}

inline GridSize parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError("grid must look like N1xN2, got '" + s + "'");
  GridSize g{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  if (g.n1 <= 0 || g.n2 <= 0 || g.n1 % 2 || g.n2 % 2) throw ConfigError("grid sizes must be positive and even");
  return g;
}

inline TorusScalar read_coeffs_csv(std::istream& is) {
  std::string line;
  GridSize g{};
  Spectrum c;
  bool have_grid = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto at = line.find("grid=");
      if (at != std::string::npos) {
        g = parse_grid(line.substr(at + 5));
        c = Spectrum::Zero(g.n1, g.n2);
        have_grid = true;
      }
      continue;
    }
    if (line.rfind("k1", 0) == 0) continue;
    if (!have_grid) throw IoError("coefficient file lacks '# grid=' header");
    std::stringstream ss(line);
    std::string a, b, re, im;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, re, ',');
    std::getline(ss, im, ',');
    try {
      const int k1 = std::stoi(a), k2 = std::stoi(b);
      if (std::abs(k1) > g.n1 / 2 || std::abs(k2) > g.n2 / 2) throw IoError("mode outside grid: " + line);
      c(fft_index(k1, g.n1) % g.n1, fft_index(k2, g.n2) % g.n2) = cplx(std::stod(re), std::stod(im));
    } catch (const std::logic_error&) {
      throw IoError("bad coefficient line: " + line);
    }
  }
  if (!have_grid) throw IoError("coefficient file lacks '# grid=' header");
  return TorusScalar::from_coeffs(c);
}

}  // namespace kamtori
