#pragma once

// Diophantine certificates and constant-coefficient cohomological equations.

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "kamtori/spectral.hpp"

namespace kamtori {

// |k| below is the l1 norm |k1| + |k2|.
struct Frequency2 {
  Eigen::Vector2d omega = Eigen::Vector2d::Zero();
  double gamma = 0;
  double tau = 0;
  int k_max = 0;
  double min_divisor = 0;        // min |k.omega| |k|^tau over the scan
  Eigen::Vector2i worst_k = Eigen::Vector2i::Zero();

  double ratio() const { return omega[1] / omega[0]; }
  Eigen::Vector2d perp() const { return {omega[1], -omega[0]}; }
};

inline Frequency2 certify(const Eigen::Vector2d& omega, double gamma, double tau, int k_max) {
  if (!(gamma > 0) || !(tau > 1)) throw std::invalid_argument("certify: need gamma > 0, tau > 1");
  if (omega.norm() == 0 || !omega.allFinite())
    throw NotDiophantineUpToCutoff(0, 0, "frequency vector is zero");
  Frequency2 f{omega, gamma, tau, k_max, std::numeric_limits<double>::infinity(), {0, 0}};
  for (int n = 1; n <= k_max; ++n)
    for (int k1 = 0; k1 <= n; ++k1) {
      const int a = n - k1;
      for (int s : {1, -1}) {
        const int k2 = s * a;
        if (k1 == 0 && k2 <= 0) continue;
        if (a == 0 && s == -1) continue;
        const double d = std::abs(k1 * omega[0] + k2 * omega[1]) * std::pow(double(n), tau);
        if (d < f.min_divisor) {
          f.min_divisor = d;
          f.worst_k = {k1, k2};
        }
      }
    }
  // report the worst offender, smallest |k| on ties
  if (f.min_divisor < gamma)
    throw NotDiophantineUpToCutoff(f.worst_k[0], f.worst_k[1],
                                   "|k.w| |k|^tau = " + detail::fmt(f.min_divisor) + " < gamma at k=(" +
                                       std::to_string(f.worst_k[0]) + "," + std::to_string(f.worst_k[1]) + ")");
  return f;
}

// Same ratio, rescaled length; gamma scales with it.
inline Frequency2 scaled(const Frequency2& f, double s) {
  Frequency2 g = f;
  g.omega *= s;
  g.gamma *= std::abs(s);
  g.min_divisor *= std::abs(s);
  return g;
}

inline int l1_bandwidth(GridSize g) { return (g.n1 / 2 - 1) + (g.n2 / 2 - 1); }

struct CohomOptions {
  double divisor_floor = 1e-8;
  double mean_tol = 1e-12;
};

namespace detail {

// L_w^{-1} on non-constant modes; the mean is ignored and set to zero.
inline TorusScalar invert_l_omega(const TorusScalar& f, const Eigen::Vector2d& w, double floor) {
  const GridSize g = f.grid();
  Spectrum c = f.coeffs();
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      if ((i == 0 && j == 0) || is_nyquist(i, g.n1) || is_nyquist(j, g.n2)) {
        c(i, j) = 0.0;
        continue;
      }
      const int k1 = wavenumber(i, g.n1), k2 = wavenumber(j, g.n2);
      const double d = k1 * w[0] + k2 * w[1];
      if (std::abs(d) < floor)
        throw DivisorUnderflow("|k.w| = " + fmt(std::abs(d)) + " below floor at k=(" + std::to_string(k1) + "," +
                               std::to_string(k2) + ")");
      c(i, j) /= cplx(0, d);
    }
  TorusScalar u = TorusScalar::from_coeffs(c);
  u -= u.mean();
  return u;
}

inline void require_bandwidth(const Frequency2& w, GridSize g) {
  if (w.k_max < l1_bandwidth(g))
    throw DivisorUnderflow("frequency certified to |k| <= " + std::to_string(w.k_max) + " but grid " + to_string(g) +
                           " needs " + std::to_string(l1_bandwidth(g)));
}

}  // namespace detail

inline TorusScalar solve_cohomological(const TorusScalar& f, const Eigen::Vector2d& w, const CohomOptions& o = {}) {
  if (std::abs(f.mean()) >= o.mean_tol) throw NonzeroMean("mean(f) = " + detail::fmt(f.mean()));
  return detail::invert_l_omega(f, w, o.divisor_floor);
}

inline TorusScalar solve_cohomological(const TorusScalar& f, const Frequency2& w, const CohomOptions& o = {}) {
  detail::require_bandwidth(w, f.grid());
  return solve_cohomological(f, w.omega, o);
}

inline TorusScalar l_omega(const TorusScalar& f, const Frequency2& w) { return l_omega(f, w.omega); }

// L_w u = f - mu g with mu = mean(f) / mean(g).
inline std::pair<TorusScalar, double> solve_with_free_mean(const TorusScalar& f, const TorusScalar& g,
                                                            const Eigen::Vector2d& w, const CohomOptions& o = {}) {
  const double mg = g.mean();
  if (std::abs(mg) <= 1e-10) throw DegenerateWeight("mean(g) = " + detail::fmt(mg));
  const double mu = f.mean() / mg;
  TorusScalar rhs = f - mu * g;
  rhs -= rhs.mean();
  return {detail::invert_l_omega(rhs, w, o.divisor_floor), mu};
}

inline std::pair<TorusScalar, double> solve_with_free_mean(const TorusScalar& f, const TorusScalar& g,
                                                            const Frequency2& w, const CohomOptions& o = {}) {
  detail::require_bandwidth(w, f.grid());
  return solve_with_free_mean(f, g, w.omega, o);
}

}  // namespace kamtori
