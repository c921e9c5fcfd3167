#pragma once

// Geometry of embedded tori under a field: invariance defect, twist,
// nondegeneracy certificates, thin tubes around closed curves.

#include <vector>

#include "kamtori/fields.hpp"
#include "kamtori/smalldiv.hpp"

namespace kamtori {

// B and DB sampled at the grid nodes of K.
struct FieldOnTorus {
  TorusVec3 B;
  TorusMat3 DB;
};

inline FieldOnTorus sample_field(const Embedding& K, const AmbientField& B) {
  const GridSize g = K.grid();
  FieldOnTorus f{TorusVec3(g), TorusMat3(g)};
  Eigen::Vector3d v;
  Eigen::Matrix3d J;
  for (int p = 0; p < g.size(); ++p) {
    B.eval_jac(K.K().node(p), v, J);
    f.B.set_node(p, v);
    f.DB.set_node(p, J);
  }
  return f;
}

inline TorusVec3 invariance_error(const Embedding& K, const Eigen::Vector2d& w, const AmbientField& B) {
  TorusVec3 E = l_omega(K.K(), w);
  for (int p = 0; p < K.grid().size(); ++p) E.set_node(p, E.node(p) - B.eval(K.K().node(p)));
  return E;
}
inline TorusVec3 invariance_error(const Embedding& K, const Frequency2& w, const AmbientField& B) {
  return invariance_error(K, w.omega, B);
}

// Pointwise a x b of two grid vector fields.
inline TorusVec3 cross(const TorusVec3& a, const TorusVec3& b) {
  return TorusVec3::generate(a.grid(), [&](int p) { return Eigen::Vector3d(a.node(p).cross(b.node(p))); });
}

inline TorusScalar dot(const TorusVec3& a, const TorusVec3& b) {
  TorusScalar s(a.grid());
  for (int p = 0; p < a.grid().size(); ++p) s[p] = a.node(p).dot(b.node(p));
  return s;
}

// d1 E x d2 K + d1 K x d2 E
inline TorusVec3 defect_normal_variation(const Embedding& K, const TorusVec3& E) {
  const TorusVec3 K1 = d1(K.K()), K2 = d2(K.K());
  return cross(d1(E), K2) + cross(K1, d2(E));
}

// L_w n + DB^T n - (d1E x d2K + d1K x d2E); vanishes for divergence-free B.
inline TorusVec3 normal_identity_residual(const Embedding& K, const Eigen::Vector2d& w, const AmbientField& B) {
  const auto f = sample_field(K, B);
  const TorusVec3 E = invariance_error(K, w, B);
  const TorusVec3 S = defect_normal_variation(K, E);
  TorusVec3 r = l_omega(K.n(), w);
  for (int p = 0; p < K.grid().size(); ++p)
    r.set_node(p, r.node(p) + f.DB.node(p).transpose() * K.n().node(p) - S.node(p));
  return r;
}

// DK xi1 + n xi2 / |n|^2
inline TorusVec3 frame_combine(const Embedding& K, const TorusVec2& xi1, const TorusScalar& xi2) {
  return TorusVec3::generate(K.grid(), [&](int p) {
    return Eigen::Vector3d(K.DK().node(p) * xi1.node(p) + K.n().node(p) * (xi2[p] / K.n_sq()[p]));
  });
}

// (G^{-1} DK^T v, n^T v), inverse of frame_combine.
inline std::pair<TorusVec2, TorusScalar> frame_split(const Embedding& K, const TorusVec3& v) {
  TorusVec2 t(K.grid());
  TorusScalar s(K.grid());
  for (int p = 0; p < K.grid().size(); ++p) {
    t.set_node(p, K.G_inv().node(p) * K.DK().node(p).transpose() * v.node(p));
    s[p] = K.n().node(p).dot(v.node(p));
  }
  return {t, s};
}

inline double twist_of(const Eigen::Vector2d& A_mean, const Eigen::Vector2d& w) {
  return A_mean[0] * w[1] - A_mean[1] * w[0];
}

struct Twist {
  TorusVec2 A;
  double T = 0;
  Eigen::Vector2d A_mean = Eigen::Vector2d::Zero();
};

// A = -G^{-1} DK^T (DB^T + DB) n / |n|^2, T = [A].w_perp
inline Twist twist_data(const Embedding& K, const Eigen::Vector2d& w, const AmbientField& B) {
  const auto f = sample_field(K, B);
  Twist t{TorusVec2(K.grid())};
  for (int p = 0; p < K.grid().size(); ++p) {
    const Eigen::Matrix3d DB = f.DB.node(p);
    const Eigen::Vector3d n = K.n().node(p);
    const Eigen::Vector3d s = (DB.transpose() + DB) * n;
    t.A.set_node(p, -K.G_inv().node(p) * K.DK().node(p).transpose() * s / K.n_sq()[p]);
  }
  t.A_mean = t.A.mean();
  t.T = twist_of(t.A_mean, w);
  return t;
}
inline Twist twist_data(const Embedding& K, const Frequency2& w, const AmbientField& B) {
  return twist_data(K, w.omega, B);
}

struct BeltramiTwist {
  TorusVec2 A;
  double T = 0;
  Eigen::Vector2d A_mean = Eigen::Vector2d::Zero();
  TorusVec2 alpha;          // B x n = DK alpha
  TorusScalar F;            // alpha . w_perp / |w|
  double alpha_term = 0;    // [alpha . w_perp / |n|^2]
};

inline TorusVec2 tangent_coefficients(const Embedding& K, const TorusVec3& v, double tol = 1e-9) {
  TorusVec2 a(K.grid());
  for (int p = 0; p < K.grid().size(); ++p) {
    const Eigen::Matrix<double, 3, 2> D = K.DK().node(p);
    const Eigen::Matrix2d G = K.G().node(p);
    if (std::abs(G.determinant()) < 1e-14 * G.squaredNorm())
      throw DegenerateAlpha("singular frame at node " + std::to_string(p));
    const Eigen::Vector2d x = G.ldlt().solve(D.transpose() * v.node(p));
    const double res = (D * x - v.node(p)).norm();
    if (res > tol * std::max(1.0, v.node(p).norm()))
      throw DegenerateAlpha("B x n not tangent at node " + std::to_string(p) + " (residual " + detail::fmt(res) + ")");
    a.set_node(p, x);
  }
  return a;
}

// A = 2 G^{-1} DK^T L_w n / |n|^2 - lambda alpha / |n|^2
inline BeltramiTwist twist_beltrami(const Embedding& K, const Eigen::Vector2d& w, const AmbientField& B, double lambda) {
  const GridSize g = K.grid();
  TorusVec3 Bk(g);
  for (int p = 0; p < g.size(); ++p) Bk.set_node(p, B.eval(K.K().node(p)));
  BeltramiTwist t{TorusVec2(g)};
  t.alpha = tangent_coefficients(K, cross(Bk, K.n()));
  const TorusVec3 Ln = l_omega(K.n(), w);
  const Eigen::Vector2d wp(w[1], -w[0]);
  t.F = TorusScalar(g);
  TorusScalar q(g);
  for (int p = 0; p < g.size(); ++p) {
    const Eigen::Vector2d al = t.alpha.node(p);
    const double nn = K.n_sq()[p];
    t.A.set_node(p, (2.0 * K.G_inv().node(p) * K.DK().node(p).transpose() * Ln.node(p) - lambda * al) / nn);
    t.F[p] = al.dot(wp) / w.norm();
    q[p] = al.dot(wp) / nn;
  }
  t.A_mean = t.A.mean();
  t.T = twist_of(t.A_mean, w);
  t.alpha_term = q.mean();
  return t;
}

// T + lambda [alpha . w_perp / |n|^2]; scales like |B|^2.
inline double nondeg_type_II(const Embedding& K, const Eigen::Vector2d& w, const AmbientField& B, double lambda) {
  const auto t = twist_beltrami(K, w, B, lambda);
  return t.T + lambda * t.alpha_term;
}

// Same value divided by |w|^2, unchanged under B -> sB.
inline double nondeg_type_II_normalized(const Embedding& K, const Eigen::Vector2d& w, const AmbientField& B,
                                        double lambda) {
  return nondeg_type_II(K, w, B, lambda) / w.squaredNorm();
}

struct TypeI {
  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
  double det = 0;
  TorusScalar R;
  double kappa = 1;       // [|X|^2] before normalization
  double residual = 0;    // |L_w R + |X|^2 - 1| after normalization
};

// G in linearizing coordinates, X = w there; X is rescaled so [|X|^2] = 1.
inline TypeI nondeg_type_I(const TorusMat2& G, const Eigen::Vector2d& w, const TorusScalar& X_sq) {
  TypeI out;
  out.kappa = X_sq.mean();
  if (!(out.kappa > 0)) throw DegenerateWeight("[|X|^2] must be positive");
  const double s = 1 / std::sqrt(out.kappa);
  const Eigen::Vector2d ws = s * w;
  const TorusScalar rhs = 1.0 - X_sq / out.kappa;
  out.R = solve_cohomological(rhs - rhs.mean(), ws);
  out.residual = (l_omega(out.R, ws) - rhs).max_abs();
  const TorusScalar R1 = d1(out.R), R2 = d2(out.R);
  const GridSize g = G.grid();
  for (int p = 0; p < g.size(); ++p) {
    Eigen::Matrix2d P;
    P << 1 - ws[0] * R1[p], -ws[1] * R1[p], -ws[0] * R2[p], 1 - ws[1] * R2[p];
    out.M += G.node(p).inverse() * P;
  }
  out.M /= g.size();
  out.det = out.M.determinant();
  return out;
}

inline TypeI nondeg_type_I(const Embedding& K, const Eigen::Vector2d& w, const TorusVec2& X) {
  TorusScalar xs(K.grid());
  for (int p = 0; p < K.grid().size(); ++p) xs[p] = X.node(p).dot(K.G().node(p) * X.node(p));
  return nondeg_type_I(K.G(), w, xs);
}

// ---- closed curves and thin tubes ---------------------------------------

// Arc-length parametrized closed curve, alpha in [0, 2pi), |gamma'| = L / 2pi.
class ClosedCurve {
 public:
  // c samples a smooth 2pi-periodic curve; n nodes, power of two.
  template <class F>
  static ClosedCurve from_function(F&& c, int n = 256) {
    GridSize g{n, 2};
    std::array<TorusScalar, 3> comp;
    for (int k = 0; k < 3; ++k) comp[k] = TorusScalar::sample(g, [&](double t, double) { return c(t)[k]; });
    return ClosedCurve(comp);
  }

  int size() const { return n_; }
  double length() const { return L_; }
  const std::vector<Eigen::Vector3d>& points() const { return pts_; }
  const std::vector<double>& curvature() const { return kappa_; }
  const std::vector<double>& torsion() const { return tau_; }  // per unit arc length
  double max_curvature() const { return *std::max_element(kappa_.begin(), kappa_.end()); }

  // [tau] on the curve rescaled to length 2pi: total torsion / 2pi
  double mean_torsion() const { return tau_mean_; }

  Eigen::Vector3d point(int i) const { return pts_[i]; }
  Eigen::Vector3d normal(int i) const { return N_[i]; }
  Eigen::Vector3d binormal(int i) const { return Bn_[i]; }
  Eigen::Vector3d tangent(int i) const { return T_[i]; }
  // int_0^alpha tau ds - [tau] alpha at node i
  double torsion_phase(int i) const { return phase_[i]; }

  double speed_spread() const { return speed_spread_; }

 private:
  explicit ClosedCurve(const std::array<TorusScalar, 3>& c) {
    const int n = c[0].grid().n1;
    // arc length s(t) through the spectral antiderivative of |c'|
    std::array<TorusScalar, 3> dc;
    for (int k = 0; k < 3; ++k) dc[k] = d1(c[k]);
    TorusScalar sp(c[0].grid());
    for (int p = 0; p < sp.size(); ++p) sp[p] = std::sqrt(dc[0][p] * dc[0][p] + dc[1][p] * dc[1][p] + dc[2][p] * dc[2][p]);
    L_ = sp.mean() * two_pi;
    const TorusScalar osc = antiderivative(sp - sp.mean());
    FourierEvaluator ev({c[0], c[1], c[2], osc});
    auto s_of = [&](double t) { return sp.mean() * t + ev.eval(t, 0, 0)(3, 0); };
    const double mean_speed = sp.mean();
    // invert s(t) = (L/2pi) alpha at the nodes
    std::array<TorusScalar, 3> arc;
    for (auto& a : arc) a = TorusScalar(c[0].grid());
    for (int i = 0; i < n; ++i) {
      const double target = mean_speed * node_angle(i, n);
      double t = node_angle(i, n);
      for (int it = 0; it < 60; ++it) {
        const auto r = ev.eval(t, 0, 1);
        Eigen::Vector3d d(r(0, 1), r(1, 1), r(2, 1));
        const double dt = (s_of(t) - target) / d.norm();
        t -= dt;
        if (std::abs(dt) < 1e-15) break;
      }
      const auto r = ev.eval(t, 0, 0);
      for (int k = 0; k < 3; ++k) {
        arc[k][i] = r(k, 0);
        arc[k][i + n] = r(k, 0);
      }
    }
    n_ = n;
    build_frame(arc);
  }

  static TorusScalar antiderivative(const TorusScalar& f) {
    return apply_multiplier(f, [](int k1, int) { return k1 == 0 ? cplx(0, 0) : cplx(0, -1.0 / k1); });
  }

  void build_frame(const std::array<TorusScalar, 3>& g) {
    std::array<TorusScalar, 3> g1, g2, g3;
    for (int k = 0; k < 3; ++k) {
      g1[k] = d1(g[k]);
      g2[k] = d1(g1[k]);
      g3[k] = d1(g2[k]);
    }
    auto at = [](const std::array<TorusScalar, 3>& a, int i) { return Eigen::Vector3d(a[0][i], a[1][i], a[2][i]); };
    double smin = 1e300, smax = 0;
    TorusScalar tau_alpha(g[0].grid());
    for (int i = 0; i < n_; ++i) {
      const Eigen::Vector3d a = at(g1, i), b = at(g2, i), c = at(g3, i);
      const Eigen::Vector3d ab = a.cross(b);
      const double sp = a.norm();
      smin = std::min(smin, sp);
      smax = std::max(smax, sp);
      const double k = ab.norm() / (sp * sp * sp);
      if (!(k > 1e-10)) throw GeometryError("curvature vanishes at node " + std::to_string(i) + ", Frenet frame undefined");
      const double tau = ab.dot(c) / ab.squaredNorm();
      pts_.push_back(at(g, i));
      kappa_.push_back(k);
      tau_.push_back(tau);
      T_.push_back(a / sp);
      Bn_.push_back(ab.normalized());
      N_.push_back(Bn_.back().cross(T_.back()));
      tau_alpha[i] = tau_alpha[i + n_] = tau * sp;
    }
    speed_spread_ = (smax - smin) / smax;
    tau_mean_ = tau_alpha.mean();
    const TorusScalar ph = antiderivative(tau_alpha - tau_mean_);
    for (int i = 0; i < n_; ++i) phase_.push_back(ph[i] - ph[0]);
  }

  int n_ = 0;
  double L_ = 0, tau_mean_ = 0, speed_spread_ = 0;
  std::vector<Eigen::Vector3d> pts_, T_, N_, Bn_;
  std::vector<double> kappa_, tau_, phase_;
};

// Total torsion / 2pi by the trapezoid rule on the raw parametrization.
template <class F>
double torsion_quadrature(F&& c, int n) {
  GridSize g{n, 2};
  std::array<TorusScalar, 3> x, x1, x2, x3;
  for (int k = 0; k < 3; ++k) {
    x[k] = TorusScalar::sample(g, [&](double t, double) { return c(t)[k]; });
    x1[k] = d1(x[k]);
    x2[k] = d1(x1[k]);
    x3[k] = d1(x2[k]);
  }
  double s = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d a(x1[0][i], x1[1][i], x1[2][i]), b(x2[0][i], x2[1][i], x2[2][i]),
        cc(x3[0][i], x3[1][i], x3[2][i]);
    const Eigen::Vector3d ab = a.cross(b);
    s += ab.dot(cc) / ab.squaredNorm() * a.norm();
  }
  return s / n;
}

// Boundary of the tube of radius eps in angles (alpha, theta + torsion phase).
inline Embedding tube_embedding(const ClosedCurve& c, double eps, int n2 = 32) {
  if (!(eps > 0)) throw GeometryError("tube radius must be positive");
  if (eps * c.max_curvature() >= 1)
    throw SelfIntersection("eps = " + detail::fmt(eps) + " >= 1/max curvature = " + detail::fmt(1 / c.max_curvature()));
  const int n1 = c.size();
  // global clearance: points far apart along the curve stay 2 eps apart
  const double ds = c.length() / n1;
  for (int i = 0; i < n1; ++i)
    for (int j = i + 1; j < n1; ++j) {
      const double arc = std::min(j - i, n1 - (j - i)) * ds;
      if (arc > 4 * eps && (c.point(i) - c.point(j)).norm() < 2 * eps)
        throw SelfIntersection("tube overlaps itself between curve nodes " + std::to_string(i) + " and " +
                               std::to_string(j));
    }
  GridSize g{n1, n2};
  TorusVec3 K(g);
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      const double th = node_angle(j, n2) - c.torsion_phase(i);
      K.set_node(i + n1 * j, c.point(i) + eps * (std::cos(th) * c.normal(i) + std::sin(th) * c.binormal(i)));
    }
  return Embedding(std::move(K));
}

}  // namespace kamtori
