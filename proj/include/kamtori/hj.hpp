#pragma once

// Hamilton-Jacobi problem on an invariant torus: find X = s Y + grad H + a.grad(phi),
// s = (1+c)^{1/2}, with |X|^2 = (1+b)|Y|^2 + c and X conjugate to the linear
// field s w through phi -> phi + v(phi).
//
// Coordinates: Y = w is constant, vectors carry upper indices, covectors
// lower ones, grad f = G^{-1} df, |z|^2 = z^T G^{-1} z for a covector z.

#include <vector>

#include "kamtori/torus_geom.hpp"

namespace kamtori {

struct HjData {
  TorusMat2 G, G_inv;
  TorusScalar Y_sq;          // w^T G w
  Eigen::Vector2d omega = Eigen::Vector2d::Zero();
  double c = 0;
  double s = 1;              // (1+c)^{1/2}
  double divisor_floor = 1e-8;
};

inline HjData make_hj_data(const TorusMat2& G, const Eigen::Vector2d& w, double c) {
  if (!(c > -1)) throw std::invalid_argument("hj: need c > -1");
  HjData d;
  d.G = G;
  d.G_inv = TorusMat2(G.grid());
  d.Y_sq = TorusScalar(G.grid());
  for (int p = 0; p < G.grid().size(); ++p) {
    const Eigen::Matrix2d g = G.node(p);
    d.G_inv.set_node(p, g.inverse());
    d.Y_sq[p] = w.dot(g * w);
  }
  d.omega = w;
  d.c = c;
  d.s = std::sqrt(1 + c);
  return d;
}

namespace detail {

// G^{-1} z at every node, z a covector field.
inline TorusVec2 raise(const TorusMat2& Gi, const TorusVec2& z) {
  return TorusVec2::generate(z.grid(), [&](int p) { return Eigen::Vector2d(Gi.node(p) * z.node(p)); });
}

inline TorusVec2 add_const(TorusVec2 z, const Eigen::Vector2d& a) {
  z[0] += a[0];
  z[1] += a[1];
  return z;
}

inline TorusScalar linv(const TorusScalar& f, const Eigen::Vector2d& w, double floor) {
  return invert_l_omega(f - f.mean(), w, floor);
}

}  // namespace detail

// b = [|grad H + a grad phi|^2] + 2 s a.w, which makes [T_c] = 0.
inline double hj_b(const TorusScalar& H, const Eigen::Vector2d& a, const HjData& d) {
  const TorusVec2 z = detail::add_const(gradient(H), a);
  TorusScalar q(H.grid());
  for (int p = 0; p < q.size(); ++p) q[p] = z.node(p).dot(d.G_inv.node(p) * z.node(p));
  return q.mean() + 2 * d.s * a.dot(d.omega);
}

inline TorusScalar eval_Tc(const TorusScalar& H, const Eigen::Vector2d& a, const HjData& d) {
  const TorusVec2 z = detail::add_const(gradient(H), a);
  TorusScalar q(H.grid());
  for (int p = 0; p < q.size(); ++p) q[p] = z.node(p).dot(d.G_inv.node(p) * z.node(p));
  const double b = q.mean() + 2 * d.s * a.dot(d.omega);
  return 2 * d.s * l_omega(H, d.omega) + q + 2 * d.s * a.dot(d.omega) - b * d.Y_sq - d.c * (1.0 - d.Y_sq);
}

// s L_w v - (grad H + a grad phi) o (id + v)
inline TorusVec2 eval_Rc(const TorusScalar& H, const TorusVec2& v, const Eigen::Vector2d& a, const HjData& d) {
  const TorusVec2 V = detail::raise(d.G_inv, detail::add_const(gradient(H), a));
  return d.s * l_omega(v, d.omega) - compose_shift(V, v);
}

struct HjBetaLedger {
  double beta0 = 0;
  Eigen::Vector2d beta1 = Eigen::Vector2d::Zero();   // from grad H0
  Eigen::Vector2d beta2 = Eigen::Vector2d::Zero();   // from a0
  Eigen::Vector2d beta3 = Eigen::Vector2d::Zero();   // from w
  Eigen::Vector2d alpha = Eigen::Vector2d::Zero();
  double beta = 0;

  double reassembled() const { return beta0 + (beta1 + beta2 + beta3).dot(alpha); }
};

struct HjLogEntry {
  int iter = 0;
  double err_T = 0;
  double err_R = 0;
  double b = 0;
  double det_M = 0;
};

struct HjState {
  TorusScalar H;
  TorusVec2 v;
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  double b = 0;
  double c = 0;
  HjBetaLedger ledger;
  double eta_mean_shift = 0;   // |constant added to eta~ so that [v] = 0|
  double det_M = 0;
  double err_T = 0;
  double err_R = 0;
  int iter = 0;
  std::vector<HjLogEntry> history;

  double err() const { return err_T + err_R; }
};

struct HjOptions {
  double tol = 1e-12;
  int max_iter = 20;
  double c_max = 1e-2;
  bool allow_large_c = false;
  double matrix_floor = 1e-6;
};

inline HjState hj_initial_state(GridSize g, const HjData& d) {
  HjState s{TorusScalar(g), TorusVec2(g)};
  s.c = d.c;
  const TorusScalar T = eval_Tc(s.H, s.a, d);
  s.err_T = T.max_abs();
  s.err_R = eval_Rc(s.H, s.v, s.a, d).max_abs();
  s.history.push_back({0, s.err_T, s.err_R, 0.0, 0.0});
  return s;
}

inline HjState hj_newton_step(const HjState& st, const HjData& d, const HjOptions& o = {}) {
  const GridSize g = st.H.grid();
  const Eigen::Vector2d w = d.omega;
  const double s = d.s;
  const TorusScalar EH = eval_Tc(st.H, st.a, d);
  const TorusVec2 Ev = eval_Rc(st.H, st.v, st.a, d);

  // pullback f o Phi0 and pushforward f o Phi0^{-1}
  const TorusVec2 winv = invert_shift(st.v);
  auto pull = [&](const TorusScalar& f) { return compose_shift(f, st.v); };
  auto push = [&](const TorusScalar& f) { return compose_shift(f, winv); };

  const TorusScalar Yh = pull(d.Y_sq);
  const double mY = Yh.mean();
  const TorusVec2 dH = gradient(st.H);
  HjBetaLedger L;

  // xi^E
  const TorusScalar EHh = pull(EH);
  L.beta0 = EHh.mean() / mY;
  const TorusScalar xiE = push(detail::linv((L.beta0 * Yh - EHh) / (2 * s), w, d.divisor_floor));

  // xi_i = xi_i^H + xi_i^a + xi_i^w
  std::array<TorusScalar, 2> xi;
  for (int i = 0; i < 2; ++i) {
    TorusScalar hH(g), ha(g);
    for (int p = 0; p < g.size(); ++p) {
      const Eigen::Vector2d col = d.G_inv.node(p).col(i);
      hH[p] = dH.node(p).dot(col);
      ha[p] = st.a.dot(col);
    }
    const TorusScalar hHh = pull(hH), hah = pull(ha);
    L.beta1[i] = 2 * hHh.mean() / mY;
    L.beta2[i] = 2 * hah.mean() / mY;
    L.beta3[i] = 2 * s * w[i] / mY;
    // each piece is the beta-weighted |Y|^2 term minus the source, over 2s
    const TorusScalar fH = (0.5 * L.beta1[i] * Yh - hHh) / s;
    const TorusScalar fa = (0.5 * L.beta2[i] * Yh - hah) / s;
    const TorusScalar fw = L.beta3[i] / (2 * s) * Yh - w[i];
    xi[i] = push(detail::linv(fH + fa + fw, w, d.divisor_floor));
  }

  // averaged 2x2 system for alpha
  const TorusMat2 Dv = jacobian(st.v);
  TorusVec2 M0[2] = {detail::raise(d.G_inv, detail::add_const(gradient(xi[0]), {1, 0})),
                     detail::raise(d.G_inv, detail::add_const(gradient(xi[1]), {0, 1}))};
  const TorusVec2 gE = detail::raise(d.G_inv, gradient(xiE));
  const TorusVec2 M0h0 = compose_shift(M0[0], st.v), M0h1 = compose_shift(M0[1], st.v);
  const TorusVec2 gEh = compose_shift(gE, st.v);
  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  std::vector<Eigen::Matrix2d> Jinv(g.size());
  for (int p = 0; p < g.size(); ++p) {
    Jinv[p] = (Eigen::Matrix2d::Identity() + Dv.node(p)).inverse();
    Eigen::Matrix2d C;
    C.col(0) = M0h0.node(p);
    C.col(1) = M0h1.node(p);
    M += Jinv[p] * C;
    rhs += Jinv[p] * (Ev.node(p) - gEh.node(p));
  }
  M /= g.size();
  rhs /= g.size();
  const double det = M.determinant();
  if (std::abs(det) <= o.matrix_floor)
    throw MFloorViolated("|det [(I+Dv)^{-1} M o Phi]| = " + detail::fmt(std::abs(det)) + " <= " +
                         detail::fmt(o.matrix_floor));
  L.alpha = M.partialPivLu().solve(rhs);
  {
    // beta straight from the mean condition of the full right-hand side
    TorusScalar src(g);
    for (int p = 0; p < g.size(); ++p)
      src[p] = EH[p] + 2 * (dH.node(p) + st.a).dot(d.G_inv.node(p) * L.alpha) + 2 * s * L.alpha.dot(w);
    L.beta = pull(src).mean() / mY;
  }

  TorusScalar dxi = xiE + L.alpha[0] * xi[0] + L.alpha[1] * xi[1];
  dxi -= dxi.mean();

  // eta = (I + Dv0) eta~
  const TorusVec2 src = compose_shift(detail::raise(d.G_inv, detail::add_const(gradient(dxi), L.alpha)), st.v);
  TorusVec2 r(g);
  for (int p = 0; p < g.size(); ++p) r.set_node(p, Jinv[p] * (src.node(p) - Ev.node(p)) / s);
  TorusVec2 et(g);
  for (int i = 0; i < 2; ++i) et[i] = detail::linv(r[i], w, d.divisor_floor);
  // constant part of eta~ fixes the translation freedom of v
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (int p = 0; p < g.size(); ++p) m -= Dv.node(p) * et.node(p);
  m /= g.size();
  TorusVec2 eta(g);
  for (int p = 0; p < g.size(); ++p)
    eta.set_node(p, (Eigen::Matrix2d::Identity() + Dv.node(p)) * (et.node(p) + m));

  HjState out = st;
  out.H = st.H + dxi;
  out.v = st.v + eta;
  out.a = st.a + L.alpha;
  out.b = hj_b(out.H, out.a, d);
  out.ledger = L;
  out.eta_mean_shift = m.norm();
  out.det_M = det;
  out.iter = st.iter + 1;
  out.err_T = eval_Tc(out.H, out.a, d).max_abs();
  out.err_R = eval_Rc(out.H, out.v, out.a, d).max_abs();
  out.history.back().det_M = det;
  out.history.push_back({out.iter, out.err_T, out.err_R, out.b, 0.0});
  return out;
}

struct HjSolution {
  HjState state;
  TorusVec2 X;            // vector components in the torus coordinates
  TorusVec2 X_flat;       // covector G X
  double kappa = 1;       // [|Y|^2] of the input
  double type_I_det = 0;
  double norm_residual = 0;        // max | |X|^2 - (1+b)|Y|^2 - c |
  double conjugacy_residual = 0;   // |R_c|
  double closedness_residual = 0;  // |d1 X_2 - d2 X_1| of the covector
  Eigen::Vector2d frequency = Eigen::Vector2d::Zero();   // (1 + c/kappa)^{1/2} w
};

// d1 z2 - d2 z1
inline TorusScalar exterior_derivative(const TorusVec2& z) { return d1(z[1]) - d2(z[0]); }

// Y = w on a torus with metric G. Works in units where [|Y|^2] = 1 and maps
// back: H, a, X scale with kappa^{1/2}, c is the physical jump.
inline HjSolution solve_hj(double c, const TorusMat2& G, const Frequency2& w, const HjOptions& o = {}) {
  if (std::abs(c) > o.c_max && !o.allow_large_c)
    throw ConfigError("|c| = " + detail::fmt(std::abs(c)) + " exceeds c_max = " + detail::fmt(o.c_max));
  detail::require_bandwidth(w, G.grid());
  const GridSize g = G.grid();
  HjSolution out;
  TorusScalar Ysq(g);
  for (int p = 0; p < g.size(); ++p) Ysq[p] = w.omega.dot(G.node(p) * w.omega);
  out.kappa = Ysq.mean();
  const TypeI t1 = nondeg_type_I(G, w.omega, Ysq);
  out.type_I_det = t1.det;
  if (std::abs(t1.det) <= o.matrix_floor)
    throw MFloorViolated("type-I determinant " + detail::fmt(t1.det) + " below floor");

  const double k = std::sqrt(out.kappa);
  const HjData d = make_hj_data(G, w.omega / k, c / out.kappa);
  HjState st = hj_initial_state(g, d);
  while (st.err() >= o.tol && c != 0) {
    if (st.iter >= o.max_iter) break;
    HjState next = hj_newton_step(st, d, o);
    if (next.err() >= st.err()) {
      st.history = next.history;
      break;
    }
    st = std::move(next);
  }
  if (st.err() >= o.tol && c != 0) {
    std::string h;
    for (const auto& e : st.history) h += " " + detail::fmt(e.err_T + e.err_R);
    throw NoConvergence("hj residual history:" + h);
  }

  // back to physical units
  st.H *= k;
  st.a *= k;
  st.c = c;
  const TorusVec2 z = detail::add_const(gradient(st.H), st.a);
  out.X_flat = TorusVec2(g);
  out.X = TorusVec2(g);
  TorusScalar res(g);
  for (int p = 0; p < g.size(); ++p) {
    const Eigen::Vector2d Gw = G.node(p) * w.omega;
    const Eigen::Vector2d flat = d.s * Gw + z.node(p);
    out.X_flat.set_node(p, flat);
    const Eigen::Vector2d X = d.G_inv.node(p) * flat;
    out.X.set_node(p, X);
    res[p] = X.dot(G.node(p) * X) - (1 + st.b) * Ysq[p] - c;
  }
  out.norm_residual = res.max_abs();
  out.frequency = d.s * w.omega;
  const TorusVec2 V = detail::raise(d.G_inv, z);
  out.conjugacy_residual = (d.s * l_omega(st.v, w.omega) - compose_shift(V, st.v)).max_abs();
  out.closedness_residual = exterior_derivative(out.X_flat).max_abs();
  out.state = std::move(st);
  return out;
}

// Closed-covector test metric: G = w w^T / (w.omega) + mu e e^T, e = omega_perp / |omega|.
// Then G omega = w, so Y = omega has |Y|^2 = w.omega and Y-flat = w.
inline TorusMat2 metric_with_covector(const TorusVec2& w, const Eigen::Vector2d& omega, double mu = 1.0) {
  const Eigen::Vector2d e = Eigen::Vector2d(omega[1], -omega[0]).normalized();
  return TorusMat2::generate(w.grid(), [&](int p) {
    const Eigen::Vector2d x = w.node(p);
    const double wo = x.dot(omega);
    if (!(wo > 0)) throw GeometryError("test metric needs w.omega > 0");
    return Eigen::Matrix2d(x * x.transpose() / wo + mu * e * e.transpose());
  });
}

// |Y|^2 = 1 + eps cos(phi1 + phi2) with a closed covector.
inline TorusMat2 hj_test_metric(GridSize g, const Eigen::Vector2d& omega, double eps) {
  const Eigen::Vector2d w0 = omega / omega.squaredNorm();
  const double k = omega[0] + omega[1];
  TorusVec2 w(g);
  for (int i = 0; i < 2; ++i)
    w[i] = TorusScalar::sample(g, [&](double a, double b) { return w0[i] + eps / k * std::cos(a + b); });
  return metric_with_covector(w, omega);
}

}  // namespace kamtori
