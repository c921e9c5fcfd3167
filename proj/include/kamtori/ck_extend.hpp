#pragma once

// Normal-direction jets of Beltrami / harmonic fields off an analytic torus.
// Chart x = K(phi) + t nu(phi), nu the unit normal. With g^a the dual basis of
// e_a = K_a + t nu_a, the system curl B = lambda B, div B = 0 reads
//   d_t B = -nu (g^a . d_a B) - nu x (lambda B - g^a x d_a B)
// and is solved order by order in t.

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "kamtori/torus_geom.hpp"

namespace kamtori {

// |d1 w2 - d2 w1| with w = G X.
inline double check_constraint(const TorusMat2& G, const TorusVec2& X) {
  TorusVec2 w(G.grid());
  for (int p = 0; p < G.grid().size(); ++p) w.set_node(p, G.node(p) * X.node(p));
  return (d1(w[1]) - d2(w[0])).max_abs();
}
inline double check_constraint(const Embedding& K, const TorusVec2& X) { return check_constraint(K.G(), X); }

// Drops the co-exact part (d2 g, -d1 g) of w = G X, flat Hodge splitting on the
// coordinate torus; returns G^{-1} of the closed remainder.
inline TorusVec2 closed_part(const TorusMat2& G, const TorusMat2& G_inv, const TorusVec2& X, double* removed = nullptr) {
  const GridSize g = G.grid();
  TorusVec2 w(g);
  for (int p = 0; p < g.size(); ++p) w.set_node(p, G.node(p) * X.node(p));
  const TorusScalar dw = d1(w[1]) - d2(w[0]);
  const TorusScalar h = apply_multiplier(dw, [](int k1, int k2) {
    const int q = k1 * k1 + k2 * k2;
    return q == 0 ? cplx(0) : cplx(1.0 / q);
  });
  w[0] -= d2(h);
  w[1] += d1(h);
  TorusVec2 out(g);
  double r = 0;
  for (int p = 0; p < g.size(); ++p) {
    out.set_node(p, G_inv.node(p) * w.node(p));
    r = std::max(r, (out.node(p) - X.node(p)).norm());
  }
  if (removed) *removed = r;
  return out;
}

// Largest |principal curvature| over the grid.
inline double max_principal_curvature(const Embedding& K, const TorusVec3& nu) {
  const TorusMat32 Dnu = jacobian(nu);
  double k = 0;
  for (int p = 0; p < K.grid().size(); ++p) {
    const Eigen::Matrix<double, 3, 2> D = K.DK().node(p);
    const Eigen::Matrix2d II = -(D.transpose() * Dnu.node(p));
    const Eigen::Matrix2d S = K.G_inv().node(p) * 0.5 * (II + II.transpose());
    const Eigen::Vector2cd ev = S.eigenvalues();
    k = std::max({k, std::abs(ev[0]), std::abs(ev[1])});
  }
  return k;
}

struct CkOptions {
  double constraint_tol = 1e-10;
  double focal_fraction = 0.9;    // t never exceeds this fraction of 1 / max curvature
  double validity_tol = 1e-6;     // empirical radius: largest t with residuals below this
  int validity_samples = 64;   // geometric in t over four decades
  bool one_sided = false;         // t_range = [0, t_max] instead of [-t_max, t_max]
};

struct JetResidual {
  double curl = 0;   // |curl B - lambda B|
  double div = 0;
};

class JetField {
 public:
  JetField() = default;

  const Embedding& base() const { return base_; }
  const TorusVec3& unit_normal() const { return nu_; }
  int order() const { return int(coeffs_.size()) - 1; }
  const std::vector<TorusVec3>& coeffs() const { return coeffs_; }
  double lambda() const { return lambda_; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  double focal_bound() const { return focal_; }
  GridSize grid() const { return base_.grid(); }

  // B(., t) on the grid.
  TorusVec3 values(double t) const {
    TorusVec3 B = coeffs_.back();
    for (int j = order() - 1; j >= 0; --j) B = B * t + coeffs_[j];
    return B;
  }

  // Residuals with the exact chart metric at height t.
  JetResidual residual(double t) const {
    const GridSize g = grid();
    const int J = order();
    TorusVec3 B(g), D1(g), D2(g), Bt(g);
    double tj = 1;
    for (int j = 0; j <= J; ++j) {
      B += tj * coeffs_[j];
      D1 += tj * dcoeffs_[j][0];
      D2 += tj * dcoeffs_[j][1];
      if (j + 1 <= J) Bt += (j + 1) * tj * coeffs_[j + 1];
      tj *= t;
    }
    JetResidual r;
    for (int p = 0; p < g.size(); ++p) {
      const Eigen::Vector3d nu = nu_.node(p);
      const Eigen::Vector3d e1 = Eigen::Vector3d(base_.DK().node(p).col(0)) + t * Eigen::Vector3d(dnu_[0].node(p));
      const Eigen::Vector3d e2 = Eigen::Vector3d(base_.DK().node(p).col(1)) + t * Eigen::Vector3d(dnu_[1].node(p));
      Eigen::Matrix2d G;
      G << e1.dot(e1), e1.dot(e2), e1.dot(e2), e2.dot(e2);
      const Eigen::Matrix2d H = G.inverse();
      const Eigen::Vector3d g1 = H(0, 0) * e1 + H(0, 1) * e2, g2 = H(1, 0) * e1 + H(1, 1) * e2;
      const Eigen::Vector3d b1 = D1.node(p), b2 = D2.node(p), bt = Bt.node(p);
      const Eigen::Vector3d curl = g1.cross(b1) + g2.cross(b2) + nu.cross(bt);
      const double div = g1.dot(b1) + g2.dot(b2) + nu.dot(bt);
      r.curl = std::max(r.curl, (curl - lambda_ * Eigen::Vector3d(B.node(p))).norm());
      r.div = std::max(r.div, std::abs(div));
    }
    return r;
  }

  // Chart point (phi, t) -> x.
  Eigen::Vector3d chart(const Eigen::Vector2d& phi, double t) const {
    const Eigen::ArrayXXd c = chart_ev_->eval(phi[0], phi[1], 0);
    return Eigen::Vector3d(c(0, 0), c(1, 0), c(2, 0)) + t * Eigen::Vector3d(c(3, 0), c(4, 0), c(5, 0));
  }

  // Value and ambient Jacobian at chart point (phi, t).
  void eval(const Eigen::Vector2d& phi, double t, Eigen::Vector3d& v, Eigen::Matrix3d& jac) const {
    if (t < t_min_ || t > t_max_)
      throw OutOfValidity("jet evaluated at t = " + detail::fmt(t) + " outside [" + detail::fmt(t_min_) + ", " +
                          detail::fmt(t_max_) + "]");
    const Eigen::ArrayXXd c = chart_ev_->eval(phi[0], phi[1], 1);
    const Eigen::ArrayXXd b = jet_ev_->eval(phi[0], phi[1], 1);
    Eigen::Matrix3d F = Eigen::Matrix3d::Zero();   // [d1 B, d2 B, dt B]
    v.setZero();
    double tj = 1, tjm = 1;
    for (int j = 0; j <= order(); ++j) {
      for (int k = 0; k < 3; ++k) {
        v[k] += tj * b(3 * j + k, 0);
        F(k, 0) += tj * b(3 * j + k, 1);
        F(k, 1) += tj * b(3 * j + k, 2);
        if (j > 0) F(k, 2) += j * tjm * b(3 * j + k, 0);
      }
      if (j > 0) tjm *= t;
      tj *= t;
    }
    Eigen::Matrix3d Jc;
    for (int k = 0; k < 3; ++k) {
      Jc(k, 0) = c(k, 1) + t * c(3 + k, 1);
      Jc(k, 1) = c(k, 2) + t * c(3 + k, 2);
      Jc(k, 2) = c(3 + k, 0);
    }
    jac = F * Jc.inverse();
  }

  // Chart coordinates of x by Newton from a guess; returns false on failure.
  bool locate(const Eigen::Vector3d& x, Eigen::Vector2d& phi, double& t, int iters = 30) const {
    for (int it = 0; it < iters; ++it) {
      const Eigen::ArrayXXd c = chart_ev_->eval(phi[0], phi[1], 1);
      Eigen::Vector3d r;
      Eigen::Matrix3d Jc;
      for (int k = 0; k < 3; ++k) {
        r[k] = c(k, 0) + t * c(3 + k, 0) - x[k];
        Jc(k, 0) = c(k, 1) + t * c(3 + k, 1);
        Jc(k, 1) = c(k, 2) + t * c(3 + k, 2);
        Jc(k, 2) = c(3 + k, 0);
      }
      const Eigen::Vector3d step = Jc.partialPivLu().solve(r);
      if (!step.allFinite()) return false;
      phi -= step.head<2>();
      t -= step[2];
      if (std::abs(t) > focal_) return false;
      if (step.norm() < 1e-15 * (1 + x.norm())) return true;
      if (it > 4 && step.norm() < 1e-13 * (1 + x.norm())) return true;
    }
    return false;
  }

  // Chart coordinates of x, using the last located point as guess.
  std::pair<Eigen::Vector2d, double> coordinates(const Eigen::Vector3d& x) const {
    struct Cache { const JetField* owner = nullptr; Eigen::Vector2d phi; double t = 0; };
    thread_local Cache cache;
    Eigen::Vector2d phi;
    double t = 0;
    if (cache.owner == this) {
      phi = cache.phi;
      t = cache.t;
      if (locate(x, phi, t)) {
        cache.phi = phi;
        cache.t = t;
        return {phi, t};
      }
    }
    phi = base_.nearest_node(x);
    t = 0;
    if (!locate(x, phi, t)) throw OutOfValidity("point is outside the jet chart");
    cache = {this, phi, t};
    return {phi, t};
  }

  // Log-log slope of the residuals on [t_max / 8, t_max / 2], outward side.
  JetResidual residual_slope(int samples = 6) const {
    std::vector<double> x, yc, yd;
    for (int k = 0; k < samples; ++k) {
      const double t = t_max_ / 8 * std::pow(4.0, double(k) / (samples - 1));
      const auto r = residual(t);
      x.push_back(std::log(t));
      yc.push_back(std::log(r.curl));
      yd.push_back(std::log(r.div));
    }
    auto fit = [&](const std::vector<double>& y) {
      const double n = double(x.size());
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (size_t i = 0; i < x.size(); ++i) { sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i]; }
      return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    return {fit(yc), fit(yd)};
  }

  AmbientField as_field() const;

  friend JetField extend_jet(const Embedding& K, const TorusVec2& X, double lambda, int J, const CkOptions& o);

 private:
  Embedding base_;
  TorusVec3 nu_;
  std::array<TorusVec3, 2> dnu_;
  std::vector<TorusVec3> coeffs_;
  std::vector<std::array<TorusVec3, 2>> dcoeffs_;
  double lambda_ = 0;
  double t_min_ = 0, t_max_ = 0, focal_ = 0;
  std::shared_ptr<const FourierEvaluator> chart_ev_, jet_ev_;
};

namespace detail {

// Taylor coefficients of the dual basis g^a(t), a = 1, 2.
inline std::vector<std::array<TorusVec3, 2>> dual_basis_series(const Embedding& K, const std::array<TorusVec3, 2>& dnu,
                                                             int M) {
  const GridSize g = K.grid();
  std::vector<std::array<TorusVec3, 2>> out(M + 1, {TorusVec3(g), TorusVec3(g)});
  for (int p = 0; p < g.size(); ++p) {
    const Eigen::Matrix<double, 3, 2> D = K.DK().node(p);
    Eigen::Matrix<double, 3, 2> N;
    N.col(0) = dnu[0].node(p);
    N.col(1) = dnu[1].node(p);
    const Eigen::Matrix2d G0i = K.G_inv().node(p);
    const Eigen::Matrix2d G1 = D.transpose() * N + N.transpose() * D;
    const Eigen::Matrix2d G2 = N.transpose() * N;
    Eigen::Matrix2d Hm2 = Eigen::Matrix2d::Zero(), Hm1 = Eigen::Matrix2d::Zero(), H = G0i;
    for (int m = 0; m <= M; ++m) {
      if (m > 0) H = -G0i * (G1 * Hm1 + G2 * Hm2);
      // g^a_m = sum_b H_m(a,b) K_b + H_{m-1}(a,b) nu_b
      for (int a = 0; a < 2; ++a) {
        const Eigen::Vector3d ga = D * H.row(a).transpose() + N * Hm1.row(a).transpose();
        out[m][a].set_node(p, ga);
      }
      Hm2 = Hm1;
      Hm1 = H;
    }
  }
  return out;
}

}  // namespace detail

inline JetField extend_jet(const Embedding& K, const TorusVec2& X, double lambda, int J, const CkOptions& o = {}) {
  if (J < 2) throw std::invalid_argument("extend_jet: order must be at least 2");
  const double closed = check_constraint(K, X);
  if (closed > o.constraint_tol)
    throw ConstraintViolated("d(X-flat) = " + detail::fmt(closed) + " > " + detail::fmt(o.constraint_tol));
  const GridSize g = K.grid();
  JetField F;
  F.base_ = K;
  F.nu_ = K.unit_normal();
  F.dnu_ = {d1(F.nu_), d2(F.nu_)};
  F.lambda_ = lambda;
  const double kmax = max_principal_curvature(K, F.nu_);
  F.focal_ = kmax > 0 ? 1.0 / kmax : std::numeric_limits<double>::infinity();

  const auto gs = detail::dual_basis_series(K, F.dnu_, J);
  F.coeffs_.push_back(TorusVec3::generate(g, [&](int p) { return Eigen::Vector3d(K.DK().node(p) * X.node(p)); }));
  F.dcoeffs_.push_back({d1(F.coeffs_[0]), d2(F.coeffs_[0])});
  for (int j = 0; j < J; ++j) {
    TorusVec3 next(g);
    for (int p = 0; p < g.size(); ++p) {
      const Eigen::Vector3d nu = F.nu_.node(p);
      Eigen::Vector3d f = -lambda * nu.cross(Eigen::Vector3d(F.coeffs_[j].node(p)));
      for (int m = 0; m <= j; ++m)
        for (int a = 0; a < 2; ++a) {
          const Eigen::Vector3d ga = gs[m][a].node(p);
          const Eigen::Vector3d db = F.dcoeffs_[j - m][a].node(p);
          f += -nu * ga.dot(db) + nu.cross(ga.cross(db));
        }
      next.set_node(p, f / (j + 1));
    }
    F.coeffs_.push_back(std::move(next));
    F.dcoeffs_.push_back({d1(F.coeffs_.back()), d2(F.coeffs_.back())});
  }

  std::vector<TorusScalar> jf;
  for (const auto& c : F.coeffs_)
    for (int k = 0; k < 3; ++k) jf.push_back(c[k]);
  F.jet_ev_ = std::make_shared<const FourierEvaluator>(jf);
  std::vector<TorusScalar> cf = flatten(K.K());
  for (int k = 0; k < 3; ++k) cf.push_back(F.nu_[k]);
  F.chart_ev_ = std::make_shared<const FourierEvaluator>(cf);

  // empirical validity radius inside the focal bound
  const double tf = o.focal_fraction * F.focal_;
  const double scale = std::max(1.0, F.coeffs_[0].max_norm());
  double tmax = 0;
  for (int k = 0; k <= o.validity_samples; ++k) {
    const double t = tf * std::pow(10.0, -4.0 * (1.0 - double(k) / o.validity_samples));
    const auto r = F.residual(t);
    const auto rm = F.residual(-t);
    if (std::max({r.curl, r.div, rm.curl, rm.div}) >= o.validity_tol * scale) break;
    tmax = t;
  }
  if (!(tmax > 0))
    throw FocalPoint("jet validity radius collapsed (focal bound " + detail::fmt(F.focal_) + ")");
  F.t_max_ = tmax;
  F.t_min_ = o.one_sided ? 0.0 : -tmax;
  return F;
}

inline AmbientField JetField::as_field() const {
  struct Adapter : AmbientField::Impl {
    std::shared_ptr<const JetField> F;
    Eigen::Vector3d eval(const Eigen::Vector3d& x) const override {
      Eigen::Vector3d v;
      Eigen::Matrix3d J;
      eval_jac(x, v, J);
      return v;
    }
    Eigen::Matrix3d jac(const Eigen::Vector3d& x) const override {
      Eigen::Vector3d v;
      Eigen::Matrix3d J;
      eval_jac(x, v, J);
      return J;
    }
    void eval_jac(const Eigen::Vector3d& x, Eigen::Vector3d& v, Eigen::Matrix3d& J) const override {
      const auto [phi, t] = F->coordinates(x);
      F->eval(phi, t, v, J);
    }
    FieldDescriptor descriptor() const override {
      FieldDescriptor d{"jet", {}};
      d.params["lambda"] = detail::fmt(F->lambda());
      d.params["order"] = std::to_string(F->order());
      d.params["t_max"] = detail::fmt(F->t_max());
      d.params["grid"] = to_string(F->grid());
      return d;
    }
  };
  auto a = std::make_shared<Adapter>();
  a->F = std::make_shared<const JetField>(*this);
  return AmbientField(a, true, lambda_);
}

// Value and Jacobian at (phi, t).
inline std::pair<Eigen::Vector3d, Eigen::Matrix3d> eval_jet(const JetField& F, const Eigen::Vector2d& phi, double t) {
  Eigen::Vector3d v;
  Eigen::Matrix3d J;
  F.eval(phi, t, v, J);
  return {v, J};
}

// Torus of revolution (major R, minor r) carrying the closed field
// Y = (C/rho^2) d_phi1 + b d_phi2, reparametrized so that Y = omega is linear:
// theta1 = phi1 + g(phi2). Normalized to [|Y|^2] = 1.
struct RevolutionSeed {
  Embedding K;
  Eigen::Vector2d omega;
  TorusVec2 X;          // constant omega, the Cauchy datum
  double C = 0, b = 0;
};

inline RevolutionSeed revolution_seed(double R, double r, double ratio, GridSize g) {
  if (!(r > 0 && R > r)) throw ConfigError("revolution seed needs R > r > 0");
  const TorusScalar rho = TorusScalar::sample(g, [&](double, double y) { return R + r * std::cos(y); });
  TorusScalar inv2(g);
  for (int p = 0; p < g.size(); ++p) inv2[p] = 1.0 / (rho[p] * rho[p]);
  const double m = inv2.mean();
  RevolutionSeed s;
  s.C = 1.0 / std::sqrt(m + r * r * ratio * ratio * m * m);
  s.b = ratio * s.C * m;
  s.omega = {s.C * m, s.b};
  // g' = (omega1 - C / rho^2) / b
  const TorusScalar gp = (s.omega[0] - s.C * inv2) * (1.0 / s.b);
  const TorusScalar gg = apply_multiplier(gp, [](int, int k2) { return k2 == 0 ? cplx(0) : 1.0 / cplx(0, k2); });
  TorusVec3 K(g);
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int p = i + g.n1 * j;
      const double a = node_angle(i, g.n1) - gg[p], y = node_angle(j, g.n2);
      const double q = R + r * std::cos(y);
      K.set_node(p, Eigen::Vector3d(q * std::cos(a), q * std::sin(a), r * std::sin(y)));
    }
  s.K = Embedding(std::move(K));
  s.X = TorusVec2(g);
  s.X[0] = TorusScalar(g, s.omega[0]);
  s.X[1] = TorusScalar(g, s.omega[1]);
  return s;
}

}  // namespace kamtori
