#pragma once

// Newton iteration for invariant tori with a free frequency scale, and
// continuation to nearby frequencies.

#include <optional>
#include <string>
#include <vector>

#include "kamtori/torus_geom.hpp"

namespace kamtori {

struct KamOptions {
  double tol = 1e-11;
  int max_iter = 12;
  double twist_floor = 1e-8;
  double roundoff_floor = 1e-12;
  double tail_tol = 1e-10;
  bool refine_grid = true;
  double band_fraction = 2.0 / 3.0;   // corrections keep |k_i| < fraction * N_i / 2
  CohomOptions cohom{};
};

struct KamLogEntry {
  int iter = 0;
  double err = 0;
  double Lambda = 1;
  double T = 0;
  double min_divisor = 0;
  double mean_nE = 0;   // |[n.E]| / |E|
  double cond = 0;      // condition number of the averaged 2x2 system
};

struct KamState {
  Embedding K;
  double Lambda = 1;
  double err = 0;
  double T = 0;
  int iter = 0;
  std::vector<KamLogEntry> history;
  bool refined = false;
};

// One linearized correction and its ingredients.
struct KamCorrection {
  TorusVec3 E;
  FieldOnTorus field;
  TorusVec2 A;
  TorusVec2 xi1;
  TorusScalar xi2;
  double mu = 0;            // delta omega = mu omega
  double T = 0;
  double mean_nE = 0;
  double cond = 0;
  TorusVec3 Delta;
};

inline double sup_error(const TorusVec3& E) { return E.max_norm(); }

template <int R, int C>
TorusTensor<R, C> truncate_band(const TorusTensor<R, C>& t, double fraction) {
  const GridSize g = t.grid();
  const double m1 = fraction * g.n1 / 2, m2 = fraction * g.n2 / 2;
  return t.map([&](const TorusScalar& x) {
    return apply_multiplier(x, [&](int k1, int k2) { return (std::abs(k1) < m1 && std::abs(k2) < m2) ? cplx(1) : cplx(0); });
  });
}

inline KamCorrection kam_correction(const Embedding& K, const Frequency2& w, const AmbientField& B,
                                    const KamOptions& o = {}) {
  const GridSize g = K.grid();
  const Eigen::Vector2d om = w.omega;
  KamCorrection c;
  c.field = sample_field(K, B);
  c.E = l_omega(K.K(), om) - c.field.B;
  c.A = TorusVec2(g);
  TorusScalar nE(g);
  TorusVec2 r(g);
  for (int p = 0; p < g.size(); ++p) {
    const Eigen::Matrix3d DB = c.field.DB.node(p);
    const Eigen::Vector3d n = K.n().node(p);
    const Eigen::Matrix2d Gi = K.G_inv().node(p);
    const Eigen::Matrix<double, 3, 2> DK = K.DK().node(p);
    c.A.set_node(p, -Gi * DK.transpose() * ((DB.transpose() + DB) * n) / K.n_sq()[p]);
    nE[p] = n.dot(c.E.node(p));
    r.set_node(p, Gi * DK.transpose() * c.E.node(p));
  }
  const Eigen::Vector2d Am = c.A.mean();
  c.T = twist_of(Am, om);
  if (std::abs(c.T) <= o.twist_floor) throw TwistTooSmall("|T| = " + detail::fmt(std::abs(c.T)));
  const double en = std::max(sup_error(c.E), 1e-300);
  c.mean_nE = std::abs(nE.mean()) / en;

  const TorusScalar xi2t = solve_cohomological(-(nE - nE.mean()), w, o.cohom);
  // [A1 w1; A2 w2] ([xi2], mu) = -([A xi2~] + [r])
  Eigen::Matrix2d S;
  S << Am[0], om[0], Am[1], om[1];
  const Eigen::Vector2d rhs = -(Eigen::Vector2d((c.A[0] * xi2t).mean(), (c.A[1] * xi2t).mean()) + r.mean());
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(S);
  c.cond = svd.singularValues()[0] / svd.singularValues()[1];
  const Eigen::Vector2d sol = S.partialPivLu().solve(rhs);
  c.xi2 = xi2t + sol[0];
  c.mu = sol[1];

  c.xi1 = TorusVec2(g);
  for (int i = 0; i < 2; ++i) {
    TorusScalar f = -r[i] - c.A[i] * c.xi2 - c.mu * om[i];
    f -= f.mean();
    c.xi1[i] = solve_cohomological(f, w, o.cohom);
  }
  c.Delta = frame_combine(K, c.xi1, c.xi2);
  if (o.band_fraction < 1) c.Delta = truncate_band(c.Delta, o.band_fraction);
  return c;
}

// R(Delta) + E + DK delta_w - (DK E1 + n E2 / |n|^2), second order in E.
inline TorusVec3 quadratic_identity_residual(const Embedding& K, const Frequency2& w, const KamCorrection& c) {
  const GridSize g = K.grid();
  const Eigen::Vector2d om = w.omega;
  const TorusVec3 LD = l_omega(c.Delta, om);
  const TorusMat32 DE = jacobian(c.E);
  const TorusVec3 S = defect_normal_variation(K, c.E);
  TorusVec3 out(g);
  for (int p = 0; p < g.size(); ++p) {
    const Eigen::Matrix<double, 3, 2> DK = K.DK().node(p);
    const Eigen::Vector3d n = K.n().node(p);
    const double nn = K.n_sq()[p];
    const Eigen::Matrix2d Gi = K.G_inv().node(p);
    const Eigen::Vector2d x1 = c.xi1.node(p);
    const double x2 = c.xi2[p];
    const Eigen::Vector2d Ap = Gi * DK.transpose() * S.node(p) / nn;
    const double b = -S.node(p).dot(n) / nn;
    const Eigen::Vector2d E1 = Gi * DK.transpose() * DE.node(p) * x1 + Ap * x2;
    const double E2 = n.dot(DE.node(p) * x1) + b * x2;
    const Eigen::Vector3d R = LD.node(p) - c.field.DB.node(p) * c.Delta.node(p);
    out.set_node(p, R + c.E.node(p) + DK * (c.mu * om) - (DK * E1 + n * (E2 / nn)));
  }
  return out;
}

namespace detail {

inline Frequency2 current_frequency(const Frequency2& w0, double Lambda) { return scaled(w0, Lambda); }

inline double embedding_scale(const Embedding& K) { return std::max(1.0, K.DK().max_norm()); }

}  // namespace detail

inline KamState make_state(const Embedding& K0, const Frequency2& w0, const AmbientField& B) {
  KamState s{K0};
  s.err = sup_error(invariance_error(K0, w0.omega, B));
  s.T = twist_data(K0, w0.omega, B).T;
  s.history.push_back({0, s.err, 1.0, s.T, w0.min_divisor, 0.0, 0.0});
  return s;
}

inline KamState newton_step(const KamState& st, const AmbientField& B, const Frequency2& w0, const KamOptions& o = {}) {
  const Frequency2 w = detail::current_frequency(w0, st.Lambda);
  const KamCorrection c = kam_correction(st.K, w, B, o);
  KamState out = st;
  out.K = Embedding(st.K.K() + c.Delta);
  out.Lambda = st.Lambda * (1 + c.mu);
  out.iter = st.iter + 1;
  out.T = c.T;
  out.err = sup_error(invariance_error(out.K, out.Lambda * w0.omega, B));
  out.history.back().T = c.T;
  out.history.back().mean_nE = c.mean_nE;
  out.history.back().cond = c.cond;
  out.history.push_back({out.iter, out.err, out.Lambda, 0.0, w.min_divisor, 0.0, 0.0});
  if (out.iter > 1 && out.err > st.err && st.err > o.roundoff_floor * detail::embedding_scale(st.K))
    throw DivergenceDetected("invariance error grew from " + detail::fmt(st.err) + " to " + detail::fmt(out.err) +
                             " at iteration " + std::to_string(out.iter));
  return out;
}

inline KamState run_newton(const Embedding& K0, const Frequency2& w_in, const AmbientField& B, const KamOptions& o = {}) {
  Frequency2 w0 = w_in;
  KamState s = make_state(K0, w0, B);
  while (s.err >= o.tol) {
    if (s.iter >= o.max_iter)
      throw MaxIterExceeded("invariance error " + detail::fmt(s.err) + " after " + std::to_string(s.iter) + " steps");
    s = newton_step(s, B, w0, o);
    if (o.refine_grid && tail_ratio(s.K.K()) > o.tail_tol) {
      if (s.refined)
        throw DivergenceDetected("embedding spectrum not resolved on grid " + to_string(s.K.grid()));
      s.K = s.K.resampled(s.K.grid().doubled());
      s.refined = true;
      if (w0.k_max < l1_bandwidth(s.K.grid())) w0 = certify(w0.omega, w0.gamma, w0.tau, l1_bandwidth(s.K.grid()));
      s.err = sup_error(invariance_error(s.K, s.Lambda * w0.omega, B));
      s.history.back().err = s.err;
    }
  }
  return s;
}

// Invariance error of the final torus on the doubled grid.
inline double validate_doubled(const KamState& s, const Frequency2& w0, const AmbientField& B) {
  const Embedding Kd = s.K.resampled(s.K.grid().doubled());
  return sup_error(invariance_error(Kd, s.Lambda * w0.omega, B));
}

// Exponent p of e_{n+1} ~ C e_n^p from consecutive error ratios above floor.
inline double convergence_exponent(const std::vector<KamLogEntry>& h, double floor) {
  std::vector<double> e;
  for (const auto& x : h) e.push_back(x.err);
  double best = 0;
  int n = 0;
  double sum = 0;
  for (size_t i = 0; i + 2 < e.size(); ++i) {
    if (e[i + 2] <= floor) break;
    const double p = std::log(e[i + 2] / e[i + 1]) / std::log(e[i + 1] / e[i]);
    sum += p;
    ++n;
  }
  if (n == 0) {
    // two pre-roundoff errors only: use e1 = C e0^p with C = 1
    for (size_t i = 0; i + 1 < e.size(); ++i)
      if (e[i + 1] > floor && e[i] < 1) best = std::max(best, std::log(e[i + 1]) / std::log(e[i]));
    return best;
  }
  return sum / n;
}

struct FamilyMember {
  double target_ratio = 0;
  Frequency2 frequency;   // converged frequency, Lambda times the scaled target
  std::optional<KamState> state;
  std::string error;
  int exit_code = 0;
  int predicted_side = 0;   // sign of (target - base ratio) / T
  int observed_side = 0;    // sign of [n.(K - K0)]
};

// One Newton run per target, all started from K0; failures are recorded per target.
inline std::vector<FamilyMember> continue_family(const Embedding& K0, const Frequency2& w0, const AmbientField& B,
                                                 const std::vector<Frequency2>& targets, const KamOptions& o = {}) {
  const double T0 = twist_data(K0, w0.omega, B).T;
  std::vector<FamilyMember> out;
  for (const auto& t : targets) {
    FamilyMember m;
    m.target_ratio = t.ratio();
    // keep the toroidal component so Lambda stays near 1
    const Frequency2 tw = scaled(t, w0.omega[0] / t.omega[0]);
    const double dr = t.ratio() - w0.ratio();
    m.predicted_side = dr == 0 ? 0 : ((dr / T0 > 0) ? 1 : -1);
    try {
      m.state = run_newton(K0, tw, B, o);
      m.frequency = scaled(tw, m.state->Lambda);
      const TorusVec3 Kr = resample(m.state->K.K(), K0.grid());
      const double d = dot(K0.n(), Kr - K0.K()).mean() / K0.n().max_norm();
      m.observed_side = std::abs(d) < o.tol ? 0 : (d > 0 ? 1 : -1);
    } catch (const Error& e) {
      m.error = e.what();
      m.exit_code = exit_code(e);
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace kamtori
