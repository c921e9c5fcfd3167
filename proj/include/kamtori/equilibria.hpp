#pragma once

// Layered equilibria: stepped pressure, free boundary with a vacuum shell,
// and the force-free variant with a piecewise constant factor.

#include <optional>
#include <string>
#include <vector>

#include "kamtori/ck_extend.hpp"
#include "kamtori/hj.hpp"
#include "kamtori/kam.hpp"

namespace kamtori {

// ---- pressures -------------------------------------------------------------

// Layer scale s_k = prod_{j=2}^k (1+b_j)^{-1/2}; index 0 is layer 1.
inline std::vector<double> layer_scales(const std::vector<double>& b) {
  std::vector<double> s(b.size(), 1.0);
  double q = 1;
  for (size_t k = 1; k < b.size(); ++k) {
    if (!(1 + b[k] > 0)) throw ConfigError("1 + b_" + std::to_string(k + 1) + " must be positive");
    q /= 1 + b[k];
    s[k] = std::sqrt(q);
  }
  return s;
}

struct Pressures {
  std::vector<double> p;
  bool distinct = true;
};

// p_k = p1 - 1/2 sum_{l=2}^k prod_{j=2}^l (1+b_j)^{-1} c_l. c[0], b[0] are unused.
inline Pressures pressures(const std::vector<double>& c, const std::vector<double>& b, double p1) {
  if (c.size() != b.size()) throw ConfigError("pressures: c and b lists differ in length");
  Pressures out;
  double sum = 0, q = 1;
  out.p.push_back(p1);
  for (size_t l = 1; l < c.size(); ++l) {
    if (!(1 + b[l] > 0)) throw ConfigError("1 + b_" + std::to_string(l + 1) + " must be positive");
    q /= 1 + b[l];
    sum += q * c[l];
    out.p.push_back(p1 - 0.5 * sum);
  }
  for (size_t i = 0; i < out.p.size(); ++i)
    for (size_t j = i + 1; j < out.p.size(); ++j)
      if (out.p[i] == out.p[j]) out.distinct = false;
  return out;
}

// p1 chosen so that the outermost pressure is p_boundary.
inline Pressures pressures_with_boundary(const std::vector<double>& c, const std::vector<double>& b,
                                         double p_boundary = 0.0) {
  const Pressures z = pressures(c, b, 0.0);
  return pressures(c, b, p_boundary - z.p.back());
}

// ---- interface diagnostics ----------------------------------------------------

inline TorusVec3 field_on(const Embedding& K, const AmbientField& B) {
  return TorusVec3::generate(K.grid(), [&](int p) { return B.eval(K.K().node(p)); });
}

// max | s1^2 |B1|^2 - s0^2 |B0|^2 - 2 dp | / s1^2 on the interface, dp = p_inner - p_outer.
// Dividing by s1^2 reports it in the units of the outer layer, where 2 dp / s1^2 = c.
inline double jump_residual(const Embedding& K, const AmbientField& B0, double s0, const AmbientField& B1, double s1,
                            double dp) {
  double r = 0;
  for (int p = 0; p < K.grid().size(); ++p) {
    const Eigen::Vector3d x = K.K().node(p);
    r = std::max(r, std::abs(s1 * s1 * B1.eval(x).squaredNorm() - s0 * s0 * B0.eval(x).squaredNorm() - 2 * dp));
  }
  return r / (s1 * s1);
}

// Unit normal pointing out of the enclosed region.
inline TorusVec3 outward_normal(const Embedding& K) {
  TorusVec3 N = K.unit_normal();
  if (K.volume() < 0) N *= -1.0;
  return N;
}

// Div_S J for a tangent field J: |n|^{-1} d_a (|n| j^a), j = G^{-1} DK^T J.
inline TorusScalar surface_divergence(const Embedding& K, const TorusVec3& J) {
  const GridSize g = K.grid();
  TorusVec2 q(g);
  TorusScalar nn(g);
  for (int p = 0; p < g.size(); ++p) {
    nn[p] = std::sqrt(K.n_sq()[p]);
    q.set_node(p, nn[p] * K.G_inv().node(p) * K.DK().node(p).transpose() * J.node(p));
  }
  TorusScalar d = d1(q[0]) + d2(q[1]);
  for (int p = 0; p < g.size(); ++p) d[p] /= nn[p];
  return d;
}

struct SheetReport {
  TorusVec3 J;
  double max = 0;
  double normal = 0;       // max |J.N|
  double divergence = 0;   // max |Div_S J|
};

inline SheetReport sheet_current(const Embedding& K, const TorusVec3& jump) {
  const TorusVec3 N = outward_normal(K);
  SheetReport s{cross(jump, N)};
  for (int p = 0; p < K.grid().size(); ++p) {
    s.max = std::max(s.max, s.J.node(p).norm());
    s.normal = std::max(s.normal, std::abs(s.J.node(p).dot(N.node(p))));
  }
  s.divergence = surface_divergence(K, s.J).max_abs();
  return s;
}

// ---- seed ---------------------------------------------------------------------

struct SeedSpec {
  double R = 3.0;
  double r = 1.0;
  double ratio = 0.6180339887498949;
  double lambda = 0.5;
  GridSize grid{32, 64};
};

struct Seed {
  Embedding K;
  Frequency2 omega;
  std::shared_ptr<const JetField> jet;
  AmbientField B;
  double lambda = 0;
};

struct EquilibriumOptions {
  int jet_order = 10;
  CkOptions ck{};
  KamOptions kam = [] {
    KamOptions k;
    k.tol = 1e-10;            // jet fields sit on a ~1e-11 invariance floor
    k.roundoff_floor = 1e-11;
    return k;
  }();
  HjOptions hj{};
  double gamma = 0.01;
  double tau = 1.5;
  double separation = 0.005;     // target mean normal distance between interfaces
  double lambda_gap = 0.05;      // guard band, in units of |T / a|
  double twist_floor = 1e-6;
  double type_floor = 1e-6;      // type-I determinant and type-II value
  double p_boundary = 0.0;
  double jump_tol = 1e-8;
  double continuity_tol = 1e-9;
  double sheet_div_tol = 1e-8;
  double h_jump_tol = 1e-9;
  double max_projection = 1e-7;  // larger non-closed parts are reported as ConstraintViolated
};

inline Frequency2 certify_on(const Eigen::Vector2d& w, GridSize g, const EquilibriumOptions& o) {
  return certify(w, o.gamma, o.tau, l1_bandwidth(g));
}

inline Seed make_seed(const SeedSpec& s, const EquilibriumOptions& o = {}) {
  const RevolutionSeed rs = revolution_seed(s.R, s.r, s.ratio, s.grid);
  Seed out;
  out.K = rs.K;
  out.omega = certify_on(rs.omega, s.grid, o);
  out.jet = std::make_shared<const JetField>(extend_jet(rs.K, rs.X, s.lambda, o.jet_order, o.ck));
  out.B = out.jet->as_field();
  out.lambda = s.lambda;
  return out;
}

// ---- layers -----------------------------------------------------------------------

struct Layer {
  int index = 1;
  std::optional<Embedding> inner;
  Embedding outer;
  Frequency2 omega_inner, omega_outer;
  double lambda = 0, c = 0, b = 0, scale = 1;
  std::shared_ptr<const JetField> jet;
  AmbientField field;
  double twist_inner = 0, twist_outer = 0;
  double type_I_det = 0;            // on the outer torus
  double forbidden_lambda = 0, lambda_gap = 0;
  double hj_norm = 0, hj_conj = 0, hj_closed = 0;
  int hj_iter = 0;
  double constraint = 0;            // |d X-flat| of the datum before projection
  double projected = 0;             // size of the co-exact part removed
  double kam_err = 0;
  int kam_steps = 0;
  double separation = 0;            // grid distance inner to outer
  double max_t = 0;                 // largest chart height reached by the outer torus
};

struct InterfaceReport {
  int k = 1;                         // between layer k and k+1
  double jump = 0;
  double continuity = 0;             // max |s_k B_k - s_{k+1} B_{k+1}|
  SheetReport sheet;
};

struct Equilibrium {
  std::string mode;
  std::vector<Layer> layers;
  std::vector<double> c, b, scale, p, T;
  bool pressures_distinct = true;
  std::vector<InterfaceReport> interfaces;
  std::optional<SheetReport> boundary_sheet;   // free boundary: h x N' on the outer torus
  double h_jump = 0;                           // free boundary: max ||h|^2 - |B|^2| on the plasma boundary
  double type_II = 0;
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
  std::vector<double> factor() const {
    std::vector<double> f;
    for (const auto& l : layers) f.push_back(l.lambda);
    return f;
  }
};

// Outward continuation to a Diophantine torus at mean normal distance ~ target.
struct OutwardStep {
  KamState state;
  Frequency2 omega;
  double distance = 0;
  int observed_side = 0;
  int runs = 0;
};

namespace detail {

inline double mean_normal_distance(const Embedding& K0, const Embedding& K) {
  const TorusVec3 d = resample(K.K(), K0.grid()) - K0.K();
  return dot(outward_normal(K0), d).mean();
}

inline double max_chart_height(const JetField& F, const Embedding& K) {
  double t = 0;
  for (int p = 0; p < K.grid().size(); ++p) t = std::max(t, std::abs(F.coordinates(K.K().node(p)).second));
  return t;
}

}  // namespace detail

inline OutwardStep step_outward(const Embedding& K0, const Frequency2& w0, const AmbientField& B, double T,
                                double target, const EquilibriumOptions& o) {
  if (std::abs(T) <= o.twist_floor) throw TwistTooSmall("|T| = " + detail::fmt(std::abs(T)) + " at the interface");
  const double sign = (T > 0 ? 1.0 : -1.0) * (K0.volume() > 0 ? 1.0 : -1.0);
  const double r0 = w0.ratio();
  double dr = sign * 1e-3 * std::abs(r0);
  Embedding Kc = K0;
  Frequency2 wc = w0;
  OutwardStep out{make_state(K0, w0, B), w0};
  bool doubled = false;
  for (int run = 0; run < 12; ++run) {
    Frequency2 tg;
    for (int tries = 0;; ++tries) {
      try {
        tg = certify_on({w0.omega[0], w0.omega[0] * (r0 + dr)}, Kc.grid(), o);
        break;
      } catch (const NotDiophantineUpToCutoff&) {
        if (tries > 20) throw;
        dr *= 1.0007;
      }
    }
    auto fam = continue_family(Kc, wc, B, {tg}, o.kam);
    if (!fam.front().state && !doubled) {
      // stalled on the band-limited correction, one retry on the doubled grid
      doubled = true;
      Kc = Kc.resampled(Kc.grid().doubled());
      wc = certify_on(wc.omega, Kc.grid(), o);
      tg = certify_on(tg.omega, Kc.grid(), o);
      fam = continue_family(Kc, wc, B, {tg}, o.kam);
    }
    const FamilyMember& m = fam.front();
    if (!m.state) throw DivergenceDetected("outward continuation failed: " + m.error);
    Kc = m.state->K;
    wc = certify_on(m.frequency.omega, Kc.grid(), o);
    out.state = *m.state;
    out.omega = wc;
    out.runs = run + 1;
    out.distance = detail::mean_normal_distance(K0, Kc);
    out.observed_side = out.distance > 0 ? 1 : -1;
    if (out.distance <= 0) throw DivergenceDetected("continuation moved inward");
    if (std::abs(out.distance - target) < 0.25 * target) return out;
    // linear in the ratio offset, at most a factor 8 per run
    const double f = std::clamp(target / out.distance, 0.125, 8.0);
    dr *= f;
  }
  throw DivergenceDetected("outward continuation did not reach distance " + detail::fmt(target));
}

inline void continue_layer_outward(Layer& L, const EquilibriumOptions& o) {
  const JetField& F = *L.jet;
  double target = std::min(o.separation, F.t_max() / 2);
  for (int attempt = 0; attempt < 4; ++attempt) {
    const OutwardStep st = step_outward(*L.inner, L.omega_inner, L.field, L.twist_inner, target, o);
    const double h = detail::max_chart_height(F, st.state.K);
    if (h <= F.t_max() / 2) {
      L.outer = st.state.K;
      L.omega_outer = st.omega;
      L.kam_err = st.state.err;
      L.kam_steps = st.runs;
      L.max_t = h;
      L.separation = grid_distance(*L.inner, L.outer);
      L.twist_outer = twist_data(L.outer, L.omega_outer.omega, L.field).T;
      TorusScalar Y(L.outer.grid());
      for (int p = 0; p < Y.size(); ++p) Y[p] = L.omega_outer.omega.dot(L.outer.G().node(p) * L.omega_outer.omega);
      L.type_I_det = nondeg_type_I(L.outer.G(), L.omega_outer.omega, Y).det;
      if (std::abs(L.type_I_det) <= o.type_floor)
        throw MFloorViolated("type-I determinant " + detail::fmt(L.type_I_det) + " on the outer torus of layer " +
                             std::to_string(L.index));
      return;
    }
    target /= 2;
  }
  throw OutOfValidity("outer torus of layer " + std::to_string(L.index) + " leaves the jet validity range");
}

inline Layer seed_layer(const Seed& s) {
  Layer L;
  L.index = 1;
  L.outer = s.K;
  L.omega_outer = s.omega;
  L.lambda = s.lambda;
  L.jet = s.jet;
  L.field = s.B;
  L.twist_outer = twist_data(s.K, s.omega.omega, s.B).T;
  TorusScalar Y(s.K.grid());
  for (int p = 0; p < Y.size(); ++p) Y[p] = s.omega.omega.dot(s.K.G().node(p) * s.omega.omega);
  L.type_I_det = nondeg_type_I(s.K.G(), s.omega.omega, Y).det;
  return L;
}

// lambda* = T_prev / a + lambda_prev makes the new twist vanish, a = [alpha.w_perp / |n|^2].
inline std::pair<double, double> forbidden_lambda(const Layer& prev, const EquilibriumOptions& o) {
  const auto tw = twist_beltrami(prev.outer, prev.omega_outer.omega, prev.field, prev.lambda);
  if (tw.alpha_term == 0) return {std::numeric_limits<double>::infinity(), 0.0};
  return {tw.T / tw.alpha_term + prev.lambda, o.lambda_gap * std::abs(tw.T / tw.alpha_term)};
}

// Next layer from the outer torus of prev with jump constant c (c = 0 and
// use_hj = false gives the force-free continuation of the tangential field).
inline Layer next_layer(const Layer& prev, double lambda, double c, bool use_hj, const EquilibriumOptions& o) {
  Layer L;
  L.index = prev.index + 1;
  L.lambda = lambda;
  L.c = c;
  if (lambda == prev.lambda)
    throw ForbiddenEigenvalue("layer " + std::to_string(L.index) + " repeats lambda = " + detail::fmt(lambda));
  std::tie(L.forbidden_lambda, L.lambda_gap) = forbidden_lambda(prev, o);
  if (std::abs(lambda - L.forbidden_lambda) <= L.lambda_gap)
    throw ForbiddenEigenvalue("lambda_" + std::to_string(L.index) + " = " + detail::fmt(lambda) +
                              " within " + detail::fmt(L.lambda_gap) + " of " + detail::fmt(L.forbidden_lambda));
  const Embedding& Ki = prev.outer;
  const Frequency2 wi = certify_on(prev.omega_outer.omega, Ki.grid(), o);
  TorusVec2 X(Ki.grid());
  Embedding K2 = Ki;
  Frequency2 w2 = wi;
  if (use_hj) {
    const HjSolution hj = solve_hj(c, Ki.G(), wi, o.hj);
    X = hj.X;
    L.b = hj.state.b;
    L.hj_norm = hj.norm_residual;
    L.hj_conj = hj.conjugacy_residual;
    L.hj_closed = hj.closedness_residual;
    L.hj_iter = hj.state.iter;
    K2 = Embedding(compose_shift(Ki.K(), hj.state.v));
    w2 = certify_on(hj.frequency, Ki.grid(), o);
  } else {
    X[0] = TorusScalar(Ki.grid(), wi.omega[0]);
    X[1] = TorusScalar(Ki.grid(), wi.omega[1]);
  }
  L.constraint = check_constraint(Ki, X);
  // KAM tori carry a small non-closed part inherited from the invariance error
  if (L.constraint > o.ck.constraint_tol && L.constraint < o.max_projection) X = closed_part(Ki.G(), Ki.G_inv(), X, &L.projected);
  L.jet = std::make_shared<const JetField>(extend_jet(Ki, X, lambda, o.jet_order, o.ck));
  L.field = L.jet->as_field();
  L.inner = K2;
  L.omega_inner = w2;
  L.twist_inner = twist_data(K2, w2.omega, L.field).T;
  if (std::abs(L.twist_inner) <= o.twist_floor)
    throw TwistTooSmall("layer " + std::to_string(L.index) + " twist " + detail::fmt(L.twist_inner));
  continue_layer_outward(L, o);
  return L;
}

inline void finish(Equilibrium& eq, const EquilibriumOptions& o) {
  eq.c.clear();
  eq.b.clear();
  eq.T.clear();
  for (const auto& l : eq.layers) {
    eq.c.push_back(l.c);
    eq.b.push_back(l.b);
    eq.T.push_back(l.twist_outer);
  }
  eq.scale = layer_scales(eq.b);
  for (size_t k = 0; k < eq.layers.size(); ++k) eq.layers[k].scale = eq.scale[k];
  const Pressures P = pressures_with_boundary(eq.c, eq.b, o.p_boundary);
  eq.p = P.p;
  eq.pressures_distinct = P.distinct;
  eq.interfaces.clear();
  for (size_t k = 0; k + 1 < eq.layers.size(); ++k) {
    const Layer &A = eq.layers[k], &Bl = eq.layers[k + 1];
    const Embedding& K = A.outer;
    InterfaceReport r;
    r.k = int(k + 1);
    r.jump = jump_residual(K, A.field, eq.scale[k], Bl.field, eq.scale[k + 1], eq.p[k] - eq.p[k + 1]);
    const TorusVec3 d = eq.scale[k] * field_on(K, A.field) - eq.scale[k + 1] * field_on(K, Bl.field);
    r.continuity = d.max_norm();
    r.sheet = sheet_current(K, d);
    if (r.jump >= o.jump_tol) eq.failures.push_back("jump residual " + detail::fmt(r.jump) + " on interface " + std::to_string(r.k));
    if (r.sheet.divergence >= o.sheet_div_tol)
      eq.failures.push_back("sheet divergence " + detail::fmt(r.sheet.divergence) + " on interface " + std::to_string(r.k));
    eq.interfaces.push_back(std::move(r));
  }
  for (size_t k = 1; k < eq.layers.size(); ++k) {
    const Layer& L = eq.layers[k];
    if (!(L.separation > 0)) eq.failures.push_back("layer " + std::to_string(L.index) + " touches its inner torus");
    if (!(L.outer.volume() > eq.layers[k - 1].outer.volume()))
      eq.failures.push_back("layer " + std::to_string(L.index) + " is not nested outside layer " + std::to_string(k));
  }
}

inline Equilibrium build_stepped(const Seed& seed, const std::vector<double>& lambdas, const std::vector<double>& cs,
                                 const EquilibriumOptions& o = {}) {
  if (lambdas.size() != cs.size()) throw ConfigError("lambda and c lists differ in length");
  if (lambdas.empty() || lambdas.front() != seed.lambda) throw ConfigError("lambda list must start with the seed lambda");
  Equilibrium eq;
  eq.mode = "stepped";
  eq.layers.push_back(seed_layer(seed));
  if (std::abs(eq.layers[0].type_I_det) <= o.type_floor)
    throw MFloorViolated("type-I determinant " + detail::fmt(eq.layers[0].type_I_det) + " on the seed torus");
  for (size_t k = 1; k < lambdas.size(); ++k) {
    try {
      eq.layers.push_back(next_layer(eq.layers.back(), lambdas[k], cs[k], true, o));
    } catch (Error& e) {
      e.prepend("layer " + std::to_string(k + 1) + ": ");
      throw;
    }
  }
  finish(eq, o);
  return eq;
}

inline Equilibrium build_force_free(const Seed& seed, const std::vector<double>& lambdas,
                                    const EquilibriumOptions& o = {}) {
  if (lambdas.empty() || lambdas.front() != seed.lambda) throw ConfigError("lambda list must start with the seed lambda");
  Equilibrium eq;
  eq.mode = "force-free";
  eq.layers.push_back(seed_layer(seed));
  for (size_t k = 1; k < lambdas.size(); ++k) {
    try {
      eq.layers.push_back(next_layer(eq.layers.back(), lambdas[k], 0.0, false, o));
    } catch (Error& e) {
      e.prepend("layer " + std::to_string(k + 1) + ": ");
      throw;
    }
  }
  finish(eq, o);
  for (const auto& r : eq.interfaces)
    if (r.continuity >= o.continuity_tol)
      eq.failures.push_back("field jumps by " + detail::fmt(r.continuity) + " on interface " + std::to_string(r.k));
  return eq;
}

// Plasma seed plus a vacuum shell: h is the harmonic (lambda = 0) extension of
// B on the plasma boundary, the outer torus carries the sheet h x N'.
inline Equilibrium build_free_boundary(const Seed& seed, const EquilibriumOptions& o = {}) {
  Equilibrium eq;
  eq.mode = "free-boundary";
  eq.layers.push_back(seed_layer(seed));
  eq.type_II = nondeg_type_II_normalized(seed.K, seed.omega.omega, seed.B, seed.lambda);
  if (std::abs(eq.type_II) <= o.type_floor) throw TypeIIDegenerate("type-II value " + detail::fmt(eq.type_II));
  Layer L;
  L.index = 2;
  L.lambda = 0;
  TorusVec2 X(seed.K.grid());
  X[0] = TorusScalar(seed.K.grid(), seed.omega.omega[0]);
  X[1] = TorusScalar(seed.K.grid(), seed.omega.omega[1]);
  L.constraint = check_constraint(seed.K, X);
  L.jet = std::make_shared<const JetField>(extend_jet(seed.K, X, 0.0, o.jet_order, o.ck));
  L.field = L.jet->as_field();
  L.inner = seed.K;
  L.omega_inner = seed.omega;
  L.twist_inner = twist_data(seed.K, seed.omega.omega, L.field).T;
  if (std::abs(L.twist_inner) <= o.twist_floor) throw TypeIIDegenerate("vacuum twist " + detail::fmt(L.twist_inner));
  continue_layer_outward(L, o);
  eq.layers.push_back(std::move(L));
  finish(eq, o);
  const Layer& V = eq.layers.back();
  eq.h_jump = 0;
  for (int p = 0; p < seed.K.grid().size(); ++p) {
    const Eigen::Vector3d x = seed.K.K().node(p);
    eq.h_jump = std::max(eq.h_jump, std::abs(V.field.eval(x).squaredNorm() - seed.B.eval(x).squaredNorm()));
  }
  if (eq.h_jump >= o.h_jump_tol) eq.failures.push_back("|h|^2 - |B|^2 = " + detail::fmt(eq.h_jump));
  eq.boundary_sheet = sheet_current(V.outer, field_on(V.outer, V.field));
  if (eq.boundary_sheet->divergence >= o.sheet_div_tol)
    eq.failures.push_back("boundary sheet divergence " + detail::fmt(eq.boundary_sheet->divergence));
  return eq;
}

// Volumetric part lambda_k s_k B_k per layer and sheets per interface.
struct CurrentDistribution {
  std::vector<std::string> volumetric;
  std::vector<SheetReport> sheets;
};

inline CurrentDistribution current_distribution(const Equilibrium& eq) {
  CurrentDistribution cd;
  for (size_t k = 0; k < eq.layers.size(); ++k)
    cd.volumetric.push_back(detail::fmt(eq.layers[k].lambda * eq.scale[k]) + " * B_" + std::to_string(k + 1));
  for (const auto& r : eq.interfaces) cd.sheets.push_back(r.sheet);
  if (eq.boundary_sheet) cd.sheets.push_back(*eq.boundary_sheet);
  return cd;
}

}  // namespace kamtori
