#include <gtest/gtest.h>

#include <random>

#include "kamtori/torus_geom.hpp"

using namespace kamtori;

namespace {

const GridSize grid{16, 64};

// Random smooth embedding near a ring: circular torus plus small trig bumps.
Embedding random_torus(unsigned seed, GridSize g = {64, 64}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0, 0.02);
  std::array<double, 12> c;
  for (auto& x : c) x = N(rng);
  TorusVec3 K(g);
  for (int k = 0; k < 3; ++k)
    K[k] = TorusScalar::sample(g, [&](double a, double b) {
      const double r = 0.6 + c[0] * std::cos(a + b) + c[1] * std::sin(2 * b - a) + c[2] * std::cos(3 * b);
      const double rho = 3.0 + r * std::cos(b) + c[3] * std::sin(a);
      const Eigen::Vector3d x(rho * std::cos(a), rho * std::sin(a), r * std::sin(b) + c[4] * std::cos(a - b));
      return x[k];
    });
  return Embedding(std::move(K));
}

Eigen::Vector3d trefoil(double t) {
  return {std::sin(t) + 2 * std::sin(2 * t), std::cos(t) - 2 * std::cos(2 * t), -std::sin(3 * t)};
}

// Unknotted curve winding three times poloidally.
Eigen::Vector3d wobble(double t) {
  return {(2 + 0.3 * std::cos(3 * t)) * std::cos(t), (2 + 0.3 * std::cos(3 * t)) * std::sin(t), 0.4 * std::sin(3 * t)};
}

}  // namespace

TEST(TorusGeom, InvarianceErrorExamples) {
  const NestedFamily fam(3.0, {{1.0}, {0.3}}, 0.1, 1.0);
  const auto K = fam.torus(0.5, grid);
  const Eigen::Vector2d w = fam.omega(0.5);
  EXPECT_LT(invariance_error(K, w, fam.field()).max_abs(), 1e-10);

  // wrong frequency: the defect is exactly 0.1 d2 K
  const double want = 0.1 * d2(K.K()).max_norm();
  EXPECT_NEAR(invariance_error(K, w + Eigen::Vector2d(0, 0.1), fam.field()).max_norm(), want, 1e-8);

  const double d = 1e-3;
  const double e = invariance_error(K, w, perturb_div_free(fam.field(), d, 4)).max_norm();
  EXPECT_GE(e, d / 10);
  EXPECT_LE(e, 10 * d);
}

TEST(TorusGeom, EmbeddingCacheIsConsistent) {
  const auto K = random_torus(3);
  const TorusVec3 n = cross(d1(K.K()), d2(K.K()));
  EXPECT_LT((n - K.n()).max_abs(), 1e-13 * K.n().max_abs());
  for (int p = 0; p < K.grid().size(); ++p) {
    const Eigen::Matrix2d G = K.G().node(p);
    EXPECT_NEAR(G(0, 1), G(1, 0), 1e-14);
    EXPECT_GT(G.determinant(), 0);
  }
}

TEST(TorusGeom, SolvabilityAverageAndNormalIdentity) {
  for (unsigned s = 0; s < 5; ++s) {
    const auto K = random_torus(10 + s);
    const auto B = trig_curl_field(1.0, 100 + s);
    const Eigen::Vector2d w(1.0, 0.618);
    const auto E = invariance_error(K, w, B);
    EXPECT_LT(std::abs(dot(K.n(), E).mean()), 1e-10 * E.max_norm());
    const double scale = l_omega(K.n(), w).max_norm() + K.n().max_norm();
    EXPECT_LT(normal_identity_residual(K, w, B).max_norm(), 1e-9 * scale);
  }
}

TEST(TorusGeom, FrameRoundTrip) {
  const auto K = random_torus(5);
  const auto B = trig_curl_field(1.0, 8);
  TorusVec3 v(K.grid());
  for (int p = 0; p < K.grid().size(); ++p) v.set_node(p, B.eval(K.K().node(p)));
  const auto [t, s] = frame_split(K, v);
  EXPECT_LT((frame_combine(K, t, s) - v).max_abs(), 1e-12);
}

TEST(TorusGeom, NoShearNoTwist) {
  const NestedFamily fam(3.0, {{1.0}, {0.3}}, 0.1, 1.0);
  const auto t = twist_data(fam.torus(0.5, grid), fam.omega(0.5), fam.field());
  EXPECT_LT(std::abs(t.T), 1e-8);
  // the field-line oracle sees equal rotation numbers on nearby tori
  const double r1 = fieldline_rotation_number(fam.field(), fam.torus(0.45, grid), 100.0).value;
  const double r2 = fieldline_rotation_number(fam.field(), fam.torus(0.55, grid), 100.0).value;
  EXPECT_NEAR(r1, r2, 1e-8);
}

TEST(TorusGeom, TwistSignFollowsRotationShear) {
  for (double c : {1.0, -0.5}) {
    const NestedFamily fam(3.0, {{1.0}, {0.25, c}}, 0.1, 1.0);
    const double s = 0.5, h = 0.02;
    const auto t = twist_data(fam.torus(s, grid), fam.omega(s), fam.field());
    const double rp = fieldline_rotation_number(fam.field(), fam.torus(s + h, grid), 100.0).value;
    const double rm = fieldline_rotation_number(fam.field(), fam.torus(s - h, grid), 100.0).value;
    EXPECT_GT(std::abs(t.T), 1e-6);
    EXPECT_EQ(t.T > 0, rp - rm > 0) << "c=" << c << " T=" << t.T;
  }
}

TEST(TorusGeom, ThinTubeTwistScalesQuadratically) {
  // omega2 = a + c s^4 gives T ~ 4 c s^2 / R
  const NestedFamily fam(3.0, {{1.0}, {0.3, 0.0, 0.0, 0.0, 0.5}}, 0.01, 1.0);
  std::vector<double> x, y;
  for (double e : {0.05, 0.1, 0.2}) {
    const auto t = twist_data(fam.torus(e, grid), fam.omega(e), fam.field());
    x.push_back(std::log(e));
    y.push_back(std::log(std::abs(t.T)));
  }
  const double slope = (y[2] - y[0]) / (x[2] - x[0]);
  EXPECT_NEAR(slope, 2.0, 0.2);
}

TEST(TorusGeom, BeltramiFormWithZeroLambda) {
  const NestedFamily fam(3.0, {{1.0}, {0.25, 1.0}}, 0.1, 1.0);
  const auto K = fam.torus(0.5, grid);
  const Eigen::Vector2d w = fam.omega(0.5);
  const auto t = twist_beltrami(K, w, fam.field(), 0.0);
  EXPECT_GT(t.F.min(), 0.0);
  // alpha = J G w on an invariant torus
  for (int p = 0; p < K.grid().size(); p += 7) {
    const Eigen::Vector2d Gw = K.G().node(p) * w;
    EXPECT_NEAR(t.alpha[0][p], Gw[1], 1e-9);
    EXPECT_NEAR(t.alpha[1][p], -Gw[0], 1e-9);
  }
  const double v = nondeg_type_II(K, w, fam.field(), 0.0);
  EXPECT_DOUBLE_EQ(v, t.T);
  EXPECT_GT(std::abs(v), 1e-6);
  // B -> 2B: the torus keeps its parametrization with frequency 2w
  const double v2 = nondeg_type_II_normalized(K, 2 * w, scaled(fam.field(), 2.0), 0.0);
  EXPECT_NEAR(v2, nondeg_type_II_normalized(K, w, fam.field(), 0.0), 1e-10 * std::abs(v2));
}

TEST(TorusGeom, TypeIHomogeneous) {
  const GridSize g{16, 16};
  TorusMat2 G(g);
  G(0, 0) = TorusScalar(g, 1.0);
  G(1, 1) = TorusScalar(g, 1.0);
  const auto r = nondeg_type_I(G, {1, (std::sqrt(5.0) - 1) / 2}, TorusScalar(g, 1.0));
  EXPECT_LT(r.R.max_abs(), 1e-15);
  EXPECT_LT((r.M - Eigen::Matrix2d::Identity()).norm(), 1e-15);
  EXPECT_NEAR(r.det, 1.0, 1e-15);
}

TEST(TorusGeom, TypeIAgainstQuadrature) {
  const GridSize g{32, 32};
  const Eigen::Vector2d w(1, (std::sqrt(5.0) - 1) / 2);
  TorusMat2 G(g);
  G(0, 0) = TorusScalar(g, 1.0);
  G(1, 1) = TorusScalar(g, 1.0);
  const auto xs = TorusScalar::sample(g, [](double a, double) { return 1 + 0.1 * std::cos(a); });
  const auto r = nondeg_type_I(G, w, xs);
  EXPECT_LT(r.residual, 1e-11);
  EXPECT_NEAR(r.det, 1.0, 0.05);
  // closed form R = -0.1 sin(phi1) / w1, quadrature on the doubled grid
  const GridSize f = g.doubled();
  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
  for (int j = 0; j < f.n2; ++j)
    for (int i = 0; i < f.n1; ++i) {
      const double R1 = -0.1 * std::cos(node_angle(i, f.n1)) / w[0];
      Eigen::Matrix2d P;
      P << 1 - w[0] * R1, -w[1] * R1, 0, 1;
      M += P;
    }
  M /= f.size();
  EXPECT_LT((r.M - M).norm(), 1e-13);
}

TEST(TorusGeom, PlanarCircleHasNoTorsion) {
  const auto c = ClosedCurve::from_function([](double t) { return Eigen::Vector3d(2 * std::cos(t), 2 * std::sin(t), 0); }, 64);
  EXPECT_NEAR(c.length(), 4 * std::numbers::pi, 1e-12);
  EXPECT_LT(std::abs(c.mean_torsion()), 1e-12);
  const auto K = tube_embedding(c, 0.2, 32);
  EXPECT_GT(K.min_normal(), 0.0);
  // standard torus: distance to the core circle is 0.2 everywhere
  for (int p = 0; p < K.grid().size(); ++p) {
    const Eigen::Vector3d x = K.K().node(p);
    EXPECT_NEAR(std::hypot(std::hypot(x[0], x[1]) - 2, x[2]), 0.2, 1e-12);
  }
}

TEST(TorusGeom, TrefoilTorsionMatchesQuadrature) {
  const auto c = ClosedCurve::from_function(trefoil, 256);
  EXPECT_LT(c.speed_spread(), 1e-10);
  EXPECT_NEAR(c.mean_torsion(), torsion_quadrature(trefoil, 512), 1e-9);
  EXPECT_GT(std::abs(c.mean_torsion()), 1e-3);
}

TEST(TorusGeom, TubeImmersionAndSelfIntersection) {
  const auto c = ClosedCurve::from_function(wobble, 128);
  const double kmax = c.max_curvature();
  for (double f : {0.2, 0.5, 0.8}) EXPECT_GT(tube_embedding(c, f / kmax, 32).min_normal(), 0.0);
  EXPECT_THROW(tube_embedding(c, 1.2 / kmax, 32), SelfIntersection);
  // trefoil strands pass within 2 eps of each other
  const auto t = ClosedCurve::from_function(trefoil, 128);
  EXPECT_THROW(tube_embedding(t, 0.8 / t.max_curvature(), 32), SelfIntersection);
  // a doubled segment has zero curvature
  EXPECT_THROW(ClosedCurve::from_function([](double t) { return Eigen::Vector3d(std::cos(t), 0, 0); }, 64), GeometryError);
}
