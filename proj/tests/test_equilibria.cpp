#include <gtest/gtest.h>

#include "kamtori/equilibria.hpp"

using namespace kamtori;

namespace {

const Seed& seed() {
  static const Seed s = make_seed({});
  return s;
}

const Equilibrium& stepped2() {
  static const Equilibrium e = build_stepped(seed(), {0.5, 1.0}, {0.0, 1e-3});
  return e;
}

const Equilibrium& stepped3() {
  static const Equilibrium e = build_stepped(seed(), {0.5, 1.0, 1.5}, {0.0, 1e-3, 1e-3});
  return e;
}

const Equilibrium& force_free() {
  static const Equilibrium e = build_force_free(seed(), {0.5, 1.0});
  return e;
}

const Equilibrium& free_boundary() {
  static const Equilibrium e = build_free_boundary(seed());
  return e;
}

// p_k - p_{k+1} from the stored constants, one interface at a time
std::vector<double> telescoped(const Equilibrium& eq) {
  std::vector<double> d;
  double q = 1;
  for (size_t k = 1; k < eq.c.size(); ++k) {
    q *= 1 / (1 + eq.b[k]);
    d.push_back(0.5 * q * eq.c[k]);
  }
  return d;
}

double tangency(const Embedding& K, const AmbientField& B) {
  const TorusVec3 nu = K.unit_normal();
  double r = 0;
  for (int p = 0; p < K.grid().size(); ++p) {
    const Eigen::Vector3d v = B.eval(K.K().node(p));
    r = std::max(r, std::abs(v.dot(Eigen::Vector3d(nu.node(p)))) / v.norm());
  }
  return r;
}

void check_layers(const Equilibrium& eq) {
  for (size_t k = 1; k < eq.layers.size(); ++k) {
    const Layer& L = eq.layers[k];
    EXPECT_GT(L.separation, 0.0) << "layer " << L.index;
    EXPECT_GT(L.outer.volume(), eq.layers[k - 1].outer.volume()) << "layer " << L.index;
    EXPECT_LT(tangency(*L.inner, L.field), 1e-8) << "layer " << L.index;
    EXPECT_LT(tangency(L.outer, L.field), 1e-8) << "layer " << L.index;
  }
}

}  // namespace

TEST(Pressures, Examples) {
  const auto z = pressures({0, 0, 0}, {0, 0.1, -0.2}, 0.7);
  for (double p : z.p) EXPECT_EQ(p, 0.7);
  EXPECT_FALSE(z.distinct);
  const auto two = pressures({0, 0.002}, {0, 0}, 1.0);
  EXPECT_NEAR(two.p[1], 0.999, 1e-15);
  EXPECT_TRUE(two.distinct);
  const auto b = pressures_with_boundary({0, 1e-3, -2e-3, 5e-4}, {0, 0.01, -0.02, 0.003});
  EXPECT_EQ(b.p.back(), 0.0);
  EXPECT_THROW(pressures({0, 1}, {0, -1}, 0), ConfigError);
  EXPECT_THROW(pressures({0, 1}, {0}, 0), ConfigError);
}

TEST(Pressures, ScalesAndTelescoping) {
  const std::vector<double> b = {0, 0.01, -0.02, 0.003}, c = {0, 1e-3, -2e-3, 5e-4};
  const auto s = layer_scales(b);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_NEAR(s[3], 1 / std::sqrt(1.01 * 0.98 * 1.003), 1e-15);
  const auto P = pressures(c, b, 0.25);
  double q = 1;
  for (size_t k = 1; k < c.size(); ++k) {
    q /= 1 + b[k];
    EXPECT_NEAR(P.p[k - 1] - P.p[k], 0.5 * q * c[k], 1e-14);
  }
}

TEST(Equilibria, JumpOfIdenticalFieldsVanishes) {
  // zero up to the point location roundoff of the jet
  EXPECT_LT(jump_residual(seed().K, seed().B, 1.0, seed().B, 1.0, 0.0), 1e-13);
}

TEST(Equilibria, ForbiddenEigenvalue) {
  const Layer L = seed_layer(seed());
  EquilibriumOptions o;
  const auto [star, gap] = forbidden_lambda(L, o);
  EXPECT_GT(gap, 0.0);
  EXPECT_THROW(next_layer(L, star, 1e-3, true, o), ForbiddenEigenvalue);
  EXPECT_THROW(next_layer(L, star + 0.5 * gap, 1e-3, true, o), ForbiddenEigenvalue);
  EXPECT_THROW(next_layer(L, L.lambda, 1e-3, true, o), ForbiddenEigenvalue);
  EXPECT_THROW(build_stepped(seed(), {1.0, 0.5}, {0, 1e-3}), ConfigError);
  EXPECT_THROW(build_stepped(seed(), {0.5, 1.0}, {0}), ConfigError);
}

TEST(Equilibria, SteppedTwoLayers) {
  const auto& eq = stepped2();
  for (const auto& f : eq.failures) ADD_FAILURE() << f;
  ASSERT_EQ(eq.layers.size(), 2u);
  ASSERT_EQ(eq.interfaces.size(), 1u);
  EXPECT_LT(eq.interfaces[0].jump, 1e-9);
  check_layers(eq);
  EXPECT_EQ(eq.p.back(), 0.0);
  EXPECT_TRUE(eq.pressures_distinct);
  const auto d = telescoped(eq);
  EXPECT_NEAR(eq.p[0] - eq.p[1], d[0], 1e-14);
  // c > 0 lowers the mean square field ratio
  EXPECT_LT(eq.b[1], 0.0);
  // the inner frequency of layer 2 is (1+c)^{1/2} times the outer one of layer 1
  const Eigen::Vector2d w1 = eq.layers[0].omega_outer.omega, w2 = eq.layers[1].omega_inner.omega;
  EXPECT_LT((w2 - std::sqrt(1 + 1e-3) * w1).norm(), 1e-14 * w1.norm());
}

TEST(Equilibria, MismatchedJumpConstantShowsUp) {
  const auto& eq = stepped2();
  const Layer &A = eq.layers[0], &B = eq.layers[1];
  std::vector<double> c = eq.c;
  c[1] += 1e-4;
  const auto P = pressures_with_boundary(c, eq.b);
  const double r = jump_residual(A.outer, A.field, eq.scale[0], B.field, eq.scale[1],
                                 P.p[0] - P.p[1]);
  EXPECT_NEAR(r, 1e-4, 1e-9);
}

TEST(Equilibria, SheetCurrentOfSteppedRun) {
  const auto cd = current_distribution(stepped2());
  ASSERT_EQ(cd.sheets.size(), 1u);
  ASSERT_EQ(cd.volumetric.size(), 2u);
  const auto& s = cd.sheets[0];
  EXPECT_GE(s.max, 1e-4);
  EXPECT_LE(s.max, 1e-1);
  EXPECT_LT(s.normal, 1e-12);
  EXPECT_LT(s.divergence, 1e-8);
}

TEST(Equilibria, SteppedThreeLayers) {
  const auto& eq = stepped3();
  for (const auto& f : eq.failures) ADD_FAILURE() << f;
  ASSERT_EQ(eq.layers.size(), 3u);
  for (const auto& r : eq.interfaces) EXPECT_LT(r.jump, 1e-8) << "interface " << r.k;
  check_layers(eq);
  const auto d = telescoped(eq);
  for (size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(eq.p[k] - eq.p[k + 1], d[k], 1e-14);
  EXPECT_EQ(eq.p.back(), 0.0);
}

TEST(Equilibria, ForceFreeIsContinuous) {
  const auto& eq = force_free();
  for (const auto& f : eq.failures) ADD_FAILURE() << f;
  ASSERT_EQ(eq.interfaces.size(), 1u);
  EXPECT_LT(eq.interfaces[0].continuity, 1e-9);
  EXPECT_EQ(eq.factor(), (std::vector<double>{0.5, 1.0}));
  for (double p : eq.p) EXPECT_EQ(p, eq.p[0]);
  for (const auto& s : current_distribution(eq).sheets) EXPECT_LT(s.max, 1e-9);
  check_layers(eq);
}

TEST(Equilibria, FreeBoundary) {
  const auto& eq = free_boundary();
  for (const auto& f : eq.failures) ADD_FAILURE() << f;
  EXPECT_LT(eq.h_jump, 1e-9);
  ASSERT_TRUE(eq.boundary_sheet.has_value());
  EXPECT_LT(eq.boundary_sheet->normal, 1e-12);
  EXPECT_LT(eq.boundary_sheet->divergence, 1e-8);
  EXPECT_GT(eq.boundary_sheet->max, 0.0);
  EXPECT_GT(std::abs(eq.type_II), 1e-6);
  EXPECT_EQ(eq.layers[1].lambda, 0.0);
  check_layers(eq);
}
