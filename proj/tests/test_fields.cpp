#include <gtest/gtest.h>

#include <random>

#include "kamtori/fields.hpp"

using namespace kamtori;

namespace {

std::vector<Eigen::Vector3d> points_near_ring(int n, unsigned seed, double R = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, two_pi), S(0.2, 0.9);
  std::vector<Eigen::Vector3d> out;
  for (int i = 0; i < n; ++i) {
    const double a = U(rng), b = U(rng), s = S(rng);
    out.emplace_back((R + s * std::cos(b)) * std::cos(a), (R + s * std::cos(b)) * std::sin(a), s * std::sin(b));
  }
  return out;
}

double fd_divergence(const AmbientField& B, const Eigen::Vector3d& x, double h = 1e-5) {
  return fd_jacobian(B, x, h).trace();
}

TorusVec3 defect(const Embedding& K, const Eigen::Vector2d& w, const AmbientField& B) {
  TorusVec3 E = l_omega(K.K(), w);
  for (int p = 0; p < K.grid().size(); ++p) E.set_node(p, E.node(p) - B.eval(K.K().node(p)));
  return E;
}

}  // namespace

TEST(Fields, NestedToriAreInvariant) {
  const NestedFamily fam(3.0, {{1.0}, {0.3}}, 0.1, 1.0);
  const auto B = fam.field();
  for (double s : {0.1, 0.35, 0.6, 1.0}) {
    const auto K = fam.torus(s, {16, 64});
    EXPECT_LT(defect(K, fam.omega(s), B).max_abs(), 1e-10) << "s=" << s;
  }
  NestedProfile sheared{{1.0}, {0.25, 1.0}};
  const NestedFamily fam2(3.0, sheared, 0.1, 1.0);
  for (double s : {0.2, 0.7}) {
    const auto K = fam2.torus(s, {32, 64});
    EXPECT_LT(defect(K, fam2.omega(s), fam2.field()).max_abs(), 1e-10);
  }
}

TEST(Fields, DivergenceAndJacobian) {
  NestedProfile prof{{1.0, 0.2}, {0.25, 1.0, -0.3}};
  const auto B = synthetic_nested_field(3.0, prof, 0.1, 1.0);
  const auto P = perturb_div_free(B, 1e-3, 42);
  const auto T = trig_curl_field(1.0, 7);
  for (const auto& x : points_near_ring(100, 1)) {
    for (const AmbientField* f : {&B, &P, &T}) {
      const Eigen::Matrix3d J = f->jac(x);
      EXPECT_LT(std::abs(J.trace()), 1e-9 * std::max(1.0, J.norm()));
      EXPECT_LT(std::abs(fd_divergence(*f, x)), 1e-9);
      EXPECT_LT((fd_jacobian(*f, x) - J).cwiseAbs().maxCoeff(), 1e-7);
    }
  }
}

TEST(Fields, AbcIsBeltrami) {
  const auto B = abc_field(1.0, 0.8, 0.6);
  ASSERT_TRUE(B.beltrami_lambda().has_value());
  for (const auto& x : points_near_ring(50, 2)) {
    EXPECT_LT((curl_from_jac(B.jac(x)) - *B.beltrami_lambda() * B.eval(x)).norm(), 1e-12);
    EXPECT_LT((fd_jacobian(B, x) - B.jac(x)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Fields, ZeroPerturbationIsIdentity) {
  const auto B = synthetic_nested_field(3.0, {}, 0.1, 1.0);
  const auto P = perturb_div_free(B, 0.0, 5);
  const Eigen::Vector3d x(3.2, 0.1, 0.3);
  EXPECT_EQ(P.eval(x), B.eval(x));
  EXPECT_THROW(perturb_div_free(B, -1.0, 5), std::invalid_argument);
}

TEST(Fields, PerturbationDefectIsOrderDelta) {
  const NestedFamily fam(3.0, {{1.0}, {0.3}}, 0.1, 1.0);
  const auto K = fam.torus(0.5, {32, 32});
  const double d = 1e-3;
  const double e = defect(K, fam.omega(0.5), perturb_div_free(fam.field(), d, 11)).max_norm();
  EXPECT_GT(e, 1e-4);
  EXPECT_LT(e, 1e-2);
}

TEST(Fields, GeometryErrors) {
  EXPECT_THROW(synthetic_nested_field(3.0, {}, 0.1, 3.0), GeometryError);
  EXPECT_THROW(synthetic_nested_field(3.0, {}, 0.0, 1.0), GeometryError);
}

TEST(Fields, NestedToriAreDisjoint) {
  const NestedFamily fam(3.0, {}, 0.1, 1.0);
  EXPECT_GT(grid_distance(fam.torus(0.4, {16, 16}), fam.torus(0.5, {16, 16})), 0.05);
}

TEST(Fields, RotationNumberOfSyntheticTorus) {
  const NestedFamily fam(3.0, {{1.0}, {0.3}}, 0.1, 1.0);
  const auto K = fam.torus(0.5, {32, 32});
  const auto r = fieldline_rotation_number(fam.field(), K, 200.0);
  EXPECT_NEAR(r.value, 0.3, 1e-6);
  EXPECT_LT(r.error, 1e-6);

  const NestedFamily flat(3.0, {{1.0}, {0.0}}, 0.1, 1.0);
  const auto r0 = fieldline_rotation_number(flat.field(), flat.torus(0.5, {32, 32}), 50.0);
  EXPECT_NEAR(r0.value, 0.0, 1e-10);
}

TEST(Fields, LeavingTheTorusIsReported) {
  const NestedFamily fam(3.0, {{1.0}, {0.3}}, 0.1, 1.0);
  const auto K = fam.torus(0.5, {32, 32});
  const auto P = perturb_div_free(fam.field(), 0.2, 3);
  EXPECT_THROW(fieldline_rotation_number(P, K, 100.0), LeftNeighborhood);
}

TEST(Fields, DescriptorNests) {
  const auto P = perturb_div_free(synthetic_nested_field(3.0, {}, 0.1, 1.0), 1e-3, 9);
  const auto d = P.descriptor();
  EXPECT_EQ(d.kind, "sum");
  EXPECT_EQ(d.params.at("a.kind"), "synthetic_nested");
  EXPECT_EQ(d.params.at("b.seed"), "9");
}
