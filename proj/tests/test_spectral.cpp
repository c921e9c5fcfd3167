#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "kamtori/spectral.hpp"

using namespace kamtori;

namespace {

TorusScalar random_band_limited(GridSize g, int band, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0, 1);
  Spectrum c = Spectrum::Zero(g.n1, g.n2);
  for (int k2 = -band; k2 <= band; ++k2)
    for (int k1 = -band; k1 <= band; ++k1) {
      if (k1 < 0 || (k1 == 0 && k2 < 0)) continue;
      const cplx z(N(rng), (k1 == 0 && k2 == 0) ? 0.0 : N(rng));
      c(fft_index(k1, g.n1), fft_index(k2, g.n2)) = z;
      c(fft_index(-k1, g.n1), fft_index(-k2, g.n2)) = std::conj(z);
    }
  return TorusScalar::from_coeffs(c);
}

}  // namespace

TEST(Spectral, RoundTripAndReality) {
  std::mt19937_64 rng(7);
  const GridSize g{16, 32};
  const auto f = random_band_limited(g, 6, rng);
  const Spectrum c = f.coeffs();
  const Spectrum c2 = TorusScalar::from_coeffs(c).coeffs();
  EXPECT_LT((c - c2).abs().maxCoeff(), 1e-13 * c.abs().maxCoeff());
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i)
      EXPECT_LT(std::abs(c(i, j) - std::conj(c((g.n1 - i) % g.n1, (g.n2 - j) % g.n2))), 1e-14);
  EXPECT_NEAR(c(0, 0).real(), f.mean(), 1e-15);
}

TEST(Spectral, LOmegaExamples) {
  const GridSize g{16, 16};
  EXPECT_LT(l_omega(TorusScalar(g, 3.0), Eigen::Vector2d(1, 0.5)).max_abs(), 1e-15);

  auto s = TorusScalar::sample(g, [](double a, double) { return std::sin(a); });
  auto c = TorusScalar::sample(g, [](double a, double) { return std::cos(a); });
  EXPECT_LT((l_omega(s, Eigen::Vector2d(1, 0)) - c).max_abs(), 1e-14);

  // modewise rule against pointwise central differences
  auto f = TorusScalar::sample(g, [](double a, double b) { return std::cos(a + b); });
  const Eigen::Vector2d w(1, 0.5);
  const auto lf = l_omega(f, w);
  const double h = 1e-6;
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const double a = node_angle(i, g.n1), b = node_angle(j, g.n2);
      const double fd = (std::cos(a + h * w[0] + b + h * w[1]) - std::cos(a - h * w[0] + b - h * w[1])) / (2 * h);
      EXPECT_NEAR(lf(i, j), -1.5 * std::sin(a + b), 1e-13);
      EXPECT_NEAR(lf(i, j), fd, 1e-8);
    }
}

TEST(Spectral, LOmegaKernelIsMean) {
  std::mt19937_64 rng(3);
  const GridSize g{16, 16};
  const auto f = random_band_limited(g, 7, rng);
  const Eigen::Vector2d w(1, (std::sqrt(5.0) - 1) / 2);
  const Spectrum c = l_omega(f, w).coeffs();
  EXPECT_LT(std::abs(c(0, 0)), 1e-14);
  // nothing else is annihilated
  const Spectrum cf = f.coeffs();
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      if ((i == 0 && j == 0) || is_nyquist(i, g.n1) || is_nyquist(j, g.n2)) continue;
      if (std::abs(cf(i, j)) > 1e-8) EXPECT_GT(std::abs(c(i, j)), 1e-10);
    }
}

TEST(Spectral, ComposeShiftExamples) {
  const GridSize g{32, 32};
  auto f = TorusScalar::sample(g, [](double a, double) { return std::sin(a); });
  EXPECT_LT((compose_shift(f, TorusVec2(g)) - f).max_abs(), 1e-14);

  TorusVec2 v(g);
  v[0] = TorusScalar(g, 0.3);
  const auto s = TorusScalar::sample(g, [](double a, double) { return std::sin(a + 0.3); });
  EXPECT_LT((compose_shift(f, v) - s).max_abs(), 1e-13);

  // cos(phi2) composed with (0, 0.1 sin phi1): pointwise oracle on a finer grid
  const GridSize fine{64, 64};
  auto c = TorusScalar::sample(g, [](double, double b) { return std::cos(b); });
  TorusVec2 w(fine);
  w[1] = TorusScalar::sample(fine, [](double a, double) { return 0.1 * std::sin(a); });
  const auto got = compose_shift(c, w);
  const auto want = TorusScalar::sample(fine, [](double a, double b) { return std::cos(b + 0.1 * std::sin(a)); });
  EXPECT_LT((got - want).max_abs(), 1e-10);
}

TEST(Spectral, ComposeShiftRejectsFolds) {
  const GridSize g{16, 16};
  TorusVec2 v(g);
  v[0] = TorusScalar::sample(g, [](double a, double) { return 1.5 * std::sin(a); });
  EXPECT_THROW(compose_shift(TorusScalar(g, 1.0), v), NotDiffeomorphism);
}

TEST(Spectral, ComposeWithInverseReturnsInput) {
  const GridSize g{32, 32};
  auto f = TorusScalar::sample(g, [](double a, double b) { return std::exp(std::cos(a)) * std::sin(b + 0.2); });
  TorusVec2 v(g);
  v[0] = TorusScalar::sample(g, [](double a, double b) { return 0.05 * std::sin(a + b); });
  v[1] = TorusScalar::sample(g, [](double a, double b) { return 0.04 * std::cos(a - 2 * b); });
  // sup |Dv| <= 0.1
  const TorusVec2 w = invert_shift(v);
  const auto back = compose_shift(compose_shift(f, v), w);
  EXPECT_LT((back - f).max_abs(), 1e-8);
}

TEST(Spectral, StripNorm) {
  const GridSize g{16, 16};
  EXPECT_EQ(strip_norm(TorusScalar(g), 0.7), 0.0);
  auto c = TorusScalar::sample(g, [](double a, double) { return std::cos(a); });
  EXPECT_NEAR(strip_norm(c, 0.0), 1.0, 1e-14);
  EXPECT_NEAR(strip_norm(c, 1.0), std::exp(1.0), 1e-12);

  std::mt19937_64 rng(11);
  const auto f = random_band_limited(g, 5, rng);
  EXPECT_GE(strip_norm(f, 0.0), f.max_abs() - 1e-13);
  double prev = 0;
  for (double r : {0.0, 0.1, 0.5, 1.0, 2.0}) {
    const double s = strip_norm(f, r);
    EXPECT_GE(s, prev);
    prev = s;
  }
  EXPECT_THROW(strip_norm(f, 1e3), std::invalid_argument);
}

TEST(Spectral, DealiasedProductMatchesConvolution) {
  std::mt19937_64 rng(5);
  const GridSize g{32, 32};
  const auto f = random_band_limited(g, 7, rng);
  const auto h = random_band_limited(g, 7, rng);
  const Spectrum cf = f.coeffs(), ch = h.coeffs();
  Spectrum conv = Spectrum::Zero(g.n1, g.n2);
  for (int a2 = -7; a2 <= 7; ++a2)
    for (int a1 = -7; a1 <= 7; ++a1)
      for (int b2 = -7; b2 <= 7; ++b2)
        for (int b1 = -7; b1 <= 7; ++b1)
          conv(fft_index(a1 + b1, g.n1), fft_index(a2 + b2, g.n2)) +=
              cf(fft_index(a1, g.n1), fft_index(a2, g.n2)) * ch(fft_index(b1, g.n1), fft_index(b2, g.n2));
  const Spectrum got = product(f, h).coeffs();
  EXPECT_LT((got - conv).abs().maxCoeff(), 1e-12);
}

TEST(Spectral, EvaluatorDerivatives) {
  const GridSize g{32, 32};
  auto f = TorusScalar::sample(g, [](double a, double b) { return std::sin(2 * a - b) + 0.3 * std::cos(a + 3 * b); });
  FourierEvaluator ev({f});
  const double a = 0.37, b = 2.11;
  const auto r = ev.eval(a, b, 2);
  EXPECT_NEAR(r(0, 0), std::sin(2 * a - b) + 0.3 * std::cos(a + 3 * b), 1e-13);
  EXPECT_NEAR(r(0, 1), 2 * std::cos(2 * a - b) - 0.3 * std::sin(a + 3 * b), 1e-12);
  EXPECT_NEAR(r(0, 2), -std::cos(2 * a - b) - 0.9 * std::sin(a + 3 * b), 1e-12);
  EXPECT_NEAR(r(0, 3), -4 * std::sin(2 * a - b) - 0.3 * std::cos(a + 3 * b), 1e-11);
  EXPECT_NEAR(r(0, 4), 2 * std::sin(2 * a - b) - 0.9 * std::cos(a + 3 * b), 1e-11);
  EXPECT_NEAR(r(0, 5), -std::sin(2 * a - b) - 2.7 * std::cos(a + 3 * b), 1e-11);
}

TEST(Spectral, CsvRoundTrip) {
  std::mt19937_64 rng(9);
  const auto f = random_band_limited({8, 16}, 3, rng);
  std::stringstream ss;
  write_coeffs_csv(ss, f);
  const auto g = read_coeffs_csv(ss);
  EXPECT_TRUE(g.grid() == f.grid());
  EXPECT_LT((g - f).max_abs(), 1e-13);
}

TEST(Spectral, CsvRejectsMissingHeader) {
  std::stringstream ss("k1,k2,re,im\n0,0,1,0\n");
  EXPECT_THROW(read_coeffs_csv(ss), IoError);
}
