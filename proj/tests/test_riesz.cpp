#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>
#include <random>

#include "kcn/constants_estimation.hpp"
#include "kcn/riesz.hpp"
#include "support.hpp"

using namespace kcn;
constexpr double pi = std::numbers::pi;

namespace {
const RieszKernel& ball_kernel() {
  static const RieszKernel K = cached_kernel(RadialGrid::uniform(3, 1024, 2.0), 1.0);
  return K;
}
RadialFunction unit_ball(const GridPtr& g) {
  return RadialFunction::sample(g, [](double r) { return r < 1.0 ? 1.0 : (r == 1.0 ? 0.5 : 0.0); });
}
}  // namespace

TEST(Riesz, SymmetricAndPositive) {
  const auto& K = test::small_kernel();
  for (std::size_t i = 0; i < K.size(); i += 7)
    for (std::size_t j = 0; j < K.size(); j += 5) {
      EXPECT_EQ(K.entry(i, j), K.entry(j, i));
      EXPECT_GT(K.entry(i, j), 0);
      EXPECT_TRUE(std::isfinite(K.entry(i, j)));
    }
}

TEST(Riesz, FarEntriesApproachPointPotential) {
  const auto& K = test::small_kernel();
  const auto cells = cell_layout(*K.grid());
  // Row against the innermost cell, which looks like a point from far away: the entry is then the
  // average of r^{-2} over cell i (one-sided at r_max).
  for (std::size_t i : {100, 200, 254, 255}) {
    const double a = cells.edges[i], b = cells.edges[i + 1];
    const double cell_mean = 3 * (b - a) / (b * b * b - a * a * a);
    EXPECT_NEAR(K.entry(i, 0) / cell_mean, 1.0, 1e-4) << i;
  }
  EXPECT_NEAR(spherical_mean(3, 2.0, 2.5, 0.0), std::pow(2.5, -2.0), 1e-14);
}

TEST(Riesz, NewtonPotentialOfUnitBall) {
  const auto& K = ball_kernel();
  const auto phi = riesz_apply(K, unit_ball(K.grid()));
  EXPECT_NEAR(phi[0] / (2 * pi), 1.0, 1e-2);
  const auto r = K.grid()->nodes();
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] > 1.05) {
      EXPECT_NEAR(phi[i] * r[i] / (4 * pi / 3), 1.0, 1e-2);
    }
  }
}

TEST(Riesz, Linearity) {
  const auto& K = test::small_kernel();
  std::mt19937_64 rng(4);
  const auto f = random_profile(K.grid(), rng);
  const auto a = riesz_apply(K, scaled(f, 2.0)), b = riesz_apply(K, f);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(a[i], 2 * b[i], 1e-13 * std::abs(b[i]));
  const auto z = riesz_apply(K, RadialFunction(K.grid()));
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(Choquard, ZeroAndRange) {
  const auto& K = test::small_kernel();
  EXPECT_EQ(choquard_integral(K, RadialFunction(K.grid()), 2.0), 0.0);
  const auto u = gaussian(K.grid(), 1.0);
  EXPECT_GT(choquard_integral(K, u, 2.0), 0.0);
  EXPECT_THROW(choquard_integral(K, u, 1.2), ExponentOutOfRange);
  EXPECT_THROW(choquard_integral(K, u, 4.5), ExponentOutOfRange);
  auto other = RadialGrid::uniform(3, 128, 12.0);
  EXPECT_THROW(choquard_integral(K, gaussian(other, 1.0), 2.0), GridMismatch);
}

// |x-y|^{-mu} has finite variance under sampling only for mu < N/2, so the oracle runs at mu = 1.
TEST(Choquard, MonteCarloAgreesOnGaussians) {
  static const RieszKernel K = cached_kernel(RadialGrid::uniform(3, 256, 12.0), 1.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> width(0.6, 2.0);
  for (int k = 0; k < 20; ++k) {
    const auto u = gaussian(K.grid(), width(rng));
    const double D = choquard_integral(K, u, 2.5);
    const auto mc = choquard_oracle_mc(u, 1.0, 2.5, 20000, 100 + k);
    EXPECT_LE(std::abs(mc.estimate - D), 3 * mc.std_error) << k;
  }
  const auto zero = choquard_oracle_mc(RadialFunction(K.grid()), 2.0, 2.5, 20000);
  EXPECT_EQ(zero.estimate, 0.0);
  EXPECT_EQ(zero.std_error, 0.0);
  EXPECT_THROW(choquard_oracle_mc(gaussian(K.grid(), 1.0), 2.0, 2.5, 100), InvalidParams);
}

TEST(Choquard, ScalingUnderDilation) {
  const auto& K = test::canonical_kernel();
  const auto u = gaussian(K.grid(), 1.0);
  for (double t : {1.5, 3.0})
    for (double s : {-0.5, 0.25, 0.5}) {
      const double d = delta_of<double>(3, 2.0, t);
      EXPECT_NEAR(choquard_integral(K, dilate(u, s), t) / (std::exp(2 * t * d * s) * choquard_integral(K, u, t)),
                  1.0, 1e-2);
      // Exact dilation with the rescaled kernel reproduces the law to roundoff.
      const auto v = dilate_exact(u, s);
      EXPECT_NEAR(choquard_integral(K.on_grid(v.grid()), v, t) /
                      (std::exp(2 * t * d * s) * choquard_integral(K, u, t)),
                  1.0, 1e-12);
    }
}

TEST(KernelCache, RoundTripAndMismatch) {
  const auto dir = std::filesystem::temp_directory_path() / "kcn_cache_test";
  std::filesystem::remove_all(dir);
  auto g = RadialGrid::uniform(3, 64, 5.0);
  const auto built = cached_kernel(g, 1.5, dir);
  const auto loaded = cached_kernel(g, 1.5, dir);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) EXPECT_EQ(built.entry(i, j), loaded.entry(i, j));
  const auto path = dir / kernel_cache_name(*g, 1.5);
  EXPECT_THROW(load_kernel(RadialGrid::uniform(3, 64, 6.0), 1.5, path), CacheMismatch);
  EXPECT_THROW(load_kernel(g, 1.0, path), CacheMismatch);
  std::filesystem::remove_all(dir);
}
