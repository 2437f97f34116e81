#include <gtest/gtest.h>

#include <array>
#include <numbers>
#include <sstream>

#include "kcn/constants_estimation.hpp"
#include "kcn/radial_field.hpp"
#include "support.hpp"

using namespace kcn;
constexpr double pi = std::numbers::pi;

// Relative quadrature errors of the ball volume and the first two radial moments.
std::array<double, 3> moment_errors(const GridPtr& g) {
  std::array<double, 3> err{};
  const int N = g->dimension();
  for (int k : {0, 1, 2}) {
    double s = 0;
    for (std::size_t i = 0; i < g->size(); ++i) s += g->weights()[i] * std::pow(g->nodes()[i], k);
    const double exact = sphere_area(N) * std::pow(g->r_max(), k + N) / (k + N);
    err[k] = std::abs(s / exact - 1);
  }
  return err;
}

TEST(RadialGrid, WeightsReproduceBallVolumeAndMoments) {
  for (double w : RadialGrid::graded(3, 512, 8.0, 4.0)->weights()) EXPECT_GT(w, 0);
  // r^{N-1} is integrated exactly on uniform grids in three dimensions
  EXPECT_LT(moment_errors(RadialGrid::uniform(3, 512, 8.0))[0], 1e-14);
  using Make = GridPtr (*)(std::size_t);
  const Make makers[] = {[](std::size_t M) { return RadialGrid::uniform(3, M, 8.0); },
                         [](std::size_t M) { return RadialGrid::graded(3, M, 8.0, 4.0); },
                         [](std::size_t M) { return RadialGrid::uniform(5, M, 3.0); }};
  for (auto make : makers) {
    const auto coarse = moment_errors(make(256)), fine = moment_errors(make(512));
    for (int k : {0, 1, 2}) {
      EXPECT_LT(fine[k], 1e-7) << k;
      if (coarse[k] > 1e-13) {
        EXPECT_GT(std::log2(coarse[k] / fine[k]), 3.5) << "moment " << k;
      }
    }
  }
  EXPECT_THROW(RadialGrid::uniform(3, 8, 1.0), InvalidParams);
}

TEST(RadialFunction, GaussianNorms) {
  auto g = RadialGrid::uniform(3, 2048, 10.0);
  const auto u = RadialFunction::sample(g, [](double r) { return std::exp(-r * r); });
  EXPECT_NEAR(l2_norm(u) * l2_norm(u) / std::pow(pi / 2, 1.5), 1.0, 1e-8);
  const auto v = RadialFunction::sample(g, [](double r) { return std::exp(-0.5 * r * r); });
  EXPECT_NEAR(grad_norm(v) * grad_norm(v) / (1.5 * std::pow(pi, 1.5)), 1.0, 1e-5);
  const RadialFunction zero(g);
  EXPECT_EQ(l2_norm(zero), 0.0);
  EXPECT_EQ(grad_norm(zero), 0.0);
}

TEST(RadialFunction, GradNormSecondOrder) {
  const double exact = std::sqrt(1.5 * std::pow(pi, 1.5));
  std::vector<double> err;
  for (std::size_t M : {128, 256, 512}) {
    const auto v = RadialFunction::sample(RadialGrid::uniform(3, M, 10.0), [](double r) { return std::exp(-0.5 * r * r); });
    err.push_back(std::abs(grad_norm(v) - exact));
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 1.8);
  EXPECT_GE(std::log2(err[1] / err[2]), 1.8);
}

TEST(RadialFunction, NormalizeMass) {
  auto g = RadialGrid::uniform(3, 256, 10.0);
  const auto u = scaled(gaussian(g, 1.0, 1.0), 2.0);
  const auto n = normalize_mass(u, 1.0);
  EXPECT_NEAR(l2_norm(n), 1.0, 1e-12);
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_DOUBLE_EQ(n[i], u[i] / 2);
    EXPECT_GE(n[i], 0);
  }
  const auto n2 = normalize_mass(n, 1.0);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(n2[i], n[i], 1e-15);
  EXPECT_THROW(normalize_mass(RadialFunction(g), 1.0), ZeroFunction);
}

TEST(Dilation, ScalingAndGroupAction) {
  auto g = RadialGrid::uniform(3, 1024, 16.0);
  const auto u = gaussian(g, 1.0, 1.0);
  EXPECT_EQ(dilate(u, 0.0).values()[5], u[5]);
  for (double s : {-0.5, -0.2, 0.3, 0.5}) {
    const auto v = dilate(u, s);
    EXPECT_NEAR(l2_norm(v), 1.0, 1e-3);
    EXPECT_NEAR(grad_norm(v) / (std::exp(s) * grad_norm(u)), 1.0, 1e-3);
  }
  for (double s : {-0.25, 0.1, 0.25})
    for (double t : {-0.25, 0.2}) {
      const auto a = dilate(dilate(u, s), t), b = dilate(u, s + t);
      std::vector<double> d(a.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
      EXPECT_LE(std::sqrt(weighted_dot(*g, d, d)) / l2_norm(b), 5e-3);
    }
  EXPECT_THROW(dilate(u, 3.5), DilationOutOfRange);
}

TEST(Dilation, ExactDilationScalesTheGrid) {
  auto g = RadialGrid::uniform(3, 256, 10.0);
  const auto u = gaussian(g, 1.0, 1.0);
  const auto v = dilate_exact(u, 0.4);
  EXPECT_NEAR(l2_norm(v), 1.0, 1e-13);
  EXPECT_NEAR(grad_norm(v) / grad_norm(u), std::exp(0.4), 1e-13);
  EXPECT_DOUBLE_EQ(v.grid()->r_max(), 10.0 * std::exp(-0.4));
}

TEST(Bubble, ValueAtOriginAndCutoff) {
  auto g = RadialGrid::graded(3, 1024, 64.0, 6.0);
  const double eps = 0.3;
  const auto b = bubble(g, eps, 8.0);
  EXPECT_NEAR(b[0], std::pow(eps / (eps * eps + g->nodes()[0] * g->nodes()[0]), 0.5), 1e-15);
  for (std::size_t i = 0; i < g->size(); ++i) {
    if (g->nodes()[i] >= 16.0) {
      EXPECT_EQ(b[i], 0.0);
    }
  }
  EXPECT_EQ(cutoff(1.0, 2.0), 1.0);
  EXPECT_EQ(cutoff(4.5, 2.0), 0.0);
}

TEST(Serialization, BitExactRoundTrip) {
  for (auto g : {RadialGrid::uniform(3, 64, 7.0), RadialGrid::graded(4, 64, 9.0, 3.0)}) {
    std::mt19937_64 rng(9);
    const auto u = random_profile(g, rng, 1.3);
    std::ostringstream os;
    os << "# comment lines are skipped\n";
    write_radial_function(os, u, 1.75);
    std::istringstream is(os.str());
    const auto back = read_radial_function(is);
    EXPECT_EQ(back.mu, 1.75);
    ASSERT_EQ(back.field.size(), u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      EXPECT_EQ(back.field[i], u[i]);
      EXPECT_EQ(back.field.grid()->nodes()[i], g->nodes()[i]);
    }
    EXPECT_EQ(back.field.grid()->spacing(), g->spacing() == Spacing::Uniform ? Spacing::Uniform : Spacing::Custom);
  }
  std::istringstream bad("3 2 4 1\n0.25 1\n");
  EXPECT_THROW(read_radial_function(bad), InvalidParams);
}
