#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "kcn/constants_estimation.hpp"
#include "support.hpp"

namespace kcn {
namespace {

AscentOptions quick(int starts = 4) {
  AscentOptions opt;
  opt.starts = starts;
  return opt;
}

TEST(GnRatio, InvariantUnderAmplitudeAndDilation) {
  const auto& K = test::canonical_kernel();
  const auto& g = K.grid();
  std::mt19937_64 rng(11);
  for (double r : {1.5, 2.5}) {
    for (int k = 0; k < 5; ++k) {
      const auto u = random_profile(g, rng);
      const double w = gn_ratio(K, u, r);
      EXPECT_NEAR(gn_ratio(K, normalize_mass(u, 3.7), r) / w, 1.0, 1e-12);
      for (double s : {-0.3, 0.4}) EXPECT_NEAR(gn_ratio(K, dilate(u, s), r) / w, 1.0, 1e-3) << r << ' ' << s;
    }
  }
}

TEST(GnEstimate, RejectsExponentsOutsideRange) {
  const auto& K = test::small_kernel();
  for (double r : {1.0, 4.0 / 3.0, 4.0, 5.0}) EXPECT_THROW(estimate_gn_constant(K, r, quick(1)), ExponentOutOfRange) << r;
}

TEST(GnEstimate, RandomProfilesNeverExceedTheEstimate) {
  const auto& K = test::canonical_kernel();
  for (double r : {1.5, 3.0}) {
    const auto est = estimate_gn_constant(K, r);
    std::mt19937_64 rng(99);
    double worst = 0;
    for (int k = 0; k < 500; ++k) worst = std::max(worst, gn_ratio(K, random_profile(K.grid(), rng), r) / est.value);
    EXPECT_LE(worst, 1 + 1e-6) << "r=" << r;
  }
}

TEST(GnEstimate, MatchesFrozenCanonicalValues) {
  const auto& K = test::canonical_kernel();
  const auto C = test::canonical_constants();
  EXPECT_NEAR(estimate_gn_constant(K, 1.5).value / C.c_q, 1.0, 1e-5);
  EXPECT_NEAR(estimate_gn_constant(K, 3.0).value / C.c_p, 1.0, 1e-5);
}

TEST(GnEstimate, RefinementDoesNotLowerTheEstimate) {
  const auto coarse = cached_kernel(RadialGrid::uniform(3, 256, 12.0), 2.0);
  const auto fine = cached_kernel(RadialGrid::uniform(3, 512, 12.0), 2.0);
  for (double r : {1.5, 3.0}) {
    const double a = estimate_gn_constant(coarse, r, quick()).value;
    const double b = estimate_gn_constant(fine, r, quick()).value;
    EXPECT_GE(b, a * (1 - 1e-3)) << "r=" << r;
  }
}

TEST(GnEstimate, IsDeterministicForAFixedSeed) {
  const auto& K = test::small_kernel();
  const auto a = estimate_gn_constant(K, 2.0, quick(3));
  const auto b = estimate_gn_constant(K, 2.0, quick(3));
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.seed, b.seed);
}

const RieszKernel& shl_kernel() {
  static const RieszKernel K = cached_kernel(RadialGrid::graded(3, 2048, 256.0, 6.0), 2.0);
  return K;
}

TEST(ShlEstimate, BubbleQuotientIsFlatInEps) {
  const auto& K = shl_kernel();
  double lo = 1e300, hi = 0;
  for (int k = 0; k <= 8; ++k) {
    const double eps = 0.1 * std::pow(5.0, k / 8.0);
    const double Q = shl_quotient(K, bubble(K.grid(), eps, 64.0));
    lo = std::min(lo, Q);
    hi = std::max(hi, Q);
  }
  EXPECT_LE(hi / lo - 1, 0.02);
}

TEST(ShlEstimate, NearTheKnownSharpValue) {
  ShlOptions opt;
  opt.delta = 64;
  const auto est = estimate_shl(shl_kernel(), opt);
  EXPECT_EQ(est.name, "S_HL");
  EXPECT_NEAR(est.exponent, 4.0, 1e-15);
  // literature value for N=3, mu=2; the discretized minimum sits slightly above it
  EXPECT_GT(est.value, 3.3326 * (1 - 1e-3));
  EXPECT_LT(est.value, 3.3326 * 1.01);
}

TEST(ShlEstimate, RandomProfilesDoNotBeatTheEstimate) {
  ShlOptions opt;
  opt.delta = 64;
  const auto& K = shl_kernel();
  const double S = estimate_shl(K, opt).value;
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) EXPECT_GE(shl_quotient(K, random_profile(K.grid(), rng)), S * (1 - 1e-3));
}

TEST(ShlEstimate, CutoffRadiusBarelyMatters) {
  ShlOptions a, b;
  a.delta = 32;
  b.delta = 64;
  const double x = estimate_shl(shl_kernel(), a).value, y = estimate_shl(shl_kernel(), b).value;
  EXPECT_LT(std::abs(x - y) / y, 0.01);
}

TEST(HlsEstimate, BelowTheSharpConstant) {
  // sharp constant for the diagonal case: pi^{mu/2} G(N/2-mu/2)/G(N-mu/2) (G(N/2)/G(N))^{mu/N-1}
  const double N = 3, mu = 2;
  const double sharp = std::pow(M_PI, mu / 2) * std::tgamma(N / 2 - mu / 2) / std::tgamma(N - mu / 2) *
                       std::pow(std::tgamma(N / 2) / std::tgamma(N), mu / N - 1);
  const auto& K = test::canonical_kernel();
  for (double t : {2.0, 2.5, 3.0}) {
    const auto est = estimate_hls_constant(K, t);
    EXPECT_LE(est.value, sharp * (1 + 1e-3)) << t;
    EXPECT_GE(est.value, sharp * 0.9) << t;
  }
}

TEST(EstimateRecord, RoundTrips) {
  const auto& K = test::small_kernel();
  auto e = estimate_gn_constant(K, 2.2, quick(2));
  std::stringstream ss;
  write_estimate(ss, e);
  ss << '\n';
  write_estimate(ss, e);
  ConstantEstimate r1, r2, r3;
  ASSERT_TRUE(read_estimate(ss, r1));
  ASSERT_TRUE(read_estimate(ss, r2));
  EXPECT_FALSE(read_estimate(ss, r3));
  for (const auto& r : {r1, r2}) {
    EXPECT_EQ(r.value, e.value);
    EXPECT_EQ(r.name, e.name);
    EXPECT_EQ(r.method, e.method);
    EXPECT_EQ(r.family, e.family);
    EXPECT_EQ(r.exponent, e.exponent);
    EXPECT_EQ(r.M, e.M);
    EXPECT_EQ(r.r_max, e.r_max);
    EXPECT_EQ(r.spacing, e.spacing);
    EXPECT_EQ(r.seed, e.seed);
  }
}

TEST(EstimateRecord, MalformedRecordsThrow) {
  std::istringstream missing("name=C_r\nvalue=1\n");
  ConstantEstimate e;
  EXPECT_THROW(read_estimate(missing, e), InvalidParams);
  std::istringstream garbage("name C_r\n");
  EXPECT_THROW(read_estimate(garbage, e), InvalidParams);
}

TEST(EstimateRecord, StaleGridIsRejected) {
  const auto& K = test::small_kernel();
  const auto e = estimate_gn_constant(K, 2.2, quick(1));
  EXPECT_NO_THROW(require_fresh(e, *K.grid(), 2.0));
  EXPECT_THROW(require_fresh(e, *RadialGrid::uniform(3, 512, 12.0), 2.0), GridMismatch);
  EXPECT_THROW(require_fresh(e, *RadialGrid::uniform(3, 256, 16.0), 2.0), GridMismatch);
  EXPECT_THROW(require_fresh(e, *K.grid(), 1.0), GridMismatch);
}

}  // namespace
}  // namespace kcn
