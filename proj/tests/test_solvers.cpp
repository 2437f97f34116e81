#include <gtest/gtest.h>

#include <cmath>

#include "kcn/fiber_geometry.hpp"
#include "kcn/solvers.hpp"
#include "support.hpp"

namespace kcn {
namespace {

const ConstantsUsed C = test::canonical_constants();

double alpha_half() { return 0.5 * admissible_alpha(test::case_one(), C); }

ProblemParams case_one_half() {
  auto P = test::case_one();
  P.alpha = alpha_half();
  return P;
}

std::string failures(const std::vector<Check>& checks) {
  std::string s;
  for (const auto& c : checks)
    if (!c.pass) s += c.name + " (" + c.detail + ") ";
  return s;
}

// Both solves are shared by several tests.
const SolutionRecord& local_record() {
  static const SolutionRecord r = solve_local_min(case_one_half(), test::canonical_kernel(), C);
  return r;
}

const SolutionRecord& mp_record() {
  static const SolutionRecord r = solve_mountain_pass(case_one_half(), test::canonical_kernel(), C);
  return r;
}

TEST(LocalMin, PassesEveryCheck) {
  const auto& r = local_record();
  const auto checks = verify_record(r);
  EXPECT_TRUE(all_pass(checks)) << failures(checks);
  EXPECT_LT(r.energy, 0);
  ASSERT_TRUE(r.t0);
  EXPECT_LT(r.grad_l2, *r.t0);
  EXPECT_EQ(r.kind, SolutionKind::LocalMin);
}

TEST(MountainPass, PassesEveryCheck) {
  const auto& r = mp_record();
  const auto checks = verify_record(r);
  EXPECT_TRUE(all_pass(checks)) << failures(checks);
  EXPECT_GT(r.energy, 0);
  EXPECT_GT(r.grad_l2, local_record().grad_l2);
}

TEST(Solutions, MultiplierRoutesAgree) {
  for (const auto* r : {&local_record(), &mp_record()})
    EXPECT_NEAR(r->lambda / r->lambda_pohozaev, 1.0, 1e-6) << to_string(r->kind);
}

TEST(Solutions, SitOnTheFiberCriticalPoints) {
  // the solution's own fiber map has its matching critical point at s = 0
  for (const auto* r : {&local_record(), &mp_record()}) {
    const auto rep = fiber_critical_points(r->profile, r->params, test::canonical_kernel().on_grid(r->profile.grid()));
    double nearest = 1e300;
    for (const auto& cp : rep.critical_points) nearest = std::min(nearest, std::abs(cp.s));
    EXPECT_LT(nearest, 1e-3) << to_string(r->kind);
  }
}

TEST(Solutions, ProfileIsTheDilatedRepresentative) {
  const auto& r = mp_record();
  const auto again = dilate_exact(r.base, r.fiber_shift);
  for (std::size_t i = 0; i < again.size(); ++i) EXPECT_EQ(again[i], r.profile[i]);
}

TEST(Solvers, RepeatedSolveIsBitIdentical) {
  const auto r = solve_mountain_pass(case_one_half(), test::canonical_kernel(), C);
  EXPECT_EQ(r.energy, mp_record().energy);
  for (std::size_t i = 0; i < r.profile.size(); ++i) ASSERT_EQ(r.profile[i], mp_record().profile[i]);
}

TEST(Solvers, CaseThreeMountainPass) {
  const auto P = test::with(test::case_one(), 3.0, 3.5, 1.0);
  const auto r = solve_mountain_pass(P, test::canonical_kernel(), C);
  const auto checks = verify_record(r);
  EXPECT_TRUE(all_pass(checks)) << failures(checks);
  EXPECT_EQ(r.regime, Regime::CaseIII);
}

TEST(Solvers, LocalMinRefusedOutsideMixedRegime) {
  const auto P = test::with(test::case_one(), 3.0, 3.5, 1.0);
  EXPECT_THROW(solve_local_min(P, test::small_kernel(), C), RegimeMismatch);
}

TEST(Solvers, AlphaAtOrAboveThresholdIsRefused) {
  auto P = test::case_one();
  P.alpha = admissible_alpha(P, C);
  EXPECT_THROW(solve_local_min(P, test::small_kernel(), C), ThresholdViolated);
  EXPECT_THROW(solve_mountain_pass(P, test::small_kernel(), C), ThresholdViolated);
  P.alpha = 0;
  EXPECT_THROW(solve_local_min(P, test::small_kernel(), C), ThresholdViolated);
}

TEST(Solvers, InitOnAnotherGridIsRejected) {
  const auto u = gaussian(RadialGrid::uniform(3, 512, 16.0), 1.0);
  EXPECT_THROW(solve_mountain_pass(case_one_half(), test::canonical_kernel(), C, u), GridMismatch);
}

TEST(Solvers, IterationCapRaises) {
  SolverOptions opt;
  opt.max_iter = 3;
  EXPECT_THROW(solve_mountain_pass(case_one_half(), test::canonical_kernel(), C, std::nullopt, opt), NotConverged);
}

TEST(Sweep, SingleRowMatchesDirectSolves) {
  const auto s = sweep_alpha(test::case_one(), {alpha_half()}, test::canonical_kernel(), C);
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_EQ(s.rows[0].m, local_record().energy);
  EXPECT_EQ(s.rows[0].sigma, mp_record().energy);
  EXPECT_TRUE(s.rows[0].converged_loc);
  EXPECT_TRUE(s.rows[0].converged_mp);
}

TEST(Sweep, LadderTrends) {
  const double amax = admissible_alpha(test::case_one(), C);
  const auto s = sweep_alpha(test::case_one(), {0.5 * amax, 0.1 * amax, 0.0}, test::canonical_kernel(), C);
  ASSERT_EQ(s.rows.size(), 3u);
  for (const auto& r : s.rows) EXPECT_TRUE(r.converged_mp) << r.error;
  EXPECT_TRUE(s.rows[0].converged_loc);
  EXPECT_TRUE(s.rows[1].converged_loc);
  EXPECT_TRUE(std::isnan(s.rows[2].m));
  // smaller alpha: shallower well, higher mountain pass
  EXPECT_LT(s.rows[0].m, s.rows[1].m);
  EXPECT_LE(s.rows[0].sigma, s.rows[1].sigma);
  EXPECT_LE(s.rows[1].sigma, s.rows[2].sigma);
  // mountain-pass profiles approach the alpha=0 one in H1
  ASSERT_EQ(s.mountain.size(), 3u);
  const double far = h1_distance(s.mountain[2], s.mountain[0]), near = h1_distance(s.mountain[2], s.mountain[1]);
  EXPECT_GT(near, 0);
  EXPECT_LT(near, far);
}

TEST(Resample, ReproducesSmoothProfilesAndZeroExtends) {
  const auto u = gaussian(RadialGrid::uniform(3, 512, 8.0), 1.0);
  const auto v = resample(u, RadialGrid::graded(3, 700, 12.0, 3.0));
  const double k = u[0] / std::exp(-0.5 * u.grid()->nodes()[0] * u.grid()->nodes()[0]);
  // pchip flattens at the mirrored maximum, so the error there is about h^2 max|u''|
  const double h = 8.0 / 512;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = v.grid()->nodes()[i];
    EXPECT_NEAR(v[i], r > 8.0 ? 0.0 : k * std::exp(-0.5 * r * r), h * h * k) << r;
  }
  EXPECT_THROW(resample(u, RadialGrid::uniform(4, 64, 8.0)), GridMismatch);
}

TEST(Sweep, RowErrorsAreRecordedNotThrown) {
  const double amax = admissible_alpha(test::case_one(), C);
  const auto s = sweep_alpha(test::case_one(), {2 * amax}, test::small_kernel(), C);
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_FALSE(s.rows[0].converged_loc);
  EXPECT_FALSE(s.rows[0].converged_mp);
  EXPECT_NE(s.rows[0].error.find("local:"), std::string::npos);
  EXPECT_NE(s.rows[0].error.find("mp:"), std::string::npos);
}

ProblemParams critical_case() {
  auto P = test::case_one();
  P.b = 0.3;
  return test::with(P, 3.5, 4.0, 1.0);
}

TEST(CriticalBound, MountainPassLevelBelowTheBound) {
  const auto r = critical_bound_check(critical_case(), test::canonical_kernel(), C);
  EXPECT_TRUE(all_pass(verify_record(r.record))) << failures(verify_record(r.record));
  EXPECT_TRUE(r.ok) << r.sigma << " vs " << r.bound;
  EXPECT_LT(cardano_residual(r.lambda_cardano, 1.0, 0.3, C.s_hl, CardanoVariant::Theta2Mu2), 1e-10);
}

TEST(CriticalBound, NonpositiveDiscriminantRefused) {
  auto P = critical_case();
  P.b = 1.0;  // a^2/4 - b^3 S^4/27 < 0 for S near 3.33
  EXPECT_THROW(critical_bound_check(P, test::small_kernel(), C), DiscriminantNonpositive);
}

TEST(CriticalBound, OtherSettingsRefused) {
  EXPECT_THROW(critical_bound_check(case_one_half(), test::small_kernel(), C), RegimeMismatch);
}

}  // namespace
}  // namespace kcn
