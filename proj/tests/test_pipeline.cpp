#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kcn/pipeline.hpp"
#include "support.hpp"

namespace kcn {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kcn_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Small grids so that estimation stays cheap.
RunConfig small_config(const fs::path& out) {
  RunConfig cfg;
  cfg.grid = {256, 12.0, Spacing::Uniform, 6.0};
  cfg.shl_grid = {256, 64.0, Spacing::Graded, 6.0};
  cfg.shl_delta = 16;
  cfg.gn_starts = 2;
  cfg.alpha_fraction = 0.5;
  cfg.out = out.string();
  return cfg;
}

TEST(ResolveConstants, ConfigOverridesWin) {
  auto cfg = small_config(scratch("override"));
  cfg.c_p = 0.04;
  cfg.c_q = 3.8;
  cfg.s_hl = 3.3;
  Workspace ws(cfg);
  const auto C = resolve_constants(ws);
  EXPECT_EQ(C.c_p, 0.04);
  EXPECT_EQ(C.c_q, 3.8);
  EXPECT_EQ(C.s_hl, 3.3);
  EXPECT_EQ(C.source, "S_HL=config C_q=config C_p=config");
  EXPECT_FALSE(ws.shl_kernel);  // nothing was estimated
}

TEST(ResolveConstants, FreshStoredRecordsAreReusedStaleOnesIgnored) {
  const auto dir = scratch("stored");
  auto cfg = small_config(dir);
  Workspace ws(cfg);
  auto est = estimate_constants(ws);
  ASSERT_EQ(est.size(), 3u);
  est[1].value = 123.0;  // marker: C_q, proves the stored value is used
  std::ostringstream os;
  for (const auto& e : est) {
    write_estimate(os, e);
    os << '\n';
  }
  atomic_write(constants_path(cfg), os.str());
  {
    Workspace again(cfg);
    const auto C = resolve_constants(again);
    EXPECT_EQ(C.c_q, 123.0);
    EXPECT_EQ(C.c_p, est[2].value);
    EXPECT_EQ(C.s_hl, est[0].value);
    EXPECT_EQ(C.source, "S_HL=stored C_q=stored C_p=stored");
  }
  cfg.grid.M = 257;  // stored GN records no longer match the grid
  Workspace stale(cfg);
  const auto C = resolve_constants(stale);
  EXPECT_NE(C.c_q, 123.0);
  EXPECT_EQ(C.source, "S_HL=stored C_q=estimated C_p=estimated");
}

TEST(ResolveConstants, CriticalAndOutOfRangeExponents) {
  auto cfg = small_config(scratch("critical"));
  cfg.s_hl = 3.3;
  cfg.params.q = 3.5;
  cfg.params.p = 4.0;
  cfg.c_q = 0.1;
  Workspace ws(cfg);
  const auto C = resolve_constants(ws);
  EXPECT_DOUBLE_EQ(C.c_p, std::pow(3.3, -4.0));
  EXPECT_EQ(C.source, "S_HL=config C_q=config C_p=S_HL^-2*");
}

TEST(EffectiveParams, ResolvesAlphaFraction) {
  auto cfg = small_config(scratch("effective"));
  const auto C = test::canonical_constants();
  const auto P = effective_params(cfg, C);
  EXPECT_EQ(P.alpha, 0.5 * admissible_alpha(cfg.params, C));
  cfg.alpha_fraction.reset();
  cfg.params.alpha = 7;
  EXPECT_EQ(effective_params(cfg, C).alpha, 7.0);
  cfg.alpha_fraction = 0.5;
  cfg.params.q = 3.0;
  cfg.params.p = 3.5;
  EXPECT_THROW(effective_params(cfg, C), RegimeMismatch);
}

std::string report_text(const ProblemParams& P, const ConstantsUsed& C) {
  std::ostringstream os;
  write_threshold_report(os, threshold_report(P, C));
  return os.str();
}

TEST(ThresholdReport, MixedRegimeListsThresholds) {
  const auto C = test::canonical_constants();
  auto P = test::case_one();
  P.alpha = 0.5 * admissible_alpha(P, C);
  const auto text = report_text(P, C);
  EXPECT_NE(text.find("regime=CaseI\n"), std::string::npos) << text;
  EXPECT_NE(text.find("alpha1="), std::string::npos);
  EXPECT_NE(text.find("alpha3=n/a"), std::string::npos);
  EXPECT_NE(text.find("check alpha < alpha1: pass"), std::string::npos);
  EXPECT_NE(text.find("check alpha < alpha2: pass"), std::string::npos);
  EXPECT_NE(text.find("t0="), std::string::npos);
  EXPECT_EQ(text.find("t0=n/a"), std::string::npos);
}

TEST(ThresholdReport, AboveThresholdFails) {
  const auto C = test::canonical_constants();
  auto P = test::case_one();
  P.alpha = 2 * admissible_alpha(P, C);
  EXPECT_NE(report_text(P, C).find("check alpha < alpha2: fail"), std::string::npos);
}

TEST(ThresholdReport, AlphaZeroNotApplicable) {
  const auto text = report_text(test::case_one(), test::canonical_constants());
  EXPECT_NE(text.find("check alpha < alpha1: alpha=0: not applicable"), std::string::npos) << text;
  EXPECT_NE(text.find("t0=n/a"), std::string::npos);
}

TEST(ThresholdReport, CaseThreeNeedsNoThresholds) {
  const auto text = report_text(test::with(test::case_one(), 3.0, 3.5, 1.0), test::canonical_constants());
  EXPECT_NE(text.find("regime=CaseIII"), std::string::npos);
  EXPECT_NE(text.find("thresholds=not required"), std::string::npos);
  EXPECT_NE(text.find("check alpha thresholds: not required"), std::string::npos);
}

TEST(CriticalWarning, OnlyForLowQInTheCriticalSetting) {
  auto P = test::case_one();
  P.b = 0.3;
  P = test::with(P, 3.0, 4.0, 1.0);
  EXPECT_TRUE(critical_q_warning(P));
  P.q = 3.5;
  EXPECT_FALSE(critical_q_warning(P));
  EXPECT_FALSE(critical_q_warning(test::case_one()));
  EXPECT_NE(report_text(test::with(P, 3.0, 4.0, 1.0), test::canonical_constants()).find("# warning"),
            std::string::npos);
}

TEST(Output, SweepCsvFormat) {
  SweepResult s;
  SweepRow a;
  a.alpha = 0.1;
  a.m = -1.0 / 3.0;
  a.sigma = 2;
  a.grad_loc = 0.5;
  a.lambda_loc = -1;
  a.converged_loc = true;
  a.converged_mp = true;
  SweepRow b;
  b.sigma = 3;
  b.converged_mp = true;
  s.rows = {a, b};
  const auto csv = sweep_csv(s, "# head\n");
  EXPECT_EQ(csv,
            "# head\nalpha,m,sigma,grad_loc,lambda_loc,converged_loc,converged_mp\n"
            "0.10000000000000001,-0.33333333333333331,2,0.5,-1,1,1\n"
            "0,nan,3,nan,nan,0,1\n");
}

TEST(Output, AtomicWriteAddsTrailingNewlineAndReplaces) {
  const auto dir = scratch("atomic");
  const auto f = dir / "sub" / "x.txt";
  atomic_write(f, "one");
  EXPECT_EQ(slurp(f), "one\n");
  atomic_write(f, "two\n");
  EXPECT_EQ(slurp(f), "two\n");
  EXPECT_FALSE(fs::exists(dir / "sub" / "x.txt.tmp"));
}

TEST(Output, ProvenanceLines) {
  const auto text = provenance(test::case_one(), test::canonical_constants());
  EXPECT_EQ(text.rfind("# params ", 0), 0u);
  const std::string expected = "\n# constants C_p=" + format_double(0.0439861) + " C_q=" + format_double(3.83448) +
                               " S_HL=" + format_double(3.3326) + " (frozen)\n";
  EXPECT_NE(text.find(expected), std::string::npos) << text;
}

TEST(Output, SolutionMetaHasVerificationBlock) {
  const auto& K = test::small_kernel();
  auto P = test::with(test::case_one(), 3.0, 3.5, 1.0);
  const auto rec = solve_mountain_pass(P, K, test::canonical_constants());
  const auto checks = verify_record(rec);
  const auto meta = solution_meta(rec, checks, "");
  EXPECT_EQ(meta.rfind("kind=mp\n", 0), 0u);
  EXPECT_NE(meta.find("\n[verification]\n"), std::string::npos);
  EXPECT_NE(meta.find(std::string("\nall=") + (all_pass(checks) ? "pass" : "FAIL") + "\n"), std::string::npos);
  const auto field = solution_field(rec, "# h\n");
  EXPECT_EQ(field.rfind("# h\n", 0), 0u);
  std::istringstream is(field);
  const auto back = read_radial_function(is);
  EXPECT_EQ(back.mu, P.mu);
  ASSERT_EQ(back.field.size(), rec.profile.size());
  for (std::size_t i = 0; i < back.field.size(); ++i) EXPECT_EQ(back.field[i], rec.profile[i]);
}

}  // namespace
}  // namespace kcn
