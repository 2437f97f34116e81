#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "kcn/config.hpp"
#include "kcn/errors.hpp"
#include "kcn/pipeline.hpp"
#include "kcn/solvers.hpp"
#include "kcn/verification.hpp"

namespace {

enum Exit : int { Ok = 0, VerifyFailed = 1, Mismatch = 2, NoConvergence = 3, BadConfig = 4 };

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> grid_m;
  std::optional<double> alpha;
};

kcn::RunConfig load_config(const Overrides& o) {
  kcn::RunConfig cfg;
  if (!o.config.empty()) {
    std::ifstream is(o.config);
    if (!is) throw kcn::ConfigError("cannot read config file '" + o.config + "'");
    cfg = kcn::parse_config(is);
  }
  if (o.out) cfg.out = *o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (o.grid_m) cfg.grid.M = *o.grid_m;
  if (o.alpha) {
    cfg.params.alpha = *o.alpha;
    cfg.alpha_fraction.reset();
  }
  return cfg;
}

std::filesystem::path out_file(const kcn::RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out) / name;
}

int cmd_thresholds(const kcn::RunConfig& cfg) {
  kcn::Workspace ws(cfg);
  const auto C = kcn::resolve_constants(ws);
  const auto P = kcn::effective_params(cfg, C);
  std::ostringstream os;
  kcn::write_threshold_report(os, kcn::threshold_report(P, C));
  std::cout << os.str();
  kcn::atomic_write(out_file(cfg, "thresholds.txt"), kcn::provenance(P, C) + os.str());
  return Ok;
}

int cmd_solve(const kcn::RunConfig& cfg, const std::string& kind) {
  kcn::Workspace ws(cfg);
  const auto C = kcn::resolve_constants(ws);
  const auto P = kcn::effective_params(cfg, C);
  const auto rec = kind == "local" ? kcn::solve_local_min(P, ws.kernel, C, std::nullopt, cfg.solver)
                                   : kcn::solve_mountain_pass(P, ws.kernel, C, std::nullopt, cfg.solver);
  const auto checks = kcn::verify_record(rec);
  const auto head = kcn::provenance(P, C);
  const std::string stem = std::string("solution_") + kcn::to_string(rec.kind);
  kcn::atomic_write(out_file(cfg, stem + ".txt"), kcn::solution_field(rec, head));
  kcn::atomic_write(out_file(cfg, stem + ".meta"), kcn::solution_meta(rec, checks, head));
  for (const auto& c : checks) std::cout << (c.pass ? "pass " : "FAIL ") << c.name << ": " << c.detail << '\n';
  std::cout << "energy=" << kcn::format_double(rec.energy) << '\n';
  if (!rec.converged) return NoConvergence;
  return kcn::all_pass(checks) ? Ok : VerifyFailed;
}

int cmd_sweep(const kcn::RunConfig& cfg) {
  kcn::Workspace ws(cfg);
  const auto C = kcn::resolve_constants(ws);
  const auto P = kcn::effective_params(cfg, C);
  const double amax = kcn::admissible_alpha(P, C);
  std::vector<double> alphas;
  for (double f : cfg.ladder) alphas.push_back(f * amax);
  const auto sweep = kcn::sweep_alpha(P, alphas, ws.kernel, C, cfg.solver);
  kcn::atomic_write(out_file(cfg, "sweep.csv"), kcn::sweep_csv(sweep, kcn::provenance(P, C)));
  bool all = true;
  for (const auto& r : sweep.rows) {
    const bool ok = r.converged_mp && (r.alpha == 0 || r.converged_loc);
    all = all && ok;
    std::cout << "alpha=" << kcn::format_double(r.alpha) << " m=" << r.m << " sigma=" << r.sigma
              << (ok ? "" : " FAILED " + r.error) << '\n';
  }
  return all ? Ok : NoConvergence;
}

int cmd_estimate_constants(const kcn::RunConfig& cfg) {
  kcn::Workspace ws(cfg);
  const auto estimates = kcn::estimate_constants(ws);
  std::ostringstream os;
  os << "# params " << kcn::describe(cfg.params) << '\n';
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (i) os << '\n';
    kcn::write_estimate(os, estimates[i]);
    std::cout << estimates[i].name << "(" << estimates[i].exponent << ")=" << kcn::format_double(estimates[i].value)
              << '\n';
  }
  kcn::atomic_write(kcn::constants_path(cfg), os.str());
  return Ok;
}

int cmd_verify(const kcn::RunConfig& cfg) {
  kcn::Workspace ws(cfg);
  const auto ctx = kcn::make_verify_context(ws);
  std::ostringstream report;
  report << kcn::provenance(ctx.mixed, ctx.constants);
  bool all = true;
  kcn::run_verification(ctx, [&](const kcn::CriterionResult& r) {
    const auto line = kcn::format_result(r);
    std::cout << line << std::endl;
    report << line << '\n';
    all = all && r.pass;
  });
  kcn::atomic_write(out_file(cfg, "verify.txt"), report.str());
  return all ? Ok : VerifyFailed;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const kcn::ConfigError*>(&e) || dynamic_cast<const kcn::InvalidParams*>(&e) ||
      dynamic_cast<const std::filesystem::filesystem_error*>(&e))
    return BadConfig;
  if (dynamic_cast<const kcn::RegimeMismatch*>(&e) || dynamic_cast<const kcn::ThresholdViolated*>(&e) ||
      dynamic_cast<const kcn::BoundaryExponent*>(&e) || dynamic_cast<const kcn::DiscriminantNonpositive*>(&e) ||
      dynamic_cast<const kcn::StructureMismatch*>(&e) || dynamic_cast<const kcn::ExponentPattern*>(&e) ||
      dynamic_cast<const kcn::ConditionFailed*>(&e))
    return Mismatch;
  if (dynamic_cast<const kcn::NotConverged*>(&e)) return NoConvergence;
  return VerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kcn: mass-constrained radial solver, thresholds and invariant checks"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "config file (key = value)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--grid-M", o.grid_m, "number of grid nodes")->check(CLI::PositiveNumber);
  app.add_option("--alpha", o.alpha, "alpha, overriding alpha_fraction");

  auto* thresholds = app.add_subcommand("thresholds", "thresholds, regime and hypothesis checks");
  std::string kind = "mp";
  auto* solve = app.add_subcommand("solve", "local minimizer or mountain-pass solution");
  solve->add_option("--kind", kind, "local|mp")->check(CLI::IsMember({"local", "mp"}));
  auto* sweep = app.add_subcommand("sweep", "alpha ladder table");
  auto* estimate = app.add_subcommand("estimate-constants", "estimate S_HL and the GN constants");
  auto* verify = app.add_subcommand("verify", "run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? Ok : BadConfig;
  }

  try {
    const auto cfg = load_config(o);
    if (*thresholds) return cmd_thresholds(cfg);
    if (*solve) return cmd_solve(cfg, kind);
    if (*sweep) return cmd_sweep(cfg);
    if (*estimate) return cmd_estimate_constants(cfg);
    if (*verify) return cmd_verify(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  }
  return BadConfig;
}
