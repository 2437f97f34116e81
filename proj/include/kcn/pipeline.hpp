#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kcn/config.hpp"
#include "kcn/constants_estimation.hpp"
#include "kcn/errors.hpp"
#include "kcn/exponents.hpp"
#include "kcn/fiber_geometry.hpp"
#include "kcn/riesz.hpp"
#include "kcn/solvers.hpp"

namespace kcn {

// Kernels for the problem grid and the graded grid used for S_HL, built once per run.
struct Workspace {
  RunConfig cfg;
  RieszKernel kernel;
  std::optional<RieszKernel> shl_kernel;  // built on first use

  explicit Workspace(RunConfig c)
      : cfg(std::move(c)), kernel(cached_kernel(make_grid(cfg.params.N, cfg.grid), cfg.params.mu)) {}

  const RieszKernel& shl() {
    if (!shl_kernel) shl_kernel.emplace(cached_kernel(make_grid(cfg.params.N, cfg.shl_grid), cfg.params.mu));
    return *shl_kernel;
  }
};

inline std::filesystem::path constants_path(const RunConfig& cfg) {
  return std::filesystem::path(cfg.out) / "constants.txt";
}

inline std::vector<ConstantEstimate> read_estimates(const std::filesystem::path& path) {
  std::vector<ConstantEstimate> out;
  std::ifstream is(path);
  if (!is) return out;
  ConstantEstimate e;
  while (read_estimate(is, e)) out.push_back(e);
  return out;
}

inline ConstantEstimate estimate_shl_for(Workspace& ws) {
  ShlOptions opt;
  opt.delta = ws.cfg.shl_delta;
  return estimate_shl(ws.shl(), opt);
}

inline ConstantEstimate estimate_gn_for(Workspace& ws, double r) {
  AscentOptions opt;
  opt.starts = ws.cfg.gn_starts;
  opt.seed = ws.cfg.seed;
  return estimate_gn_constant(ws.kernel, r, opt);
}

// Everything estimate-constants computes for the configured problem: S_HL and the GN constants for
// every exponent strictly inside the GN range.
inline std::vector<ConstantEstimate> estimate_constants(Workspace& ws) {
  const auto& P = ws.cfg.params;
  std::vector<ConstantEstimate> out{estimate_shl_for(ws)};
  const double lo = two_mu_lower(P.N, P.mu), hi = two_mu_star(P.N, P.mu);
  for (double r : {P.q, P.p})
    if (r > lo && r < hi && (out.size() < 2 || out.back().exponent != r)) out.push_back(estimate_gn_for(ws, r));
  return out;
}

namespace detail {

inline std::optional<ConstantEstimate> find_stored(const std::vector<ConstantEstimate>& stored, const std::string& name,
                                                   double exponent, const RadialGrid& g, double mu) {
  for (const auto& e : stored) {
    if (e.name != name || e.exponent != exponent) continue;
    try {
      require_fresh(e, g, mu);
      return e;
    } catch (const GridMismatch&) {
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Order of preference per constant: config override, fresh stored record, new estimate.
inline ConstantsUsed resolve_constants(Workspace& ws) {
  const auto& cfg = ws.cfg;
  const auto& P = cfg.params;
  const auto stored = read_estimates(constants_path(cfg));
  ConstantsUsed C;
  std::ostringstream src;
  if (cfg.s_hl) {
    C.s_hl = *cfg.s_hl;
    src << "S_HL=config";
  } else {
    const auto g = make_grid(P.N, cfg.shl_grid);
    auto e = detail::find_stored(stored, "S_HL", two_mu_star(P.N, P.mu), *g, P.mu);
    src << (e ? "S_HL=stored" : "S_HL=estimated");
    C.s_hl = (e ? *e : estimate_shl_for(ws)).value;
  }
  auto gn = [&](std::optional<double> override_value, double r, const char* label) {
    if (override_value) {
      src << ' ' << label << "=config";
      return *override_value;
    }
    const double lo = two_mu_lower(P.N, P.mu), hi = two_mu_star(P.N, P.mu);
    if (same_exponent(r, hi)) {
      src << ' ' << label << "=S_HL^-2*";
      return std::pow(C.s_hl, -hi);
    }
    if (!(r > lo && r < hi)) {
      src << ' ' << label << "=n/a";
      return 1.0;  // unused: thresholds need a GN constant only for exponents inside the range
    }
    auto e = detail::find_stored(stored, "C_r", r, *ws.kernel.grid(), P.mu);
    src << ' ' << label << (e ? "=stored" : "=estimated");
    return (e ? *e : estimate_gn_for(ws, r)).value;
  };
  C.c_q = gn(cfg.c_q, P.q, "C_q");
  C.c_p = gn(cfg.c_p, P.p, "C_p");
  C.source = src.str();
  return C;
}

// The configured parameters with alpha_fraction resolved against the thresholds.
inline ProblemParams effective_params(const RunConfig& cfg, const ConstantsUsed& C) {
  ProblemParams P = cfg.params;
  if (cfg.alpha_fraction) {
    if (!is_mixed(classify_regime(P)))
      throw RegimeMismatch("alpha_fraction needs thresholds, which exist only in the mixed regime");
    P.alpha = *cfg.alpha_fraction * admissible_alpha(P, C);
  }
  return P;
}

// ---- output files ------------------------------------------------------------------------

// Writes to a sibling temp file and renames it over the target.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os << content;
    if (!content.empty() && content.back() != '\n') os << '\n';
    os.close();
    if (!os) throw Error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string provenance(const ProblemParams& P, const ConstantsUsed& C) {
  std::ostringstream os;
  os << "# params " << describe(P) << '\n'
     << "# constants C_p=" << format_double(C.c_p) << " C_q=" << format_double(C.c_q)
     << " S_HL=" << format_double(C.s_hl) << " (" << C.source << ")\n";
  return os.str();
}

inline std::string sweep_csv(const SweepResult& sweep, const std::string& header_comments) {
  std::ostringstream os;
  os << header_comments << "alpha,m,sigma,grad_loc,lambda_loc,converged_loc,converged_mp\n";
  for (const auto& r : sweep.rows)
    os << format_double(r.alpha) << ',' << format_double(r.m) << ',' << format_double(r.sigma) << ','
       << format_double(r.grad_loc) << ',' << format_double(r.lambda_loc) << ',' << (r.converged_loc ? 1 : 0) << ','
       << (r.converged_mp ? 1 : 0) << '\n';
  return os.str();
}

inline std::string solution_field(const SolutionRecord& r, const std::string& header_comments) {
  std::ostringstream os;
  os << header_comments;
  write_radial_function(os, r.profile, r.params.mu);
  return os.str();
}

// key=value sidecar followed by the verification block.
inline std::string solution_meta(const SolutionRecord& r, const std::vector<Check>& checks,
                                 const std::string& header_comments) {
  std::ostringstream os;
  os << header_comments << "kind=" << to_string(r.kind) << '\n'
     << "regime=" << to_string(r.regime) << '\n'
     << "energy=" << format_double(r.energy) << '\n'
     << "lambda=" << format_double(r.lambda) << '\n'
     << "lambda_pohozaev=" << format_double(r.lambda_pohozaev) << '\n'
     << "grad_l2=" << format_double(r.grad_l2) << '\n'
     << "mass=" << format_double(r.mass) << '\n'
     << "h1_norm=" << format_double(r.h1_norm) << '\n'
     << "pohozaev_residual=" << format_double(r.pohozaev_residual) << '\n'
     << "pohozaev_scale=" << format_double(r.pohozaev_scale) << '\n'
     << "el_residual=" << format_double(r.el_residual) << '\n'
     << "gradient_norm=" << format_double(r.gradient_norm) << '\n'
     << "fiber_shift=" << format_double(r.fiber_shift) << '\n'
     << "morse=" << to_string(r.morse) << '\n'
     << "t0=" << (r.t0 ? format_double(*r.t0) : std::string("n/a")) << '\n'
     << "iterations=" << r.iterations << '\n'
     << "converged=" << (r.converged ? "true" : "false") << '\n'
     << "[verification]\n";
  for (const auto& c : checks) os << c.name << '=' << (c.pass ? "pass" : "FAIL") << " # " << c.detail << '\n';
  os << "all=" << (all_pass(checks) ? "pass" : "FAIL") << '\n';
  return os.str();
}

// The critical bound is stated for q > 10/3; the estimates feeding it only need q > 8/3.
inline std::optional<std::string> critical_q_warning(const ProblemParams& P) {
  if (!(P.N == 3 && P.theta == 2.0 && P.mu == 2.0 && is_critical(P))) return std::nullopt;
  if (P.q > 10.0 / 3.0) return std::nullopt;
  return "warning: q = " + format_double(P.q) +
         " is below 10/3; the critical bound is stated for 10/3 < q < 4 while its supporting estimates need only q > 8/3";
}

struct ThresholdReport {
  Regime regime = Regime::CaseI;
  std::optional<ThresholdSet> thresholds;
  std::optional<GProfile> g;
  std::string g_error;
  std::vector<std::pair<std::string, std::string>> hypotheses;  // (statement, verdict)
  std::optional<std::string> warning;
};

inline ThresholdReport threshold_report(const ProblemParams& P, const ConstantsUsed& C) {
  ThresholdReport r;
  r.regime = classify_regime(P);
  r.warning = critical_q_warning(P);
  if (!is_mixed(r.regime)) {
    r.hypotheses.push_back({"alpha thresholds", "not required"});
    r.hypotheses.push_back({"alpha > 0", P.alpha > 0 ? "pass" : "fail"});
    return r;
  }
  r.thresholds = compute_thresholds(P, C.c_p, C.c_q, C.s_hl);
  const auto& T = *r.thresholds;
  auto check = [&](const std::string& name, double bound) {
    if (P.alpha == 0) {
      r.hypotheses.push_back({"alpha < " + name, "alpha=0: not applicable"});
      return;
    }
    r.hypotheses.push_back({"alpha < " + name, P.alpha < bound ? "pass" : "fail"});
  };
  check("alpha1", T.alpha1);
  check("alpha2", T.alpha2);
  if (T.alpha3) check("alpha3", *T.alpha3);
  if (P.alpha > 0) {
    try {
      r.g = g_profile(P, T.c_p_used, C.c_q);
    } catch (const Error& e) {
      r.g_error = e.what();
    }
  } else {
    r.g_error = "alpha=0: g has no sublinear term";
  }
  return r;
}

inline void write_threshold_report(std::ostream& os, const ThresholdReport& r) {
  os << "regime=" << to_string(r.regime) << '\n';
  if (r.thresholds) {
    const auto& T = *r.thresholds;
    os << "alpha1=" << format_double(T.alpha1) << '\n'
       << "alpha2=" << format_double(T.alpha2) << '\n'
       << "alpha3=" << (T.alpha3 ? format_double(*T.alpha3) : std::string("n/a")) << '\n'
       << "kappa=" << format_double(T.kappa) << '\n'
       << "alpha_max=" << format_double(T.alpha_max()) << '\n';
  } else {
    os << "thresholds=not required\n";
  }
  if (r.g)
    os << "t0=" << format_double(r.g->t0) << '\n' << "t1=" << format_double(r.g->t1) << '\n';
  else if (!r.g_error.empty())
    os << "t0=n/a\nt1=n/a\n# " << r.g_error << '\n';
  for (const auto& [h, v] : r.hypotheses) os << "check " << h << ": " << v << '\n';
  if (r.warning) os << "# " << *r.warning << '\n';
}

}  // namespace kcn
