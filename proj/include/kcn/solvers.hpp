#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kcn/constants_estimation.hpp"
#include "kcn/errors.hpp"
#include "kcn/exponents.hpp"
#include "kcn/fiber_geometry.hpp"
#include "kcn/functional.hpp"
#include "kcn/radial_field.hpp"
#include "kcn/riesz.hpp"

namespace kcn {

enum class SolutionKind { LocalMin, MountainPass };

inline const char* to_string(SolutionKind k) { return k == SolutionKind::LocalMin ? "local" : "mp"; }

struct SolverOptions {
  double grad_tol = 1e-6;  // constrained gradient norm <= grad_tol (1 + |J|)
  double el_tol = 1e-4;    // EL residual <= el_tol (1 + |u|_H1)
  double el_safety = 0.5;  // stop at this fraction of the EL budget
  int max_iter = 50000;
  double armijo = 1e-4;
  double guard_margin = 0.05;  // fraction of t0 kept free by the local-min guard
  double curvature = 0.9;      // approximate Wolfe curvature parameter
  double noise = 1e-12;        // energy noise floor, relative to the summed fiber terms
  int memory = 8;              // L-BFGS pairs
};

// Constants used for thresholds, recorded with every result.
struct ConstantsUsed {
  double c_p = 0;
  double c_q = 0;
  double s_hl = 0;
  std::string source = "unspecified";
};

struct SolutionRecord {
  SolutionRecord(RadialFunction solution, RadialFunction representative)
      : profile(std::move(solution)), base(std::move(representative)) {}

  RadialFunction profile;  // the solution, on the base grid shrunk by exp(-fiber_shift)
  RadialFunction base;     // fiber representative on the base grid
  SolutionKind kind = SolutionKind::LocalMin;
  double energy = 0;
  double pohozaev_residual = 0;
  double pohozaev_scale = 0;  // a|grad u|^2 + b|grad u|^{2 theta}
  double lambda = 0;
  double lambda_pohozaev = 0;  // lambda from the Pohozaev-reduced identity
  double grad_l2 = 0;
  double mass = 0;
  double h1_norm = 0;
  double el_residual = 0;
  double gradient_norm = 0;  // constrained gradient of the reduced functional
  double fiber_shift = 0;
  MorseClass morse = MorseClass::Pzero;
  int iterations = 0;
  double wall_time = 0;
  bool converged = false;
  std::optional<double> t0;  // Upsilon radius for local minimizers
  Regime regime = Regime::CaseI;
  ProblemParams params;
  ConstantsUsed constants;
};

// ---- reduced functional v -> E_v(s*(v)) -------------------------------------------------

class ReducedFunctional {
 public:
  struct Eval {
    BaseQuantities base;
    FiberReport fiber;
    double s = 0;
    double value = 0;
    std::vector<double> phi_q, phi_p;
  };

  ReducedFunctional(const ProblemParams& P, const RieszKernel& K, SolutionKind kind)
      : P_(P), K_(K), kind_(kind), exps_(derive_exponents(P)) {}

  // Empty when the fiber structure required by the kind is absent.
  std::optional<Eval> evaluate(std::span<const double> v) const {
    const auto& g = *K_.grid();
    const std::size_t M = v.size();
    Eval e;
    auto potential = [&](double t, std::vector<double>& phi) {
      std::vector<double> f(M);
      for (std::size_t i = 0; i < M; ++i) f[i] = std::pow(std::abs(v[i]), t);
      phi.assign(M, 0.0);
      K_.apply(f, phi);
      return weighted_dot(g, f, phi);
    };
    e.base.d_q = P_.alpha != 0 ? potential(P_.q, e.phi_q) : 0.0;
    if (P_.alpha == 0) e.phi_q.assign(M, 0.0);
    e.base.d_p = potential(P_.p, e.phi_p);
    e.base.grad2 = kinetic_form(g, v);
    e.base.mass2 = weighted_dot(g, v, v);
    try {
      e.fiber = fiber_report(e.base, P_);
    } catch (const StructureMismatch&) {
      return std::nullopt;
    }
    if (kind_ == SolutionKind::LocalMin && !e.fiber.two_point()) return std::nullopt;
    e.s = kind_ == SolutionKind::LocalMin ? e.fiber.minimum().s : e.fiber.maximum().s;
    e.value = e.fiber.map.value(e.s);
    return e;
  }

  // Envelope gradient: the fiber parameter is stationary, so only the base quantities vary.
  std::vector<double> gradient(std::span<const double> v, const Eval& e, double* stiff_out = nullptr) const {
    const auto& g = *K_.grid();
    const std::size_t M = v.size();
    const double s = e.s;
    const double stiff =
        P_.a * std::exp(2 * s) + P_.b * std::pow(e.base.grad2, P_.theta - 1) * std::exp(2 * P_.theta * s);
    const double wq = P_.alpha * std::exp(2 * P_.q * exps_.delta_q * s);
    const double wp = std::exp(2 * P_.p * exps_.delta_p * s);
    std::vector<double> lap(M), grad(M);
    apply_laplacian(g, v, lap);
    auto odd_power = [](double x, double t) {
      const double m = std::pow(std::abs(x), t);
      return x > 0 ? m : (x < 0 ? -m : 0.0);
    };
    for (std::size_t i = 0; i < M; ++i) {
      double force = wp * e.phi_p[i] * odd_power(v[i], P_.p - 1);
      if (wq != 0) force += wq * e.phi_q[i] * odd_power(v[i], P_.q - 1);
      grad[i] = -stiff * lap[i] - force;
    }
    if (stiff_out) *stiff_out = stiff;
    return grad;
  }

 private:
  ProblemParams P_;
  const RieszKernel& K_;
  SolutionKind kind_;
  DerivedExponents exps_;
};

namespace detail {

struct DescentOutcome {
  std::vector<double> v;
  ReducedFunctional::Eval eval;
  double gradient_norm = 0;
  int iterations = 0;
  bool converged = false;
};

// Projected L-BFGS for the reduced functional on the mass sphere. The initial inverse Hessian is
// the Helmholtz operator built from the current Kirchhoff coefficient and multiplier.
inline DescentOutcome reduced_descent(const ReducedFunctional& F, const RadialGrid& g, std::vector<double> v, double c,
                                      const SolverOptions& opt) {
  using Eval = ReducedFunctional::Eval;
  const std::size_t M = v.size();
  auto dot = [&](std::span<const double> x, std::span<const double> y) { return weighted_dot(g, x, y); };
  auto normalize = [&](std::vector<double>& x) {
    const double n = std::sqrt(dot(x, x));
    if (!(n > 0)) throw ZeroFunction("descent iterate vanished");
    for (double& y : x) y *= c / n;
  };
  auto to_tangent = [&](std::vector<double>& x, std::span<const double> at) {
    const double k = dot(x, at) / (c * c);
    for (std::size_t i = 0; i < M; ++i) x[i] -= k * at[i];
  };
  struct Local {
    std::vector<double> proj;
    double stiff = 0, lam = 0;
  };
  // The full gradient is dominated by lambda v; everything downstream uses the tangent part.
  auto local = [&](std::span<const double> x, const Eval& e) {
    Local out;
    out.proj = F.gradient(x, e, &out.stiff);
    out.lam = dot(out.proj, x) / (c * c);
    for (std::size_t i = 0; i < M; ++i) out.proj[i] -= out.lam * x[i];
    return out;
  };
  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;

  normalize(v);
  auto ev = F.evaluate(v);
  if (!ev) throw StructureMismatch("initial profile does not have the fiber structure the solver needs");
  Local cur = local(v, *ev);
  DescentOutcome out;
  std::vector<double> trial(M), dir(M);
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    out.gradient_norm = std::sqrt(dot(cur.proj, cur.proj));
    // The projected gradient is the EL residual of the dilated iterate (dilation is an L2 isometry),
    // so both tolerances are enforced here.
    const double h1 = std::sqrt(c * c + std::exp(2 * ev->s) * ev->base.grad2);
    const double target =
        std::min(opt.grad_tol * (1 + std::abs(ev->value)), opt.el_safety * opt.el_tol * (1 + h1));
    if (out.gradient_norm <= target) {
      out.converged = true;
      break;
    }
    const double shift = std::max(std::abs(cur.lam), 1e-8 * cur.stiff);
    auto precondition = [&](const std::vector<double>& r) {
      auto z = solve_helmholtz(g, cur.stiff, shift, r);
      const auto zv = solve_helmholtz(g, cur.stiff, shift, v);
      const double k = dot(z, v) / dot(zv, v);
      for (std::size_t i = 0; i < M; ++i) z[i] -= k * zv[i];
      return z;
    };
    std::vector<double> q = cur.proj;
    std::vector<double> coef(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      coef[k] = memory[k].rho * dot(memory[k].s, q);
      for (std::size_t i = 0; i < M; ++i) q[i] -= coef[k] * memory[k].y[i];
    }
    dir = precondition(q);
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const double b = memory[k].rho * dot(memory[k].y, dir);
      for (std::size_t i = 0; i < M; ++i) dir[i] += (coef[k] - b) * memory[k].s[i];
    }
    to_tangent(dir, v);
    double slope = dot(cur.proj, dir);
    if (!(slope > 0)) {
      memory.clear();
      dir = precondition(cur.proj);
      slope = dot(cur.proj, dir);
      if (!(slope > 0)) break;
    }

    // Armijo with halving. Near convergence the energy drop sinks below rounding noise; there an
    // approximate Wolfe test on the path derivative decides instead.
    const double noise = opt.noise * exp_sum_scale(ev->fiber.map, ev->s);
    std::optional<Eval> next;
    Local nxt;
    double step = 1.0, lo = 0, hi = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 60 && !next; ++k) {
      for (std::size_t i = 0; i < M; ++i) trial[i] = v[i] - step * dir[i];
      normalize(trial);
      auto e = F.evaluate(trial);
      if (e && e->value <= ev->value - opt.armijo * step * slope) {
        nxt = local(trial, *e);
        next = std::move(e);
      } else if (e && e->value <= ev->value + noise) {
        Local l = local(trial, *e);
        const double d = -dot(l.proj, dir);
        if (d <= (1 - 2 * opt.armijo) * slope && d >= -opt.curvature * slope) {
          nxt = std::move(l);
          next = std::move(e);
        } else if (d < -opt.curvature * slope) {
          lo = step;
          step = std::isfinite(hi) ? 0.5 * (lo + hi) : 2 * step;
        } else {
          hi = step;
          const double secant = step * slope / (slope + d);
          step = std::clamp(secant, lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo));
        }
      } else {
        hi = step;
        step = 0.5 * (lo + hi);
      }
    }
    if (!next) break;
    Pair pr{std::vector<double>(M), std::vector<double>(M), 0.0};
    for (std::size_t i = 0; i < M; ++i) {
      pr.s[i] = trial[i] - v[i];
      pr.y[i] = nxt.proj[i] - cur.proj[i];
    }
    to_tangent(pr.s, trial);
    to_tangent(pr.y, trial);
    const double sy = dot(pr.s, pr.y);
    if (sy > 1e-12 * std::sqrt(dot(pr.s, pr.s) * dot(pr.y, pr.y))) {
      pr.rho = 1 / sy;
      memory.push_back(std::move(pr));
      if (memory.size() > static_cast<std::size_t>(opt.memory)) memory.pop_front();
    }
    v.swap(trial);
    ev = std::move(next);
    cur = std::move(nxt);
  }
  out.iterations = it;
  out.v = std::move(v);
  out.eval = std::move(*ev);
  return out;
}

}  // namespace detail

inline RadialFunction local_min_init(const GridPtr& grid, double c) { return gaussian(grid, 1.0, c); }

inline RadialFunction mountain_pass_init(const GridPtr& grid, double c) {
  const auto b = normalize_mass(bubble(grid, 0.5, 4.0), 1.0);
  const auto gs = gaussian(grid, 1.0, 1.0);
  std::vector<double> v(grid->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * (b[i] + gs[i]);
  return normalize_mass(RadialFunction(grid, std::move(v)), c);
}

// Shared tail: run the descent, then rebuild every diagnostic on the dilated solution.
inline SolutionRecord solve_reduced(SolutionKind kind, const ProblemParams& P, const RieszKernel& K,
                                    const ConstantsUsed& constants, const RadialFunction& init,
                                    const SolverOptions& opt) {
  require_same_grid(*K.grid(), *init.grid());
  const auto start = std::chrono::steady_clock::now();
  ReducedFunctional F(P, K, kind);
  auto res = detail::reduced_descent(F, *K.grid(), std::vector<double>(init.values().begin(), init.values().end()),
                                     P.c, opt);
  const double s_star = res.eval.s;
  RadialFunction base(K.grid(), std::move(res.v));
  auto solution = dilate_exact(base, s_star);
  SolutionRecord rec(std::move(solution), std::move(base));
  rec.kind = kind;
  rec.params = P;
  rec.constants = constants;
  rec.regime = classify_regime(P);
  rec.iterations = res.iterations;
  rec.gradient_norm = res.gradient_norm;
  rec.fiber_shift = s_star;
  const auto Ku = K.on_grid(rec.profile.grid());
  const auto B = base_quantities(rec.profile, P, Ku);
  rec.energy = energy_from(B, P).total;
  rec.pohozaev_residual = std::abs(pohozaev_from(B, P));
  rec.pohozaev_scale = P.a * B.grad2 + P.b * std::pow(B.grad2, P.theta);
  rec.lambda = lagrange_multiplier_from(B, P);
  rec.lambda_pohozaev = lagrange_multiplier_on_manifold(B, P);
  rec.grad_l2 = std::sqrt(B.grad2);
  rec.mass = std::sqrt(B.mass2);
  rec.h1_norm = std::sqrt(B.mass2 + B.grad2);
  rec.el_residual = el_residual(rec.profile, rec.lambda, P, Ku).norm;
  const auto map = fiber_map(B, P);
  rec.morse = classify_morse(map.d2(0.0), map.value(0.0));
  rec.converged = res.converged;
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

inline double admissible_alpha(const ProblemParams& P, const ConstantsUsed& C) {
  return compute_thresholds(P, C.c_p, C.c_q, C.s_hl).alpha_max();
}

inline SolutionRecord solve_local_min(const ProblemParams& P, const RieszKernel& K, const ConstantsUsed& C,
                                      std::optional<RadialFunction> init = std::nullopt,
                                      const SolverOptions& opt = {}) {
  validate(P);
  const Regime regime = classify_regime(P);
  if (!is_mixed(regime))
    throw RegimeMismatch(std::string("a local minimizer exists only in the mixed regime, not ") + to_string(regime));
  if (!(P.alpha > 0)) throw ThresholdViolated("the local minimizer needs alpha > 0");
  const auto T = compute_thresholds(P, C.c_p, C.c_q, C.s_hl);
  if (!(P.alpha < T.alpha_max()))
    throw ThresholdViolated("alpha = " + format_double(P.alpha) + " is not below the threshold " +
                            format_double(T.alpha_max()));
  const double t0 = g_profile(P, T.c_p_used, C.c_q).t0;
  auto rec = solve_reduced(SolutionKind::LocalMin, P, K, C, init ? *init : local_min_init(K.grid(), P.c), opt);
  rec.t0 = t0;
  if (!(rec.grad_l2 < (1 - opt.guard_margin) * t0))
    rec.converged = false;  // left the Upsilon ball: not the local minimizer the theory describes
  if (!rec.converged && rec.iterations >= opt.max_iter)
    throw NotConverged("local-min descent hit the iteration cap");
  return rec;
}

inline SolutionRecord solve_mountain_pass(const ProblemParams& P, const RieszKernel& K, const ConstantsUsed& C,
                                          std::optional<RadialFunction> init = std::nullopt,
                                          const SolverOptions& opt = {}) {
  validate(P);
  const Regime regime = classify_regime(P);
  if (is_mixed(regime) && P.alpha > 0) {
    const double cap = admissible_alpha(P, C);
    if (!(P.alpha < cap))
      throw ThresholdViolated("alpha = " + format_double(P.alpha) + " is not below the threshold " + format_double(cap));
  }
  auto rec = solve_reduced(SolutionKind::MountainPass, P, K, C, init ? *init : mountain_pass_init(K.grid(), P.c), opt);
  if (!rec.converged && rec.iterations >= opt.max_iter)
    throw NotConverged("mountain-pass descent hit the iteration cap");
  return rec;
}

// ---- invariant checks ---------------------------------------------------------------------

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline std::vector<Check> verify_record(const SolutionRecord& r) {
  std::vector<Check> out;
  auto add = [&](std::string name, bool pass, std::string detail) {
    out.push_back({std::move(name), pass, std::move(detail)});
  };
  add("converged", r.converged, "iterations " + std::to_string(r.iterations));
  add("mass", std::abs(r.mass - r.params.c) <= 1e-8 * r.params.c, "|u|_2 = " + format_double(r.mass));
  add("pohozaev", r.pohozaev_residual <= 1e-6 * r.pohozaev_scale,
      format_double(r.pohozaev_residual) + " vs scale " + format_double(r.pohozaev_scale));
  add("el_residual", r.el_residual <= 1e-4 * (1 + r.h1_norm), format_double(r.el_residual));
  add("lambda_negative", r.lambda < 0, format_double(r.lambda));
  if (r.kind == SolutionKind::LocalMin) {
    add("energy_negative", r.energy < 0, format_double(r.energy));
    add("inside_upsilon", r.t0 && r.grad_l2 < *r.t0, "grad " + format_double(r.grad_l2));
    add("morse_pplus", r.morse == MorseClass::Pplus, to_string(r.morse));
  } else {
    add("energy_positive", r.energy > 0, format_double(r.energy));
    add("morse_pminus", r.morse == MorseClass::Pminus, to_string(r.morse));
  }
  return out;
}

inline bool all_pass(const std::vector<Check>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

// ---- alpha ladder ----------------------------------------------------------------------------

struct SweepRow {
  double alpha = 0;
  double m = std::numeric_limits<double>::quiet_NaN();
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double grad_loc = std::numeric_limits<double>::quiet_NaN();
  double lambda_loc = std::numeric_limits<double>::quiet_NaN();
  bool converged_loc = false;
  bool converged_mp = false;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SolutionRecord> local;  // one per row where the local solve ran
  std::vector<SolutionRecord> mountain;
};

// Rows follow the given order; each solve warm-starts from the previous row's fiber representative.
inline SweepResult sweep_alpha(const ProblemParams& P, const std::vector<double>& alphas, const RieszKernel& K,
                               const ConstantsUsed& C, const SolverOptions& opt = {}) {
  SweepResult out;
  std::optional<RadialFunction> warm_loc, warm_mp;
  for (double alpha : alphas) {
    ProblemParams Q = P;
    Q.alpha = alpha;
    SweepRow row;
    row.alpha = alpha;
    if (alpha > 0) {
      try {
        auto rec = solve_local_min(Q, K, C, warm_loc, opt);
        row.m = rec.energy;
        row.grad_loc = rec.grad_l2;
        row.lambda_loc = rec.lambda;
        row.converged_loc = rec.converged && all_pass(verify_record(rec));
        warm_loc = rec.base;
        out.local.push_back(std::move(rec));
      } catch (const Error& e) {
        row.error = std::string("local: ") + e.what();
      }
    }
    try {
      auto rec = solve_mountain_pass(Q, K, C, warm_mp, opt);
      row.sigma = rec.energy;
      row.converged_mp = rec.converged && all_pass(verify_record(rec));
      warm_mp = rec.base;
      out.mountain.push_back(std::move(rec));
    } catch (const Error& e) {
      row.error += (row.error.empty() ? "" : "; ") + std::string("mp: ") + e.what();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

// H1 distance of two solution profiles, with b resampled onto a's grid.
inline double h1_distance(const SolutionRecord& a, const SolutionRecord& b) {
  const auto& g = *a.profile.grid();
  const auto bb = resample(b.profile, a.profile.grid());
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.profile[i] - bb[i];
  return std::sqrt(weighted_dot(g, d, d) + kinetic_form(g, d));
}

// ---- critical-case bound ---------------------------------------------------------------------

struct CriticalBound {
  explicit CriticalBound(SolutionRecord r) : record(std::move(r)) {}

  SolutionRecord record;
  double sigma = 0;
  double bound = 0;
  double lambda_cardano = 0;
  bool ok = false;
};

inline CriticalBound critical_bound_check(const ProblemParams& P, const RieszKernel& K, const ConstantsUsed& C,
                                          std::optional<RadialFunction> init = std::nullopt,
                                          const SolverOptions& opt = {}) {
  if (!(P.N == 3 && P.theta == 2.0 && P.mu == 2.0 && is_critical(P)))
    throw RegimeMismatch("the critical bound applies to N=3, theta=2, mu=2, p=4");
  if (!cardano_admissible(P.a, P.b, C.s_hl)) throw DiscriminantNonpositive("a^2/4 - b^3 S_HL^4/27 must be positive");
  CriticalBound out(solve_mountain_pass(P, K, C, std::move(init), opt));
  out.lambda_cardano = cardano_lambda(P.a, P.b, C.s_hl, CardanoVariant::Theta2Mu2);
  out.bound = cardano_bound(P.a, P.b, C.s_hl, out.lambda_cardano, CardanoVariant::Theta2Mu2);
  out.sigma = out.record.energy;
  out.ok = out.sigma > 0 && out.sigma < out.bound;
  return out;
}

}  // namespace kcn
