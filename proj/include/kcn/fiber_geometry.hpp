#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "kcn/errors.hpp"
#include "kcn/exponents.hpp"
#include "kcn/functional.hpp"

namespace kcn {

// h(t) = a1 t^2 + a2 t^{2 theta} - a3 t^{p1} - a4 t^{q1}.
enum class ProfileRole { G, H };

struct ScalarProfile {
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0;
  double p1 = 0, q1 = 0;
  ProfileRole role = ProfileRole::H;

  double value(double theta, double t) const {
    return a1 * t * t + a2 * std::pow(t, 2 * theta) - a3 * std::pow(t, p1) - a4 * std::pow(t, q1);
  }
  double derivative(double theta, double t) const {
    return 2 * a1 * t + 2 * theta * a2 * std::pow(t, 2 * theta - 1) - p1 * a3 * std::pow(t, p1 - 1) -
           q1 * a4 * std::pow(t, q1 - 1);
  }
  // Same function in the variable s = log t.
  ExpSum<double> in_log_variable(double theta) const { return {{a1, a2, -a3, -a4}, {2.0, 2 * theta, p1, q1}}; }
};

struct ConditionResult {
  bool holds = false;
  double lhs = 0;
  double t1_condition = 0;
};

// Sufficient condition for h to have exactly two positive zeros.
inline ConditionResult two_zero_condition(const ScalarProfile& h, double theta) {
  if (!(h.q1 > 0 && h.q1 < 2 && 2 < 2 * theta && 2 * theta < h.p1))
    throw ExponentPattern("need 0 < q1 < 2 < 2 theta < p1");
  if (!(h.a1 > 0 && h.a2 > 0 && h.a3 > 0 && h.a4 >= 0)) throw ExponentPattern("coefficients must be positive");
  const double tt = 2 * theta;
  const double gap = h.p1 - tt;
  ConditionResult r;
  r.t1_condition = tt * (tt - h.q1) * (tt - 2) / (h.p1 * (h.p1 - h.q1) * (h.p1 - 2));
  const double lead = std::pow(r.t1_condition, (tt - h.q1) / gap) - std::pow(r.t1_condition, (h.p1 - h.q1) / gap);
  const double bracket = h.a1 * std::pow(h.a2 / h.a3, (2 - h.q1) / gap) +
                         std::pow(h.a2, (h.p1 - h.q1) / gap) / std::pow(h.a3, (tt - h.q1) / gap);
  r.lhs = h.a4 == 0 ? std::numeric_limits<double>::infinity() : lead * bracket / h.a4;
  r.holds = r.lhs > 1;
  return r;
}

// ---- roots of exponential sums on the log axis --------------------------------------

struct ExpSumScan {
  double s_lo = std::log(1e-6);
  double s_hi = std::log(1e6);
  int points = 512;
};

namespace detail {

// Order-th derivative divided by the largest term magnitude; keeps the sign without overflow.
inline double normalized(const ExpSum<double>& E, double s, int order) {
  double big = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < 4; ++k)
    if (E.coef[k] != 0) big = std::max(big, E.rate[k] * s + std::log(std::abs(E.coef[k])));
  if (!std::isfinite(big)) return 0.0;
  double sum = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    if (E.coef[k] == 0) continue;
    double term = (E.coef[k] > 0 ? 1.0 : -1.0) * std::exp(E.rate[k] * s + std::log(std::abs(E.coef[k])) - big);
    for (int o = 0; o < order; ++o) term *= E.rate[k];
    sum += term;
  }
  return sum;
}

}  // namespace detail

// Sign changes of the order-th derivative of E on a log-uniform grid, refined by TOMS 748.
inline std::vector<double> exp_sum_roots(const ExpSum<double>& E, int order, const ExpSumScan& scan = {}) {
  auto f = [&](double s) { return detail::normalized(E, s, order); };
  std::vector<double> roots;
  double s_prev = scan.s_lo, f_prev = f(s_prev);
  for (int i = 1; i < scan.points; ++i) {
    const double s = scan.s_lo + (scan.s_hi - scan.s_lo) * i / (scan.points - 1);
    const double fs = f(s);
    if (f_prev == 0.0) {
      roots.push_back(s_prev);
    } else if ((f_prev < 0) != (fs < 0) && fs != 0.0) {
      boost::uintmax_t iters = 200;
      auto tol = [](double a, double b) { return std::abs(b - a) <= 4 * std::numeric_limits<double>::epsilon() * (1 + std::abs(a)); };
      const auto br = boost::math::tools::toms748_solve(f, s_prev, s, f_prev, fs, tol, iters);
      roots.push_back(0.5 * (br.first + br.second));
    }
    s_prev = s;
    f_prev = fs;
  }
  if (f_prev == 0.0) roots.push_back(s_prev);
  return roots;
}

inline double exp_sum_scale(const ExpSum<double>& E, double s) {
  double sum = 0;
  for (std::size_t k = 0; k < 4; ++k) sum += std::abs(E.coef[k]) * std::exp(E.rate[k] * s);
  return sum;
}

// ---- g profile ------------------------------------------------------------------------

struct GProfile {
  double t0 = 0, t1 = 0;          // zeros: g > 0 exactly on (t0, t1)
  double t_minus = 0, t_plus = 0;  // local minimum and global maximum
  ScalarProfile profile;
};

inline ScalarProfile g_coefficients(const ProblemParams& P, double c_p, double c_q) {
  const auto e = derive_exponents(P);
  ScalarProfile g;
  g.role = ProfileRole::G;
  g.a1 = P.a / 2;
  g.a2 = P.b / (2 * P.theta);
  g.a3 = c_p * std::pow(P.c, 2 * P.p * (1 - e.delta_p)) / (2 * P.p);
  g.a4 = P.alpha * c_q * std::pow(P.c, 2 * P.q * (1 - e.delta_q)) / (2 * P.q);
  g.p1 = 2 * P.p * e.delta_p;
  g.q1 = 2 * P.q * e.delta_q;
  return g;
}

// c_p is the working constant for the p-term (S^{-2*} when p is critical).
inline GProfile g_profile(const ProblemParams& P, double c_p, double c_q) {
  GProfile out;
  out.profile = g_coefficients(P, c_p, c_q);
  const auto E = out.profile.in_log_variable(P.theta);
  const ExpSumScan scan{std::log(1e-12), std::log(1e12), 2048};
  const auto zeros = exp_sum_roots(E, 0, scan);
  const auto crit = exp_sum_roots(E, 1, scan);
  if (zeros.size() != 2 || crit.size() != 2) {
    std::ostringstream os;
    os << "g has " << zeros.size() << " zeros and " << crit.size()
       << " critical points; the two-zero structure needs alpha < alpha2";
    throw ConditionFailed(os.str());
  }
  out.t0 = std::exp(zeros[0]);
  out.t1 = std::exp(zeros[1]);
  out.t_minus = std::exp(crit[0]);
  out.t_plus = std::exp(crit[1]);
  if (!(out.t_minus < out.t0 && out.t0 < out.t_plus && out.t_plus < out.t1))
    throw ConditionFailed("g zeros and critical points are not interlaced");
  return out;
}

// ---- fiber critical points ------------------------------------------------------------

struct FiberPoint {
  double s = 0;
  double value = 0;
  double d2 = 0;
  MorseClass morse = MorseClass::Pzero;
};

struct FiberReport {
  std::vector<FiberPoint> critical_points;
  std::vector<double> zeros;
  Regime regime = Regime::CaseI;
  ExpSum<double> map{};

  // Local minimizer (mixed structure) and maximizer.
  const FiberPoint& minimum() const { return critical_points.front(); }
  const FiberPoint& maximum() const { return critical_points.back(); }
  bool two_point() const { return critical_points.size() == 2; }
};

// A single positive maximum is expected when no sublinear term is present.
inline bool expects_single_max(const ProblemParams& P, Regime r) { return !is_mixed(r) || P.alpha == 0; }

inline FiberReport fiber_report(const BaseQuantities& B, const ProblemParams& P) {
  FiberReport rep;
  rep.regime = classify_regime(P);
  rep.map = fiber_map(B, P);
  const auto crit = exp_sum_roots(rep.map, 1);
  rep.zeros = exp_sum_roots(rep.map, 0);
  for (double s : crit) {
    FiberPoint fp;
    fp.s = s;
    fp.value = rep.map.value(s);
    fp.d2 = rep.map.d2(s);
    fp.morse = classify_morse(fp.d2, fp.value);
    rep.critical_points.push_back(fp);
  }
  std::ostringstream why;
  const auto& cp = rep.critical_points;
  if (expects_single_max(P, rep.regime)) {
    if (cp.size() != 1 || !(cp[0].value > 0) || cp[0].morse != MorseClass::Pminus)
      why << "expected one positive maximum, found " << cp.size() << " critical points";
  } else {
    const auto& z = rep.zeros;
    if (cp.size() != 2 || z.size() != 2)
      why << "expected two critical points and two zeros, found " << cp.size() << " and " << z.size();
    else if (!(cp[0].value < 0 && cp[1].value > 0 && cp[0].morse == MorseClass::Pplus &&
               cp[1].morse == MorseClass::Pminus))
      why << "critical levels or Morse classes do not match the local-min/max pattern";
    else if (!(cp[0].s < z[0] && z[0] < cp[1].s && cp[1].s < z[1]))
      why << "critical points and zeros are not interlaced";
  }
  if (!why.str().empty()) {
    why << " (regime " << to_string(rep.regime) << ", alpha " << P.alpha << ")";
    throw StructureMismatch(why.str());
  }
  return rep;
}

inline FiberReport fiber_critical_points(const RadialFunction& u, const ProblemParams& P, const RieszKernel& K) {
  return fiber_report(base_quantities(u, P, K), P);
}

}  // namespace kcn
