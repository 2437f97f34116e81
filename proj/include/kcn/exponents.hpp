#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "kcn/errors.hpp"

namespace kcn {

struct ProblemParams {
  int N = 3;
  double mu = 2.0;
  double a = 1.0;
  double b = 1.0;
  double theta = 2.0;
  double c = 1.0;
  double q = 1.5;
  double p = 3.0;
  double alpha = 0.0;
};

template <class Real>
struct ExponentSet {
  Real two_mu_lower;
  Real two_mu_star;
  Real a_star;
  Real b_star;
  Real delta_q;
  Real delta_p;
};

using DerivedExponents = ExponentSet<double>;

// delta_r = (N(r-2)+mu)/(2r); only field operations, so exact for rational Real.
template <class Real>
Real delta_of(int N, const Real& mu, const Real& r) {
  return (Real(N) * (r - Real(2)) + mu) / (Real(2) * r);
}

template <class Real>
ExponentSet<Real> exponent_set(int N, const Real& mu, const Real& theta, const Real& q, const Real& p) {
  ExponentSet<Real> e{};
  e.two_mu_lower = (Real(2 * N) - mu) / Real(N);
  e.two_mu_star = (Real(2 * N) - mu) / Real(N - 2);
  e.a_star = Real(2) + (Real(2) - mu) / Real(N);
  e.b_star = Real(2) + (Real(2) * theta - mu) / Real(N);
  e.delta_q = delta_of(N, mu, q);
  e.delta_p = delta_of(N, mu, p);
  return e;
}

inline double two_mu_star(int N, double mu) { return (2.0 * N - mu) / (N - 2); }
inline double two_mu_lower(int N, double mu) { return (2.0 * N - mu) / N; }

// Exponent coincidence test; inputs like 8/3 arrive rounded.
inline bool same_exponent(double x, double y) {
  return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(y));
}

inline bool is_critical(const ProblemParams& P) { return same_exponent(P.p, two_mu_star(P.N, P.mu)); }

inline std::string describe(const ProblemParams& P) {
  std::ostringstream os;
  os.precision(17);
  os << "N=" << P.N << " mu=" << P.mu << " a=" << P.a << " b=" << P.b << " theta=" << P.theta
     << " c=" << P.c << " q=" << P.q << " p=" << P.p << " alpha=" << P.alpha;
  return os.str();
}

inline void validate(const ProblemParams& P) {
  auto fail = [&](const std::string& why) { throw InvalidParams(why + " (" + describe(P) + ")"); };
  if (P.N < 3) fail("dimension must be at least 3");
  for (double v : {P.mu, P.a, P.b, P.theta, P.c, P.q, P.p, P.alpha})
    if (!std::isfinite(v)) fail("non-finite parameter");
  if (!(P.mu > 0.0 && P.mu < P.N)) fail("mu must lie in (0, N)");
  if (!(P.a > 0.0 && P.b > 0.0 && P.c > 0.0)) fail("a, b, c must be positive");
  if (!(P.alpha >= 0.0)) fail("alpha must be nonnegative");
  const double upper = two_mu_star(P.N, P.mu);
  const double lower = two_mu_lower(P.N, P.mu);
  if (!(P.theta > 1.0 && P.theta < upper)) fail("theta must lie in (1, 2*_mu)");
  if (!(P.q > lower)) fail("q must exceed 2_{mu,*}");
  if (!(P.q < P.p)) fail("q must be smaller than p");
  if (!(P.p < upper || same_exponent(P.p, upper))) fail("p must not exceed 2*_mu");
}

inline DerivedExponents derive_exponents(const ProblemParams& P) {
  validate(P);
  auto e = exponent_set<double>(P.N, P.mu, P.theta, P.q, P.p);
  if (is_critical(P)) e.delta_p = 1.0;
  return e;
}

enum class Regime { CaseI, CaseII, CaseIII, CaseIV };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::CaseI: return "CaseI";
    case Regime::CaseII: return "CaseII";
    case Regime::CaseIII: return "CaseIII";
    case Regime::CaseIV: return "CaseIV";
  }
  return "?";
}

inline bool is_mixed(Regime r) { return r == Regime::CaseI || r == Regime::CaseII; }

inline Regime classify_regime(const ProblemParams& P) {
  const auto e = derive_exponents(P);
  for (double x : {P.q, P.p})
    for (double edge : {e.a_star, e.b_star})
      if (same_exponent(x, edge))
        throw BoundaryExponent("exponent " + std::to_string(x) + " sits on an L2-critical value");
  const bool critical = is_critical(P);
  if (P.q < e.a_star) {
    if (critical) return Regime::CaseII;
    if (P.p > e.b_star) return Regime::CaseI;
  } else if (P.q > e.b_star) {
    return critical ? Regime::CaseIV : Regime::CaseIII;
  }
  throw RegimeMismatch("(q, p) lies outside the four covered cases (" + describe(P) + ")");
}

template <class Real>
struct ThresholdFormulas {
  Real alpha1;
  Real alpha2;
  Real alpha3;  // NaN unless p is critical
  Real kappa;
  Real kappa_base;
};

template <class Real>
Real kappa_base_of(const Real& theta, const Real& qd, const Real& pd) {
  return theta * (theta - qd) * (theta - Real(1)) / (pd * (pd - qd) * (pd - Real(1)));
}

// Closed-form thresholds for the mixed regime. qd = q*delta_q, pd = p*delta_p.
// When critical, C_p must already equal S^{-2*}.
template <class Real>
ThresholdFormulas<Real> threshold_formulas(int N, const Real& mu, const Real& a, const Real& b,
                                           const Real& theta, const Real& c, const Real& q,
                                           const Real& p, const Real& C_p, const Real& C_q,
                                           const Real& S, bool critical) {
  using std::pow;
  const Real one(1), two(2);
  const Real dq = delta_of(N, mu, q);
  const Real dp = critical ? one : delta_of(N, mu, p);
  const Real qd = q * dq, pd = p * dp;
  const Real s = (theta - qd) / (pd - theta);
  const Real t = (pd - qd) / (pd - theta);
  const Real e1 = (one - qd) / (pd - theta);
  const Real cq = two * q * (one - dq);
  const Real cp = two * p * (one - dp);

  ThresholdFormulas<Real> out{};
  out.kappa_base = kappa_base_of(theta, qd, pd);
  out.kappa = pow(out.kappa_base, s) - pow(out.kappa_base, t);

  out.alpha1 = pow(b * (theta - qd) / (dp * (pd - qd) * C_p * pow(c, cp)), s) * b * (pd - theta) /
               (dq * (pd - qd) * C_q * pow(c, cq));

  const Real first = a / pow(c, cq + cp * e1) * pow(b * p / (theta * C_p), e1);
  const Real second = two / pow(c, cq + cp * s) * pow(b / (two * theta), t) / pow(C_p / (two * p), s);
  out.alpha2 = out.kappa * q / C_q * (first + second);

  if (critical) {
    const Real ts = (Real(2 * N) - mu) / Real(N - 2);
    const Real level = pow(pow(S, theta + one) * Real(4) * a * b, ts / (two * ts - (theta + one)));
    out.alpha3 = pow(level * q / (theta - qd), (theta - qd) / theta) * pow(b / dq, qd / theta) *
                 (ts - theta) / ((ts - qd) * C_q * pow(c, cq));
  } else {
    out.alpha3 = Real(std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

struct ThresholdSet {
  double alpha1 = 0;
  double alpha2 = 0;
  std::optional<double> alpha3;
  double kappa = 0;
  double kappa_base = 0;
  double c_p = 0;       // constant supplied by the caller
  double c_q = 0;
  double s_hl = 0;
  double c_p_used = 0;  // S^{-2*} in the critical case
  Regime regime = Regime::CaseI;

  double alpha_max() const {
    double m = std::min(alpha1, alpha2);
    if (alpha3) m = std::min(m, *alpha3);
    return m;
  }
};

inline ThresholdSet compute_thresholds(const ProblemParams& P, double c_p, double c_q, double s_hl) {
  if (!(c_p > 0 && c_q > 0 && s_hl > 0)) throw InvalidParams("threshold constants must be positive");
  const Regime regime = classify_regime(P);
  if (!is_mixed(regime))
    throw RegimeMismatch(std::string("thresholds need q < A*; regime is ") + to_string(regime));
  const bool critical = regime == Regime::CaseII;
  ThresholdSet T;
  T.regime = regime;
  T.c_p = c_p;
  T.c_q = c_q;
  T.s_hl = s_hl;
  T.c_p_used = critical ? std::pow(s_hl, -two_mu_star(P.N, P.mu)) : c_p;
  const auto f = threshold_formulas<double>(P.N, P.mu, P.a, P.b, P.theta, P.c, P.q, P.p, T.c_p_used,
                                            c_q, s_hl, critical);
  T.alpha1 = f.alpha1;
  T.alpha2 = f.alpha2;
  if (critical) T.alpha3 = f.alpha3;
  T.kappa = f.kappa;
  T.kappa_base = f.kappa_base;
  return T;
}

enum class CardanoVariant { Theta2Mu2, Theta3Mu1 };

inline const char* to_string(CardanoVariant v) {
  return v == CardanoVariant::Theta2Mu2 ? "theta2mu2" : "theta3mu1";
}

template <class Real>
bool cardano_admissible(const Real& a, const Real& b, const Real& S) {
  using std::pow;
  return a * a / Real(4) - b * b * b * pow(S, 4) / Real(27) > Real(0);
}

template <class Real>
Real cardano_lambda_t(const Real& a, const Real& b, const Real& S, CardanoVariant variant) {
  using std::cbrt;
  using std::sqrt;
  if (variant == CardanoVariant::Theta2Mu2) {
    if (!cardano_admissible(a, b, S))
      throw DiscriminantNonpositive("a^2/4 - b^3 S^4/27 must be positive");
    const Real S2 = S * S;
    const Real disc = a * a * S2 / Real(4) - b * b * b * S2 * S2 * S2 / Real(27);
    // The two cube roots multiply to b S^2 / 3; using that avoids cancellation.
    const Real upper = cbrt(a * S / Real(2) + sqrt(disc));
    return upper + b * S2 / (Real(3) * upper);
  }
  const Real bS3 = b * S * S * S;
  return sqrt((bS3 + sqrt(bS3 * bS3 + Real(4) * a * S)) / Real(2));
}

inline double cardano_lambda(double a, double b, double s_hl, CardanoVariant variant) {
  return cardano_lambda_t<double>(a, b, s_hl, variant);
}

// Residual of the defining polynomial, relative to its largest term.
inline double cardano_residual(double lambda, double a, double b, double S, CardanoVariant variant) {
  if (variant == CardanoVariant::Theta2Mu2) {
    const double t1 = lambda * lambda * lambda, t2 = b * S * S * lambda, t3 = a * S;
    return std::abs(t1 - t2 - t3) / std::max({std::abs(t1), std::abs(t2), std::abs(t3)});
  }
  const double L2 = lambda * lambda;
  const double t1 = L2 * L2, t2 = b * S * S * S * L2, t3 = a * S;
  return std::abs(t1 - t2 - t3) / std::max({std::abs(t1), std::abs(t2), std::abs(t3)});
}

inline double cardano_bound(double a, double b, double S, double lambda, CardanoVariant variant) {
  if (variant == CardanoVariant::Theta2Mu2) return b * lambda * lambda * S * S / 8.0 + 3.0 * a * lambda * S / 8.0;
  return b * lambda * lambda * lambda * S * S * S / 15.0 + 2.0 * a * lambda * S / 5.0;
}

struct CriticalLevel {
  double general = 0;
  std::optional<CardanoVariant> variant;
  std::optional<double> lambda;
  std::optional<double> cardano_bound;
};

inline std::optional<CardanoVariant> cardano_variant_for(const ProblemParams& P) {
  if (P.N == 3 && P.theta == 2.0 && P.mu == 2.0) return CardanoVariant::Theta2Mu2;
  if (P.N == 3 && P.theta == 3.0 && P.mu == 1.0) return CardanoVariant::Theta3Mu1;
  return std::nullopt;
}

inline CriticalLevel critical_energy_level(const ProblemParams& P, double s_hl) {
  validate(P);
  if (!is_critical(P)) throw RegimeMismatch("critical level requires p = 2*_mu");
  const double ts = two_mu_star(P.N, P.mu);
  CriticalLevel out;
  out.general = std::pow(std::pow(s_hl, P.theta + 1.0) * 4.0 * P.a * P.b, ts / (2.0 * ts - (P.theta + 1.0))) *
                (ts - P.theta) / (2.0 * ts * P.theta);
  out.variant = cardano_variant_for(P);
  if (out.variant) {
    if (*out.variant == CardanoVariant::Theta3Mu1 || cardano_admissible(P.a, P.b, s_hl)) {
      out.lambda = cardano_lambda(P.a, P.b, s_hl, *out.variant);
      out.cardano_bound = cardano_bound(P.a, P.b, s_hl, *out.lambda, *out.variant);
    }
  }
  return out;
}

}  // namespace kcn
