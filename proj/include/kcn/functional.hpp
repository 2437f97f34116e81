#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "kcn/errors.hpp"
#include "kcn/exponents.hpp"
#include "kcn/radial_field.hpp"
#include "kcn/riesz.hpp"

namespace kcn {

// The four numbers every energy-type quantity is built from.
struct BaseQuantities {
  double grad2 = 0;  // |grad u|^2
  double d_q = 0;    // D(u, q)
  double d_p = 0;    // D(u, p)
  double mass2 = 0;  // |u|_2^2
};

inline BaseQuantities base_quantities(const RadialFunction& u, const ProblemParams& P, const RieszKernel& K) {
  require_same_grid(*K.grid(), *u.grid());
  BaseQuantities b;
  b.grad2 = kinetic_form(*u.grid(), u.values());
  b.d_q = choquard_integral(K, u, P.q);
  b.d_p = choquard_integral(K, u, P.p);
  b.mass2 = weighted_dot(*u.grid(), u.values(), u.values());
  return b;
}

struct EnergyBreakdown {
  double kin2 = 0;
  double kin2theta = 0;
  double choq_q = 0;
  double choq_p = 0;
  double total = 0;
};

inline EnergyBreakdown energy_from(const BaseQuantities& B, const ProblemParams& P) {
  EnergyBreakdown e;
  e.kin2 = 0.5 * P.a * B.grad2;
  e.kin2theta = P.b / (2 * P.theta) * std::pow(B.grad2, P.theta);
  e.choq_q = P.alpha / (2 * P.q) * B.d_q;
  e.choq_p = B.d_p / (2 * P.p);
  e.total = e.kin2 + e.kin2theta - e.choq_q - e.choq_p;
  return e;
}

inline EnergyBreakdown energy(const RadialFunction& u, const ProblemParams& P, const RieszKernel& K) {
  return energy_from(base_quantities(u, P, K), P);
}

inline double pohozaev_from(const BaseQuantities& B, const ProblemParams& P) {
  const auto e = derive_exponents(P);
  return P.a * B.grad2 + P.b * std::pow(B.grad2, P.theta) - e.delta_q * P.alpha * B.d_q - e.delta_p * B.d_p;
}

inline double pohozaev(const RadialFunction& u, const ProblemParams& P, const RieszKernel& K) {
  return pohozaev_from(base_quantities(u, P, K), P);
}

// Sum of the absolute Pohozaev terms; the natural scale for residual tolerances.
inline double pohozaev_scale(const BaseQuantities& B, const ProblemParams& P) {
  return P.a * B.grad2 + P.b * std::pow(B.grad2, P.theta) + P.alpha * B.d_q + B.d_p;
}

// ---- fiber map --------------------------------------------------------------------

// Inputs of the fiber map in any field type; grad2_theta is |grad u|^{2 theta} supplied
// separately so rational arithmetic never needs a real power.
template <class Real>
struct FiberInputs {
  Real a, b, theta, alpha, q, p, delta_q, delta_p;
  Real grad2, grad2_theta, d_q, d_p;
};

// E(s) = sum_k coef_k exp(rate_k s).
template <class Real>
struct ExpSum {
  std::array<Real, 4> coef;
  std::array<Real, 4> rate;

  Real value(const Real& s) const { return eval(s, 0); }
  Real d1(const Real& s) const { return eval(s, 1); }
  Real d2(const Real& s) const { return eval(s, 2); }

  // Derivatives at s = 0 need no exponentials.
  Real at_zero(int order) const {
    Real sum(0);
    for (std::size_t k = 0; k < 4; ++k) {
      Real term = coef[k];
      for (int o = 0; o < order; ++o) term *= rate[k];
      sum += term;
    }
    return sum;
  }

 private:
  Real eval(const Real& s, int order) const {
    using std::exp;
    Real sum(0);
    for (std::size_t k = 0; k < 4; ++k) {
      Real term = coef[k] * exp(rate[k] * s);
      for (int o = 0; o < order; ++o) term *= rate[k];
      sum += term;
    }
    return sum;
  }
};

template <class Real>
ExpSum<Real> fiber_map(const FiberInputs<Real>& in) {
  const Real two(2);
  ExpSum<Real> E;
  E.coef = {in.a / two * in.grad2, in.b / (two * in.theta) * in.grad2_theta,
            -in.alpha / (two * in.q) * in.d_q, -in.d_p / (two * in.p)};
  E.rate = {two, two * in.theta, two * in.q * in.delta_q, two * in.p * in.delta_p};
  return E;
}

template <class Real>
Real pohozaev_value(const FiberInputs<Real>& in) {
  return in.a * in.grad2 + in.b * in.grad2_theta - in.delta_q * in.alpha * in.d_q - in.delta_p * in.d_p;
}

inline FiberInputs<double> fiber_inputs(const BaseQuantities& B, const ProblemParams& P) {
  const auto e = derive_exponents(P);
  return {P.a, P.b, P.theta, P.alpha, P.q, P.p, e.delta_q, e.delta_p,
          B.grad2, std::pow(B.grad2, P.theta), B.d_q, B.d_p};
}

inline ExpSum<double> fiber_map(const BaseQuantities& B, const ProblemParams& P) {
  return fiber_map(fiber_inputs(B, P));
}

inline double fiber_energy(const RadialFunction& u, double s, const ProblemParams& P, const RieszKernel& K) {
  return fiber_map(base_quantities(u, P, K), P).value(s);
}
inline double fiber_d1(const RadialFunction& u, double s, const ProblemParams& P, const RieszKernel& K) {
  return fiber_map(base_quantities(u, P, K), P).d1(s);
}
inline double fiber_d2(const RadialFunction& u, double s, const ProblemParams& P, const RieszKernel& K) {
  return fiber_map(base_quantities(u, P, K), P).d2(s);
}

// ---- multiplier, residual, gradient --------------------------------------------------

inline void require_mass(const BaseQuantities& B, double c) {
  const double norm = std::sqrt(B.mass2);
  if (!(std::abs(norm - c) <= 1e-6 * c))
    throw MassMismatch("|u|_2 = " + std::to_string(norm) + " differs from the prescribed mass " + std::to_string(c));
}

inline double lagrange_multiplier_from(const BaseQuantities& B, const ProblemParams& P) {
  require_mass(B, P.c);
  return (P.a * B.grad2 + P.b * std::pow(B.grad2, P.theta) - P.alpha * B.d_q - B.d_p) / (P.c * P.c);
}

inline double lagrange_multiplier(const RadialFunction& u, const ProblemParams& P, const RieszKernel& K) {
  return lagrange_multiplier_from(base_quantities(u, P, K), P);
}

// Multiplier implied by the Pohozaev identity: lambda c^2 = alpha(delta_q-1)D_q + (delta_p-1)D_p.
inline double lagrange_multiplier_on_manifold(const BaseQuantities& B, const ProblemParams& P) {
  const auto e = derive_exponents(P);
  return (P.alpha * (e.delta_q - 1) * B.d_q + (e.delta_p - 1) * B.d_p) / (P.c * P.c);
}

// sign(u)|u|^{t-1} times the potential of |u|^t.
inline std::vector<double> choquard_force(const RieszKernel& K, std::span<const double> u, double t) {
  const std::size_t M = u.size();
  std::vector<double> f(M), phi(M);
  for (std::size_t i = 0; i < M; ++i) f[i] = std::pow(std::abs(u[i]), t);
  K.apply(f, phi);
  for (std::size_t i = 0; i < M; ++i) {
    const double mag = std::pow(std::abs(u[i]), t - 1);
    phi[i] *= u[i] > 0 ? mag : (u[i] < 0 ? -mag : 0.0);
  }
  return phi;
}

// Gradient of the discrete energy with respect to the weighted L2 pairing:
// (a + b|grad u|^{2(theta-1)})(-Delta u) - alpha Phi_q |u|^{q-2}u - Phi_p |u|^{p-2}u.
inline std::vector<double> energy_gradient(const RadialFunction& u, const ProblemParams& P, const RieszKernel& K) {
  require_same_grid(*K.grid(), *u.grid());
  const auto& g = *u.grid();
  const std::size_t M = u.size();
  const double grad2 = kinetic_form(g, u.values());
  const double stiff = P.a + P.b * std::pow(grad2, P.theta - 1);
  std::vector<double> lap(M);
  apply_laplacian(g, u.values(), lap);
  const auto fq = P.alpha != 0 ? choquard_force(K, u.values(), P.q) : std::vector<double>(M, 0.0);
  const auto fp = choquard_force(K, u.values(), P.p);
  std::vector<double> G(M);
  for (std::size_t i = 0; i < M; ++i) G[i] = -stiff * lap[i] - P.alpha * fq[i] - fp[i];
  return G;
}

struct Residual {
  RadialFunction field;
  double norm;
};

inline Residual el_residual(const RadialFunction& u, double lambda, const ProblemParams& P, const RieszKernel& K) {
  auto G = energy_gradient(u, P, K);
  for (std::size_t i = 0; i < G.size(); ++i) G[i] -= lambda * u[i];
  const double norm = std::sqrt(weighted_dot(*u.grid(), G, G));
  return {RadialFunction(u.grid(), std::move(G)), norm};
}

inline RadialFunction constrained_gradient(const RadialFunction& u, const ProblemParams& P, const RieszKernel& K) {
  const double mass2 = weighted_dot(*u.grid(), u.values(), u.values());
  BaseQuantities B;
  B.mass2 = mass2;
  require_mass(B, P.c);
  auto G = energy_gradient(u, P, K);
  const double coef = weighted_dot(*u.grid(), G, u.values()) / mass2;
  for (std::size_t i = 0; i < G.size(); ++i) G[i] -= coef * u[i];
  return RadialFunction(u.grid(), std::move(G));
}

// ---- Morse classes ------------------------------------------------------------------

enum class MorseClass { Pplus, Pminus, Pzero };

inline const char* to_string(MorseClass m) {
  switch (m) {
    case MorseClass::Pplus: return "Pplus";
    case MorseClass::Pminus: return "Pminus";
    case MorseClass::Pzero: return "Pzero";
  }
  return "?";
}

inline MorseClass classify_morse(double d2, double value, double tol = 1e-8) {
  if (std::abs(d2) <= tol * (1 + std::abs(value))) return MorseClass::Pzero;
  return d2 > 0 ? MorseClass::Pplus : MorseClass::Pminus;
}

}  // namespace kcn
