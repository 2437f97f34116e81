#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kcn/errors.hpp"
#include "kcn/exponents.hpp"
#include "kcn/radial_field.hpp"
#include "kcn/riesz.hpp"

namespace kcn {

struct ConstantEstimate {
  double value = 0;
  std::string name;    // "C_r", "S_HL", "C_HLS"
  std::string method;  // how the extremum was searched
  std::string family;  // trial functions
  int N = 3;
  double mu = 2;
  double exponent = 0;  // r for C_r, 2* for S_HL, t for HLS
  std::size_t M = 0;
  double r_max = 0;
  Spacing spacing = Spacing::Uniform;
  double stretch = 0;
  double tolerance = 0;  // achieved stopping measure
  std::uint64_t seed = 0;
};

// ---- trial profiles --------------------------------------------------------------------

// Positive mixture of one to three Gaussians, some of them ring-shaped, widths in [0.4, 2.5].
inline RadialFunction random_profile(const GridPtr& grid, std::mt19937_64& rng, double c = 1.0) {
  std::uniform_int_distribution<int> count(1, 3);
  std::uniform_real_distribution<double> amp(0.2, 1.0), width(0.4, 2.5), shift(0.0, 2.0), coin(0.0, 1.0);
  const int n = count(rng);
  std::vector<std::array<double, 3>> parts;
  for (int k = 0; k < n; ++k) {
    const double a = amp(rng), w = width(rng);
    const double r0 = coin(rng) < 0.5 ? 0.0 : shift(rng);
    parts.push_back({a, w, r0});
  }
  auto u = RadialFunction::sample(grid, [&](double r) {
    double s = 0;
    for (const auto& [a, w, r0] : parts) s += a * std::exp(-0.5 * (r - r0) * (r - r0) / (w * w));
    return s;
  });
  return normalize_mass(u, c);
}

inline RadialFunction gaussian(const GridPtr& grid, double width, double c = 1.0) {
  return normalize_mass(RadialFunction::sample(grid, [&](double r) { return std::exp(-0.5 * r * r / (width * width)); }), c);
}

// ---- Gagliardo-Nirenberg ratio -----------------------------------------------------------

// W(u) = D(u,r) / (|grad u|^{2 r delta_r} |u|_2^{2 r (1 - delta_r)}).
inline double gn_ratio(const RieszKernel& K, const RadialFunction& u, double r) {
  const int N = u.grid()->dimension();
  const double d = delta_of<double>(N, K.mu(), r);
  const double D = choquard_integral(K, u, r);
  const double G = kinetic_form(*u.grid(), u.values());
  const double m2 = weighted_dot(*u.grid(), u.values(), u.values());
  return D / (std::pow(G, r * d) * std::pow(m2, r * (1 - d)));
}

namespace detail {

struct GnEval {
  double log_ratio = 0;
  std::vector<double> grad;  // weighted-L2 gradient of log W
  double stiff = 0, shift = 0;
};

inline GnEval gn_eval(const RieszKernel& K, std::span<const double> u, double r, double delta, bool with_grad) {
  const auto& g = *K.grid();
  const std::size_t M = u.size();
  std::vector<double> f(M), phi(M);
  for (std::size_t i = 0; i < M; ++i) f[i] = std::pow(std::abs(u[i]), r);
  K.apply(f, phi);
  const double D = weighted_dot(g, f, phi);
  const double G = kinetic_form(g, u);
  const double m2 = weighted_dot(g, u, u);
  GnEval e;
  e.log_ratio = std::log(D) - r * delta * std::log(G) - r * (1 - delta) * std::log(m2);
  if (!with_grad) return e;
  std::vector<double> lap(M);
  apply_laplacian(g, u, lap);
  e.grad.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    const double mag = std::pow(std::abs(u[i]), r - 1);
    const double force = phi[i] * (u[i] > 0 ? mag : (u[i] < 0 ? -mag : 0.0));
    e.grad[i] = 2 * r * force / D + 2 * r * delta * lap[i] / G - 2 * r * (1 - delta) * u[i] / m2;
  }
  e.stiff = 2 * r * delta / G;
  e.shift = 2 * r * (1 - delta) / m2;
  return e;
}

}  // namespace detail

struct AscentOptions {
  int starts = 16;
  int max_iter = 400;
  double tol = 1e-9;  // on the preconditioned gradient pairing
  std::uint64_t seed = 20240611;
};

struct AscentResult {
  double value = 0;
  RadialFunction best;
  double tolerance = 0;
};

// Sobolev-preconditioned ascent of log W from u (mass renormalized to 1 after each step).
inline AscentResult gn_ascent(const RieszKernel& K, RadialFunction u, double r, const AscentOptions& opt) {
  const auto& g = *K.grid();
  const double delta = delta_of<double>(g.dimension(), K.mu(), r);
  u = normalize_mass(u, 1.0);
  std::vector<double> v(u.values().begin(), u.values().end());
  auto e = detail::gn_eval(K, v, r, delta, true);
  double step = 1.0, pairing = 0.0;
  for (int it = 0; it < opt.max_iter; ++it) {
    const auto d = solve_helmholtz(g, e.stiff, e.shift, e.grad);
    pairing = weighted_dot(g, e.grad, d);
    if (!(pairing > opt.tol)) break;
    step = std::min(1.0, 2 * step);
    bool accepted = false;
    std::vector<double> trial(v.size());
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      for (std::size_t i = 0; i < v.size(); ++i) trial[i] = v[i] + step * d[i];
      const double n = std::sqrt(weighted_dot(g, trial, trial));
      for (double& x : trial) x /= n;
      const auto t = detail::gn_eval(K, trial, r, delta, false);
      if (t.log_ratio >= e.log_ratio + 1e-4 * step * pairing) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    v = trial;
    e = detail::gn_eval(K, v, r, delta, true);
  }
  return {std::exp(e.log_ratio), RadialFunction(u.grid(), std::move(v)), pairing};
}

inline ConstantEstimate describe_grid(ConstantEstimate est, const RadialGrid& g) {
  est.N = g.dimension();
  est.M = g.size();
  est.r_max = g.r_max();
  est.spacing = g.spacing();
  est.stretch = g.stretch();
  return est;
}

// Largest W found: a Gaussian width scan, then ascent from the best width and from random mixtures.
inline ConstantEstimate estimate_gn_constant(const RieszKernel& K, double r, const AscentOptions& opt = {}) {
  const auto& grid = K.grid();
  const int N = grid->dimension();
  const double lo = two_mu_lower(N, K.mu()), hi = two_mu_star(N, K.mu());
  if (!(r > lo && r < hi)) throw ExponentOutOfRange("GN exponent must lie strictly inside (2_{mu,*}, 2*_mu)");
  double best_width = 1.0, best = 0.0;
  for (int k = 0; k <= 12; ++k) {
    const double w = 0.5 * std::pow(4.0, k / 12.0);
    const double val = gn_ratio(K, gaussian(grid, w), r);
    if (val > best) {
      best = val;
      best_width = w;
    }
  }
  std::mt19937_64 rng(opt.seed);
  double tol = 0.0;
  for (int s = 0; s < opt.starts; ++s) {
    const auto start = s == 0 ? gaussian(grid, best_width) : random_profile(grid, rng);
    const auto res = gn_ascent(K, start, r, opt);
    if (res.value > best) {
      best = res.value;
      tol = res.tolerance;
    }
  }
  ConstantEstimate est;
  est.value = best;
  est.name = "C_r";
  est.method = "preconditioned-ascent";
  est.family = "gaussian-width-scan+gaussian-mixtures";
  est.mu = K.mu();
  est.exponent = r;
  est.tolerance = tol;
  est.seed = opt.seed;
  return describe_grid(est, *grid);
}

// ---- HLS critical quotient ---------------------------------------------------------------

// |grad u|^2 / D(u, 2*)^{1/2*}.
inline double shl_quotient(const RieszKernel& K, const RadialFunction& u) {
  const double ts = two_mu_star(u.grid()->dimension(), K.mu());
  return kinetic_form(*u.grid(), u.values()) / std::pow(choquard_integral(K, u, ts), 1.0 / ts);
}

struct ShlOptions {
  double eps_lo = 0.05;
  double eps_hi = 0.5;
  int sweep = 16;
  double delta = -1;  // cut-off radius, r_max/4 when negative
};

// Minimum of the quotient over cut-off bubbles: log-uniform sweep in eps, then golden-section refinement.
inline ConstantEstimate estimate_shl(const RieszKernel& K, const ShlOptions& opt = {}) {
  const auto& grid = K.grid();
  auto Q = [&](double log_eps) { return shl_quotient(K, bubble(grid, std::exp(log_eps), opt.delta)); };
  const double a = std::log(opt.eps_lo), b = std::log(opt.eps_hi);
  int best_k = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> vals(opt.sweep);
  for (int k = 0; k < opt.sweep; ++k) {
    vals[k] = Q(a + (b - a) * k / (opt.sweep - 1));
    if (vals[k] < best) {
      best = vals[k];
      best_k = k;
    }
  }
  const double h = (b - a) / (opt.sweep - 1);
  double lo = a + h * std::max(0, best_k - 1), hi = a + h * std::min(opt.sweep - 1, best_k + 1);
  const double phi = 0.5 * (std::sqrt(5.0) - 1);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = Q(x1), f2 = Q(x2);
  while (hi - lo > 1e-6) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = Q(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = Q(x2);
    }
  }
  best = std::min({best, f1, f2});
  ConstantEstimate est;
  est.value = best;
  est.name = "S_HL";
  est.method = "bubble-sweep+golden-section";
  est.family = "cut-off bubbles eps in [" + format_double(opt.eps_lo) + ", " + format_double(opt.eps_hi) +
               "], delta " + format_double(opt.delta > 0 ? opt.delta : grid->r_max() / 4);
  est.mu = K.mu();
  est.exponent = two_mu_star(grid->dimension(), K.mu());
  est.tolerance = hi - lo;
  return describe_grid(est, *grid);
}

// ---- Hardy-Littlewood-Sobolev ratio --------------------------------------------------------

// D(u,t) / |u|_s^{2t} with s = 2Nt/(2N-mu).
inline double hls_ratio(const RieszKernel& K, const RadialFunction& u, double t) {
  const auto& g = *u.grid();
  const int N = g.dimension();
  const double s = 2.0 * N * t / (2.0 * N - K.mu());
  std::vector<double> f(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) f[i] = std::pow(std::abs(u[i]), s);
  const double integral = weighted_dot(g, f, std::vector<double>(u.size(), 1.0));
  return choquard_integral(K, u, t) / std::pow(integral, 2 * t / s);
}

// Largest ratio over the extremal family (1+r^2/w^2)^{-(2N-mu)/(2t)} and seeded random mixtures.
inline ConstantEstimate estimate_hls_constant(const RieszKernel& K, double t, int samples = 200,
                                              std::uint64_t seed = 7) {
  const auto& grid = K.grid();
  const int N = grid->dimension();
  double best = 0;
  for (int k = 0; k <= 16; ++k) {
    const double w = 0.25 * std::pow(8.0, k / 16.0);
    const auto u = RadialFunction::sample(grid, [&](double r) {
      return std::pow(1 + r * r / (w * w), -(2.0 * N - K.mu()) / (2 * t));
    });
    best = std::max(best, hls_ratio(K, u, t));
  }
  std::mt19937_64 rng(seed);
  for (int k = 0; k < samples; ++k) best = std::max(best, hls_ratio(K, random_profile(grid, rng), t));
  ConstantEstimate est;
  est.value = best;
  est.name = "C_HLS";
  est.method = "family-scan+random-sampling";
  est.family = "HLS extremals and gaussian mixtures";
  est.mu = K.mu();
  est.exponent = t;
  est.seed = seed;
  return describe_grid(est, *grid);
}

// ---- key=value records ---------------------------------------------------------------------

inline void write_estimate(std::ostream& os, const ConstantEstimate& e) {
  os << "name=" << e.name << '\n'
     << "value=" << format_double(e.value) << '\n'
     << "method=" << e.method << '\n'
     << "family=" << e.family << '\n'
     << "N=" << e.N << '\n'
     << "mu=" << format_double(e.mu) << '\n'
     << "exponent=" << format_double(e.exponent) << '\n'
     << "M=" << e.M << '\n'
     << "r_max=" << format_double(e.r_max) << '\n'
     << "spacing=" << to_string(e.spacing) << '\n'
     << "stretch=" << format_double(e.stretch) << '\n'
     << "tolerance=" << format_double(e.tolerance) << '\n'
     << "seed=" << e.seed << '\n';
}

inline Spacing parse_spacing(const std::string& s) {
  if (s == "uniform") return Spacing::Uniform;
  if (s == "graded") return Spacing::Graded;
  if (s == "custom") return Spacing::Custom;
  throw InvalidParams("unknown spacing '" + s + "'");
}

// Reads one record; blank lines separate records, '#' starts a comment.
inline bool read_estimate(std::istream& is, ConstantEstimate& e) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) {
      if (kv.empty()) continue;
      break;
    }
    if (line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidParams("malformed estimate line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv.empty()) return false;
  auto need = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw InvalidParams(std::string("estimate record lacks ") + key);
    return it->second;
  };
  e.name = need("name");
  e.value = parse_double(need("value"));
  e.method = need("method");
  e.family = need("family");
  e.N = std::stoi(need("N"));
  e.mu = parse_double(need("mu"));
  e.exponent = parse_double(need("exponent"));
  e.M = static_cast<std::size_t>(std::stoull(need("M")));
  e.r_max = parse_double(need("r_max"));
  e.spacing = parse_spacing(need("spacing"));
  e.stretch = parse_double(need("stretch"));
  e.tolerance = parse_double(need("tolerance"));
  e.seed = std::stoull(need("seed"));
  return true;
}

// Estimates are tied to the grid they were computed on.
inline void require_fresh(const ConstantEstimate& e, const RadialGrid& g, double mu) {
  if (e.N != g.dimension() || e.mu != mu || e.M != g.size() || e.r_max != g.r_max() || e.spacing != g.spacing() ||
      e.stretch != g.stretch())
    throw GridMismatch("stale constant estimate " + e.name + ": recorded grid differs from the configured grid");
}

}  // namespace kcn
