#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

// pchip in Boost 1.74 uses isnan unqualified; fpclassify must come first.
#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>

#include "kcn/errors.hpp"

namespace kcn {

enum class Spacing { Uniform, Graded, Custom };

inline const char* to_string(Spacing s) {
  switch (s) {
    case Spacing::Uniform: return "uniform";
    case Spacing::Graded: return "graded";
    case Spacing::Custom: return "custom";
  }
  return "?";
}

// Surface area of the unit sphere in R^N.
inline double sphere_area(int N) { return 2.0 * std::pow(std::numbers::pi, 0.5 * N) / std::tgamma(0.5 * N); }

class RadialGrid;
using GridPtr = std::shared_ptr<const RadialGrid>;

// Nodes r_1 < ... < r_M in (0, r_max]. Weights integrate f(|x|) over the ball;
// face coefficients define the kinetic form sum_f A_f (u_{f+1} - u_f)^2 with u_{M+1} = 0.
class RadialGrid {
 public:
  static GridPtr uniform(int N, std::size_t M, double r_max) {
    check_size(M);
    std::vector<double> r(M);
    for (std::size_t i = 0; i < M; ++i) r[i] = static_cast<double>(i + 1) * r_max / static_cast<double>(M);
    r.back() = r_max;
    return from_nodes(N, std::move(r), Spacing::Uniform, 0.0);
  }

  // r(xi) = r_max sinh(stretch xi)/sinh(stretch), xi uniform in (0,1]: fine near the origin.
  static GridPtr graded(int N, std::size_t M, double r_max, double stretch) {
    check_size(M);
    if (!(stretch > 0)) throw InvalidParams("graded grid needs a positive stretch");
    std::vector<double> r(M);
    const double denom = std::sinh(stretch);
    for (std::size_t i = 0; i < M; ++i)
      r[i] = r_max * std::sinh(stretch * static_cast<double>(i + 1) / static_cast<double>(M)) / denom;
    r.back() = r_max;
    return from_nodes(N, std::move(r), Spacing::Graded, stretch);
  }

  static GridPtr from_nodes(int N, std::vector<double> nodes, Spacing tag = Spacing::Custom,
                            double stretch = 0.0, double scale = 1.0) {
    return GridPtr(new RadialGrid(N, std::move(nodes), tag, stretch, scale));
  }

  // Same grid with every node multiplied by factor.
  GridPtr scaled(double factor) const {
    if (!(factor > 0) || !std::isfinite(factor)) throw InvalidParams("grid scale factor must be positive");
    std::vector<double> r(nodes_);
    for (double& x : r) x *= factor;
    return from_nodes(N_, std::move(r), tag_, stretch_, scale_ * factor);
  }

  int dimension() const { return N_; }
  std::size_t size() const { return nodes_.size(); }
  double r_max() const { return nodes_.back(); }
  Spacing spacing() const { return tag_; }
  double stretch() const { return stretch_; }
  // Product of all scaled() factors since the grid was generated.
  double scale() const { return scale_; }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> faces() const { return faces_; }
  double ball_volume() const { return sphere_area(N_) * std::pow(r_max(), N_) / N_; }

 private:
  RadialGrid(int N, std::vector<double> nodes, Spacing tag, double stretch, double scale)
      : N_(N), tag_(tag), stretch_(stretch), scale_(scale), nodes_(std::move(nodes)) {
    if (N_ < 1) throw InvalidParams("grid dimension must be positive");
    check_size(nodes_.size());
    if (!(nodes_.front() > 0)) throw InvalidParams("grid nodes must be positive");
    for (std::size_t i = 1; i < nodes_.size(); ++i)
      if (!(nodes_[i] > nodes_[i - 1])) throw InvalidParams("grid nodes must increase strictly");
    build_weights();
    build_faces();
  }

  static void check_size(std::size_t M) {
    if (M < 16) throw InvalidParams("a radial grid needs at least 16 nodes");
  }

  void build_weights() {
    const std::size_t M = nodes_.size();
    // Extended node list x_{-1}..x_{M+2}: odd reflection at the origin, cubic extrapolation at r_max.
    std::vector<double> x(M + 4);
    x[0] = -nodes_[0];
    x[1] = 0.0;
    for (std::size_t i = 0; i < M; ++i) x[i + 2] = nodes_[i];
    x[M + 2] = 4 * x[M + 1] - 6 * x[M] + 4 * x[M - 1] - x[M - 2];
    x[M + 3] = 4 * x[M + 2] - 6 * x[M + 1] + 4 * x[M] - x[M - 1];
    const double omega = sphere_area(N_);
    static constexpr double end_factor[4] = {17.0 / 48, 59.0 / 48, 43.0 / 48, 49.0 / 48};
    weights_.resize(M);
    for (std::size_t i = 0; i < M; ++i) {
      const std::size_t k = i + 2;
      const double dr = (-x[k + 2] + 8 * x[k + 1] - 8 * x[k - 1] + x[k - 2]) / 12.0;
      const std::size_t from_end = M - 1 - i;
      const double g = from_end < 4 ? end_factor[from_end] : 1.0;
      weights_[i] = omega * std::pow(nodes_[i], N_ - 1) * dr * g;
    }
  }

  void build_faces() {
    const std::size_t M = nodes_.size();
    const double omega = sphere_area(N_);
    faces_.resize(M - 1);
    for (std::size_t i = 0; i + 1 < M; ++i) {
      const double mid = 0.5 * (nodes_[i] + nodes_[i + 1]);
      faces_[i] = omega * std::pow(mid, N_ - 1) / (nodes_[i + 1] - nodes_[i]);
    }
    // Face between the origin and r_1: u(0) comes from an even quadratic through r_1, r_2,
    // so u_1 - u(0) = r_1^2/(r_2^2 - r_1^2) (u_2 - u_1).
    const double r1 = nodes_[0], r2 = nodes_[1];
    const double ratio = r1 * r1 / (r2 * r2 - r1 * r1);
    faces_[0] += omega * std::pow(0.5 * r1, N_ - 1) / r1 * ratio * ratio;
    // Last entry: face to a zero ghost one spacing beyond r_max.
    const double h = nodes_[M - 1] - nodes_[M - 2];
    faces_.push_back(omega * std::pow(nodes_[M - 1] + 0.5 * h, N_ - 1) / h);
  }

  int N_;
  Spacing tag_;
  double stretch_;
  double scale_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> faces_;
};

inline bool same_grid(const RadialGrid& a, const RadialGrid& b) {
  if (&a == &b) return true;
  if (a.dimension() != b.dimension() || a.size() != b.size()) return false;
  return std::equal(a.nodes().begin(), a.nodes().end(), b.nodes().begin());
}

class RadialFunction {
 public:
  explicit RadialFunction(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}
  RadialFunction(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size()) throw GridMismatch("value count differs from grid size");
    for (double v : values_)
      if (!std::isfinite(v)) throw InvalidParams("radial function values must be finite");
  }

  template <class F>
  static RadialFunction sample(GridPtr grid, F&& f) {
    std::vector<double> v(grid->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid->nodes()[i]);
    return RadialFunction(std::move(grid), std::move(v));
  }

  const GridPtr& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

inline void require_same_grid(const RadialGrid& a, const RadialGrid& b) {
  if (!same_grid(a, b)) throw GridMismatch("operands live on different grids");
}

// --- raw-span kernels shared with the solvers -------------------------------

inline double weighted_dot(const RadialGrid& g, std::span<const double> u, std::span<const double> v) {
  const auto w = g.weights();
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * u[i] * v[i];
  return s;
}

inline double kinetic_form(const RadialGrid& g, std::span<const double> u) {
  const auto A = g.faces();
  double s = 0.0;
  const std::size_t M = u.size();
  for (std::size_t i = 0; i + 1 < M; ++i) {
    const double d = u[i + 1] - u[i];
    s += A[i] * d * d;
  }
  return s + A[M - 1] * u[M - 1] * u[M - 1];
}

// out = L u with kinetic_form(u) = <u, L u> (plain Euclidean pairing).
inline void apply_stiffness(const RadialGrid& g, std::span<const double> u, std::span<double> out) {
  const auto A = g.faces();
  const std::size_t M = u.size();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i + 1 < M; ++i) {
    const double flux = A[i] * (u[i + 1] - u[i]);
    out[i] -= flux;
    out[i + 1] += flux;
  }
  out[M - 1] += A[M - 1] * u[M - 1];
}

// Discrete radial Laplacian: -L u / w, the weighted-gradient of -kinetic_form/2.
inline void apply_laplacian(const RadialGrid& g, std::span<const double> u, std::span<double> out) {
  apply_stiffness(g, u, out);
  const auto w = g.weights();
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = -out[i] / w[i];
}

// Solves (shift W + stiff L) x = W rhs, a discrete Helmholtz problem (tridiagonal, SPD).
inline std::vector<double> solve_helmholtz(const RadialGrid& g, double stiff, double shift,
                                           std::span<const double> rhs) {
  const std::size_t M = rhs.size();
  const auto A = g.faces();
  const auto w = g.weights();
  std::vector<double> diag(M), upper(M, 0.0), x(M);
  for (std::size_t i = 0; i < M; ++i) {
    double d = shift * w[i];
    if (i > 0) d += stiff * A[i - 1];
    if (i + 1 < M) {
      d += stiff * A[i];
      upper[i] = -stiff * A[i];
    }
    diag[i] = d;
    x[i] = w[i] * rhs[i];
  }
  diag[M - 1] += stiff * A[M - 1];
  for (std::size_t i = 1; i < M; ++i) {
    const double m = upper[i - 1] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    x[i] -= m * x[i - 1];
  }
  x[M - 1] /= diag[M - 1];
  for (std::size_t i = M - 1; i-- > 0;) x[i] = (x[i] - upper[i] * x[i + 1]) / diag[i];
  return x;
}

// --- public operations --------------------------------------------------------

inline double inner(const RadialFunction& u, const RadialFunction& v) {
  require_same_grid(*u.grid(), *v.grid());
  return weighted_dot(*u.grid(), u.values(), v.values());
}

inline double l2_norm(const RadialFunction& u) { return std::sqrt(weighted_dot(*u.grid(), u.values(), u.values())); }

inline double grad_norm(const RadialFunction& u) { return std::sqrt(kinetic_form(*u.grid(), u.values())); }

inline RadialFunction laplacian(const RadialFunction& u) {
  std::vector<double> out(u.size());
  apply_laplacian(*u.grid(), u.values(), out);
  return RadialFunction(u.grid(), std::move(out));
}

inline RadialFunction scaled(const RadialFunction& u, double factor) {
  std::vector<double> v(u.values().begin(), u.values().end());
  for (double& x : v) x *= factor;
  return RadialFunction(u.grid(), std::move(v));
}

inline RadialFunction normalize_mass(const RadialFunction& u, double c) {
  const double n = l2_norm(u);
  if (!(n > 0)) throw ZeroFunction("cannot normalize a function with zero mass");
  return scaled(u, c / n);
}

namespace detail {

// Monotone cubic through the samples, mirrored through the origin so it is even there.
inline boost::math::interpolators::pchip<std::vector<double>> even_pchip(const RadialFunction& u) {
  const auto r = u.grid()->nodes();
  const auto v = u.values();
  std::vector<double> x, y;
  x.reserve(r.size() + 3);
  y.reserve(r.size() + 3);
  for (int k = 2; k >= 0; --k) {
    x.push_back(-r[k]);
    y.push_back(v[k]);
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    x.push_back(r[i]);
    y.push_back(v[i]);
  }
  return boost::math::interpolators::pchip<std::vector<double>>(std::move(x), std::move(y));
}

}  // namespace detail

// Mass-preserving dilation e^{Ns/2} u(e^s r), resampled on the same grid.
inline RadialFunction dilate(const RadialFunction& u, double s, double s_max = 3.0) {
  if (!(std::abs(s) <= s_max)) throw DilationOutOfRange("dilation parameter outside [-s_max, s_max]");
  if (s == 0.0) return u;
  const auto& g = *u.grid();
  const auto r = g.nodes();
  const double r_end = g.r_max();
  const auto spline = detail::even_pchip(u);
  const double amp = std::exp(0.5 * g.dimension() * s);
  const double stretch = std::exp(s);
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double at = stretch * r[i];
    out[i] = at > r_end ? 0.0 : amp * spline(at);
  }
  return RadialFunction(u.grid(), std::move(out));
}

// u interpolated onto another grid of the same dimension, zero beyond its own r_max.
inline RadialFunction resample(const RadialFunction& u, GridPtr target) {
  if (target->dimension() != u.grid()->dimension()) throw GridMismatch("resampling across dimensions");
  const double r_end = u.grid()->r_max();
  const auto spline = detail::even_pchip(u);
  std::vector<double> out(target->size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double at = target->nodes()[i];
    out[i] = at > r_end ? 0.0 : spline(at);
  }
  return RadialFunction(std::move(target), std::move(out));
}

// Exact dilation: the same samples scaled by e^{Ns/2} on the grid shrunk by e^{-s}.
inline RadialFunction dilate_exact(const RadialFunction& u, double s) {
  auto grid = u.grid()->scaled(std::exp(-s));
  std::vector<double> v(u.values().begin(), u.values().end());
  const double amp = std::exp(0.5 * u.grid()->dimension() * s);
  for (double& x : v) x *= amp;
  return RadialFunction(std::move(grid), std::move(v));
}

// Smooth cut-off: 1 on [0, delta], 0 beyond 2 delta.
inline double cutoff(double r, double delta) {
  if (r <= delta) return 1.0;
  if (r >= 2 * delta) return 0.0;
  auto f = [](double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; };
  const double x = (2 * delta - r) / delta;
  return f(x) / (f(x) + f(1 - x));
}

// eta(r) (eps/(eps^2+r^2))^{(N-2)/2}; delta <= 0 selects r_max/4.
inline RadialFunction bubble(GridPtr grid, double eps, double delta = -1.0) {
  if (!(eps > 0)) throw InvalidParams("bubble width must be positive");
  if (delta <= 0) delta = grid->r_max() / 4;
  const double power = 0.5 * (grid->dimension() - 2);
  return RadialFunction::sample(std::move(grid), [&](double r) {
    return cutoff(r, delta) * std::pow(eps / (eps * eps + r * r), power);
  });
}

// --- text serialization -------------------------------------------------------

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_radial_function(std::ostream& os, const RadialFunction& u, double mu) {
  const auto& g = *u.grid();
  os << g.dimension() << ' ' << format_double(mu) << ' ' << g.size() << ' ' << format_double(g.r_max()) << '\n';
  for (std::size_t i = 0; i < g.size(); ++i)
    os << format_double(g.nodes()[i]) << ' ' << format_double(u[i]) << '\n';
}

inline double parse_double(const std::string& text) {
  double x = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (end != text.data() + text.size() || (ec != std::errc() && ec != std::errc::result_out_of_range))
    throw InvalidParams("not a number: " + text);
  return x;
}

struct StoredField {
  double mu;
  RadialFunction field;
};

inline StoredField read_radial_function(std::istream& is) {
  std::string line;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line))
      if (!line.empty() && line[0] != '#') return true;
    return false;
  };
  if (!next_line()) throw InvalidParams("radial function file is empty");
  std::istringstream head(line);
  int N = 0;
  double mu = 0, r_max = 0;
  std::size_t M = 0;
  if (!(head >> N >> mu >> M >> r_max)) throw InvalidParams("malformed radial function header");
  std::vector<double> r(M), v(M);
  for (std::size_t i = 0; i < M; ++i) {
    if (!next_line()) throw InvalidParams("radial function file ends early");
    std::istringstream row(line);
    std::string a, b;
    if (!(row >> a >> b)) throw InvalidParams("malformed radial function row");
    r[i] = parse_double(a);
    v[i] = parse_double(b);
  }
  if (M == 0 || r.back() != r_max) throw InvalidParams("header r_max disagrees with the last node");
  bool uniform = true;
  for (std::size_t i = 0; i < M && uniform; ++i)
    uniform = r[i] == (i + 1 == M ? r_max : static_cast<double>(i + 1) * r_max / static_cast<double>(M));
  auto grid = RadialGrid::from_nodes(N, std::move(r), uniform ? Spacing::Uniform : Spacing::Custom);
  return {mu, RadialFunction(std::move(grid), std::move(v))};
}

}  // namespace kcn
