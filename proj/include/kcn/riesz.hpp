#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "kcn/errors.hpp"
#include "kcn/exponents.hpp"
#include "kcn/radial_field.hpp"

namespace kcn {

namespace detail {

// Boost 1.74's tanh_sinh can land exactly on a left endpoint with |a| >= 0.5 (and asserts);
// integrating over [0, b-a] avoids that branch.
template <class F>
double integrate_from_zero(boost::math::quadrature::tanh_sinh<double>& ts, F f, double a, double b, double tol,
                           double* err) {
  return ts.integrate([&](double x) { return f(a + x); }, 0.0, b - a, tol, err);
}

// Spherical mean of |x-y|^{-mu} over |y|=s for |x|=r, N=3:
// ((r+s)^nu - |r-s|^nu)/(2 r s nu) with nu = 2-mu, log form at nu = 0.
inline double spherical_mean_3d(double mu, double r, double s) {
  const double lo = std::min(r, s), hi = std::max(r, s);
  if (lo == 0.0) return std::pow(hi, -mu);
  const double nu = 2.0 - mu;
  const double gap = hi - lo;
  if (gap == 0.0) {
    if (nu > 0) return std::pow(2 * hi, nu) / (2 * nu * hi * hi);
    return std::numeric_limits<double>::infinity();
  }
  const double L = std::log1p(2 * lo / gap);
  const double core = std::abs(nu) < 1e-12 ? L : std::expm1(nu * L) / nu;
  return std::pow(gap, nu) * core / (2 * r * s);
}

// Mean over |y|=s through the distance variable t=|x-y|. Well separated radii use
// t = hi + lo*y, y in [-1,1]; comparable radii use t = e^v to tame the small-t end.
inline double spherical_mean_nd(int N, double mu, double r, double s,
                                boost::math::quadrature::tanh_sinh<double>& ts, double tol) {
  // Homogeneous of degree -mu: evaluate at (lo/hi, 1).
  const double big = std::max(r, s);
  if (std::min(r, s) <= 1e-10 * big) return std::pow(big, -mu);
  double lo = std::min(r, s) / big;
  if (lo == 1.0) lo = std::nextafter(1.0, 0.0);
  const double hi = 1.0;
  const double gap = hi - lo, sum = hi + lo;
  const double expo = 0.5 * (N - 3);
  const double scale = std::pow(big, -mu) * sphere_area(N - 1) / sphere_area(N) / lo;
  double err = 0, val = 0;
  if (lo < 0.5 * hi) {
    auto f = [&](double y) {
      const double t = 1 + lo * y;
      const double bracket = (1 - y) * (1 + y) * (2 - lo + lo * y) * (2 + lo + lo * y) / 4;
      return lo * std::pow(t, 1.0 - mu) * std::pow(std::max(bracket, 0.0), expo);
    };
    val = integrate_from_zero(ts, f, -1.0, 1.0, tol, &err);
  } else {
    auto f = [&](double v) {
      const double t = std::exp(v);
      const double bracket = (t - gap) * (t + gap) * (sum - t) * (sum + t) / (4 * lo * lo);
      return std::pow(t, 2.0 - mu) * std::pow(std::max(bracket, 0.0), expo);
    };
    val = integrate_from_zero(ts, f, std::log(gap), std::log(sum), tol, &err);
  }
  if (err > 1e-8 * std::abs(val) + 1e-300)
    throw QuadratureFailure("spherical mean did not reach the entry tolerance at r=" + std::to_string(r) +
                            ", s=" + std::to_string(s));
  return scale * val;
}

// Closed-form integral over s in [a, b] of the N=3 spherical mean times s^2.
inline double radial_shell_integral_3d(double mu, double r, double a, double b) {
  const double nu = 2.0 - mu;
  // Tiny r: the antiderivative differences cancel; kappa ~ s^{-mu} there.
  if (r < 1e-6 * b) return (std::pow(b, 3 - mu) - std::pow(a, 3 - mu)) / (3 - mu);
  if (std::abs(nu) < 1e-9) {
    auto P = [&](double s) {
      const double y = r + s;
      return 0.5 * y * y * std::log(y) - 0.25 * y * y - r * (y * std::log(y) - y);
    };
    auto Q = [&](double s) {
      const double x = s - r;
      if (x == 0.0) return 0.0;
      const double lx = std::log(std::abs(x));
      return 0.5 * x * x * lx - 0.25 * x * x + r * (x * lx - x);
    };
    return (P(b) - P(a) - (Q(b) - Q(a))) / (2 * r);
  }
  auto P = [&](double s) {
    const double y = r + s;
    return std::pow(y, nu + 2) / (nu + 2) - r * std::pow(y, nu + 1) / (nu + 1);
  };
  auto Q = [&](double s) {
    const double x = s - r;
    const double ax = std::abs(x);
    if (ax == 0.0) return 0.0;
    const double sg = x > 0 ? 1.0 : -1.0;
    return std::pow(ax, nu + 2) / (nu + 2) + r * sg * std::pow(ax, nu + 1) / (nu + 1);
  };
  return (P(b) - P(a) - (Q(b) - Q(a))) / (2 * r * nu);
}

template <int n>
void gauss_rule(double a, double b, int N, std::vector<double>& x, std::vector<double>& w) {
  using G = boost::math::quadrature::gauss<double, n>;
  const auto& abs = G::abscissa();
  const auto& wts = G::weights();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (std::size_t k = 0; k < abs.size(); ++k) {
    const double xs[2] = {mid - half * abs[k], mid + half * abs[k]};
    const int copies = (abs[k] == 0.0) ? 1 : 2;
    for (int c = 0; c < copies; ++c) {
      x.push_back(xs[c]);
      w.push_back(half * wts[k] * std::pow(xs[c], N - 1));
    }
  }
}

}  // namespace detail

// Dual cells around the nodes: [0, m_1], [m_1, m_2], ..., [m_{M-1}, r_M] with m_i midpoints.
struct CellLayout {
  std::vector<double> edges;   // M+1 entries
  std::vector<double> volume;  // N-dimensional measure of each shell
};

inline CellLayout cell_layout(const RadialGrid& g) {
  const auto r = g.nodes();
  const std::size_t M = g.size();
  CellLayout c;
  c.edges.resize(M + 1);
  c.edges[0] = 0.0;
  for (std::size_t i = 1; i < M; ++i) c.edges[i] = 0.5 * (r[i - 1] + r[i]);
  c.edges[M] = r[M - 1];
  c.volume.resize(M);
  const double omega = sphere_area(g.dimension());
  const int N = g.dimension();
  for (std::size_t i = 0; i < M; ++i)
    c.volume[i] = omega * (std::pow(c.edges[i + 1], N) - std::pow(c.edges[i], N)) / N;
  return c;
}

// Pointwise spherical mean of |x-y|^{-mu}, |x|=r, |y|=s.
inline double spherical_mean(int N, double mu, double r, double s) {
  if (N == 3) return detail::spherical_mean_3d(mu, r, s);
  static boost::math::quadrature::tanh_sinh<double> ts(12);
  return detail::spherical_mean_nd(N, mu, r, s, ts, 1e-10);
}

// Dense symmetric matrix K with (I_mu * f)(r_i) ~ sum_j K_ij f_j w_j. Entries are
// averages of the spherical mean over pairs of dual cells.
class RieszKernel {
 public:
  RieszKernel(GridPtr grid, double mu, std::shared_ptr<const std::vector<double>> matrix, double factor = 1.0,
              GridPtr base = nullptr)
      : grid_(std::move(grid)), base_(base ? std::move(base) : grid_), mu_(mu), factor_(factor),
        matrix_(std::move(matrix)) {
    if (matrix_->size() != grid_->size() * grid_->size()) throw GridMismatch("kernel matrix has the wrong size");
  }

  const GridPtr& grid() const { return grid_; }
  double mu() const { return mu_; }
  std::size_t size() const { return grid_->size(); }
  double entry(std::size_t i, std::size_t j) const { return factor_ * (*matrix_)[i * size() + j]; }
  std::span<const double> raw() const { return *matrix_; }
  double factor() const { return factor_; }

  // out_i = sum_j K_ij f_j w_j.
  void apply(std::span<const double> f, std::span<double> out) const {
    const std::size_t M = size();
    const auto w = grid_->weights();
    Eigen::VectorXd fw(static_cast<Eigen::Index>(M));
    for (std::size_t j = 0; j < M; ++j) fw[static_cast<Eigen::Index>(j)] = f[j] * w[j];
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> K(matrix_->data(), static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    Eigen::Map<Eigen::VectorXd> o(out.data(), static_cast<Eigen::Index>(M));
    o.noalias() = K * fw;
    o *= factor_;
  }

  // Kernel for a uniformly rescaled copy of the base grid: entries scale by rho^{-mu}.
  RieszKernel on_grid(GridPtr g) const {
    if (same_grid(*g, *grid_)) return RieszKernel(g, mu_, matrix_, factor_, base_);
    if (g->dimension() != base_->dimension() || g->size() != base_->size())
      throw GridMismatch("grid is not a rescaling of the kernel grid");
    const double rho = g->r_max() / base_->r_max();
    const auto a = base_->nodes(), b = g->nodes();
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(b[i] - rho * a[i]) > 1e-12 * rho * a[i])
        throw GridMismatch("grid is not a rescaling of the kernel grid");
    return RieszKernel(std::move(g), mu_, matrix_, std::pow(rho, -mu_), base_);
  }

 private:
  GridPtr grid_;
  GridPtr base_;
  double mu_;
  double factor_;
  std::shared_ptr<const std::vector<double>> matrix_;
};

inline RieszKernel build_kernel(GridPtr grid, double mu) {
  const int N = grid->dimension();
  if (!(mu > 0 && mu < N)) throw InvalidParams("Riesz order must lie in (0, N)");
  const std::size_t M = grid->size();
  const CellLayout cells = cell_layout(*grid);
  const double omega = sphere_area(N);
  boost::math::quadrature::tanh_sinh<double> ts(15);

  // Per-cell Gauss rules (with the r^{N-1} factor folded into the weights).
  struct Rule { std::vector<double> x, w; };
  std::vector<Rule> r4(M), r6(M), r10(M);
  for (std::size_t i = 0; i < M; ++i) {
    detail::gauss_rule<4>(cells.edges[i], cells.edges[i + 1], N, r4[i].x, r4[i].w);
    detail::gauss_rule<6>(cells.edges[i], cells.edges[i + 1], N, r6[i].x, r6[i].w);
    detail::gauss_rule<10>(cells.edges[i], cells.edges[i + 1], N, r10[i].x, r10[i].w);
  }
  auto kappa = [&](double r, double s) {
    if (N == 3) return detail::spherical_mean_3d(mu, r, s);
    return detail::spherical_mean_nd(N, mu, r, s, ts, 1e-9);
  };
  auto tensor = [&](const Rule& A, const Rule& B) {
    double sum = 0.0;
    for (std::size_t a = 0; a < A.x.size(); ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < B.x.size(); ++b) row += B.w[b] * kappa(A.x[a], B.x[b]);
      sum += A.w[a] * row;
    }
    return sum;
  };
  auto checked = [](double val, double err) {
    if (!(err <= 1e-8 * std::abs(val))) throw QuadratureFailure("near-diagonal cell integral did not converge");
    return val;
  };
  // Integral over cell_i x cell_j of kappa(r,s) r^{N-1} s^{N-1} for touching cells.
  auto near = [&](std::size_t i, std::size_t j) {
    const double ai = cells.edges[i], bi = cells.edges[i + 1];
    const double aj = cells.edges[j], bj = cells.edges[j + 1];
    double err = 0;
    if (N == 3) {
      auto outer = [&](double r) { return r * r * detail::radial_shell_integral_3d(mu, r, aj, bj); };
      return checked(detail::integrate_from_zero(ts, outer, ai, bi, 1e-12, &err), err);
    }
    // Integrate in the distance x from r so the integrand sees |r - s| at full precision.
    auto inner_piece = [&](double r, double len, double dir) {
      if (!(len > 0)) return 0.0;
      double e = 0;
      auto f = [&](double x) {
        const double s = r + dir * x;
        return s > 0 ? kappa(r, s) * std::pow(s, N - 1) : 0.0;
      };
      return checked(ts.integrate(f, 0.0, len, 1e-9, &e), e);
    };
    auto outer = [&](double r) {
      if (r < 1e-12 * bi) return 0.0;
      double inner;
      if (i == j) inner = inner_piece(r, r - aj, -1.0) + inner_piece(r, bj - r, 1.0);
      else if (j > i) inner = inner_piece(r, bj - r, 1.0) - inner_piece(r, aj - r, 1.0);
      else inner = inner_piece(r, r - aj, -1.0) - inner_piece(r, r - bj, -1.0);
      return std::pow(r, N - 1) * inner;
    };
    return checked(detail::integrate_from_zero(ts, outer, ai, bi, 1e-9, &err), err);
  };

  auto matrix = std::make_shared<std::vector<double>>(M * M);
  auto& K = *matrix;
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = i; j < M; ++j) {
      const std::size_t d = j - i;
      double G;
      if (d <= 1) G = near(i, j);
      else if (d <= 3) G = tensor(r10[i], r10[j]);
      else if (d <= 7) G = tensor(r6[i], r6[j]);
      else G = tensor(r4[i], r4[j]);
      const double entry = omega * omega * G / (cells.volume[i] * cells.volume[j]);
      if (!(entry > 0) || !std::isfinite(entry)) throw QuadratureFailure("kernel entry is not finite and positive");
      K[i * M + j] = entry;
      K[j * M + i] = entry;
    }
  }
  return RieszKernel(std::move(grid), mu, std::move(matrix));
}

// --- disk cache ------------------------------------------------------------------

namespace detail {

constexpr char kCacheMagic[8] = {'K', 'C', 'N', 'R', 'I', 'E', 'S', 'Z'};
constexpr std::uint32_t kCacheVersion = 1;

inline std::uint64_t node_hash(const RadialGrid& g) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double x : g.nodes()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof x);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

struct CacheHeader {
  char magic[8];
  std::uint32_t version;
  std::int32_t N;
  double mu;
  std::uint64_t M;
  double r_max;
  std::uint32_t spacing;
  double stretch;
  std::uint64_t nodes;
};

inline CacheHeader cache_header(const RadialGrid& g, double mu) {
  CacheHeader h{};
  std::memcpy(h.magic, kCacheMagic, sizeof h.magic);
  h.version = kCacheVersion;
  h.N = g.dimension();
  h.mu = mu;
  h.M = g.size();
  h.r_max = g.r_max();
  h.spacing = static_cast<std::uint32_t>(g.spacing());
  h.stretch = g.stretch();
  h.nodes = node_hash(g);
  return h;
}

template <class T>
void put(std::ostream& os, const T& v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
template <class T>
void get(std::istream& is, T& v) { is.read(reinterpret_cast<char*>(&v), sizeof v); }

}  // namespace detail

inline void save_kernel(const RieszKernel& K, const std::filesystem::path& path) {
  const auto h = detail::cache_header(*K.grid(), K.mu());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot write kernel cache " + tmp);
    os.write(h.magic, sizeof h.magic);
    detail::put(os, h.version);
    detail::put(os, h.N);
    detail::put(os, h.mu);
    detail::put(os, h.M);
    detail::put(os, h.r_max);
    detail::put(os, h.spacing);
    detail::put(os, h.stretch);
    detail::put(os, h.nodes);
    const auto raw = K.raw();
    std::vector<double> scaled(raw.begin(), raw.end());
    for (double& x : scaled) x *= K.factor();
    os.write(reinterpret_cast<const char*>(scaled.data()), static_cast<std::streamsize>(scaled.size() * sizeof(double)));
    if (!os) throw Error("failed writing kernel cache " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline RieszKernel load_kernel(GridPtr grid, double mu, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open kernel cache " + path.string());
  const auto want = detail::cache_header(*grid, mu);
  detail::CacheHeader got{};
  is.read(got.magic, sizeof got.magic);
  detail::get(is, got.version);
  detail::get(is, got.N);
  detail::get(is, got.mu);
  detail::get(is, got.M);
  detail::get(is, got.r_max);
  detail::get(is, got.spacing);
  detail::get(is, got.stretch);
  detail::get(is, got.nodes);
  if (!is || std::memcmp(got.magic, want.magic, sizeof want.magic) != 0 || got.version != want.version ||
      got.N != want.N || got.mu != want.mu || got.M != want.M || got.r_max != want.r_max ||
      got.spacing != want.spacing || got.stretch != want.stretch || got.nodes != want.nodes)
    throw CacheMismatch("kernel cache header does not match the requested grid: " + path.string());
  auto matrix = std::make_shared<std::vector<double>>(want.M * want.M);
  is.read(reinterpret_cast<char*>(matrix->data()), static_cast<std::streamsize>(matrix->size() * sizeof(double)));
  if (!is) throw CacheMismatch("kernel cache is truncated: " + path.string());
  return RieszKernel(std::move(grid), mu, std::move(matrix));
}

inline std::string kernel_cache_name(const RadialGrid& g, double mu) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "riesz_N%d_mu%.17g_M%zu_r%.17g_%s_%016llx.bin", g.dimension(), mu, g.size(),
                g.r_max(), to_string(g.spacing()), static_cast<unsigned long long>(detail::node_hash(g)));
  return buf;
}

// Builds the kernel, reusing a cached copy from dir (or $KCN_CACHE_DIR when dir is empty).
inline RieszKernel cached_kernel(GridPtr grid, double mu, std::filesystem::path dir = {}) {
  if (dir.empty()) {
    if (const char* env = std::getenv("KCN_CACHE_DIR"); env && *env) dir = env;
  }
  if (dir.empty()) return build_kernel(std::move(grid), mu);
  std::filesystem::create_directories(dir);
  const auto path = dir / kernel_cache_name(*grid, mu);
  if (std::filesystem::exists(path)) return load_kernel(std::move(grid), mu, path);
  auto K = build_kernel(std::move(grid), mu);
  save_kernel(K, path);
  return K;
}

// --- operations on fields ----------------------------------------------------------

inline RadialFunction riesz_apply(const RieszKernel& K, const RadialFunction& f) {
  require_same_grid(*K.grid(), *f.grid());
  std::vector<double> out(f.size());
  K.apply(f.values(), out);
  return RadialFunction(f.grid(), std::move(out));
}

inline void check_choquard_exponent(int N, double mu, double t) {
  const double lo = two_mu_lower(N, mu), hi = two_mu_star(N, mu);
  const double slack = 1e-12 * hi;
  if (!(t >= lo - slack && t <= hi + slack)) throw ExponentOutOfRange("Choquard exponent outside [2_{mu,*}, 2*_mu]");
}

// D(u,t) = sum_i w_i |u_i|^t (K|u|^t)_i.
inline double choquard_integral(const RieszKernel& K, const RadialFunction& u, double t) {
  require_same_grid(*K.grid(), *u.grid());
  check_choquard_exponent(u.grid()->dimension(), K.mu(), t);
  const std::size_t M = u.size();
  std::vector<double> f(M), phi(M);
  for (std::size_t i = 0; i < M; ++i) f[i] = std::pow(std::abs(u[i]), t);
  K.apply(f, phi);
  return weighted_dot(*u.grid(), f, phi);
}

struct MonteCarloEstimate {
  double estimate = 0;
  double std_error = 0;
};

// Direct sampling of |x-y|^{-mu} with radii drawn from w_i |u_i|^t and uniform within each cell.
inline MonteCarloEstimate choquard_oracle_mc(const RadialFunction& u, double mu, double t, std::size_t samples,
                                             std::uint64_t seed = 1) {
  if (samples < 10000) throw InvalidParams("Monte-Carlo oracle needs at least 1e4 samples");
  const auto& g = *u.grid();
  const int N = g.dimension();
  const std::size_t M = g.size();
  std::vector<double> mass(M);
  double total = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    mass[i] = g.weights()[i] * std::pow(std::abs(u[i]), t);
    total += mass[i];
  }
  if (total == 0.0) return {};
  const CellLayout cells = cell_layout(g);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(N), y(N);
  auto draw = [&](std::vector<double>& p) {
    const std::size_t i = pick(rng);
    const double a = std::pow(cells.edges[i], N), b = std::pow(cells.edges[i + 1], N);
    const double r = std::pow(a + unit(rng) * (b - a), 1.0 / N);
    double n2 = 0;
    for (double& c : p) {
      c = gauss(rng);
      n2 += c * c;
    }
    const double k = r / std::sqrt(n2);
    for (double& c : p) c *= k;
  };
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    draw(x);
    draw(y);
    double d2 = 0;
    for (int c = 0; c < N; ++c) d2 += (x[c] - y[c]) * (x[c] - y[c]);
    const double z = std::pow(d2, -0.5 * mu);
    const double delta = z - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (z - mean);
  }
  const double var = m2 / static_cast<double>(samples - 1);
  return {total * total * mean, total * total * std::sqrt(var / static_cast<double>(samples))};
}

}  // namespace kcn
