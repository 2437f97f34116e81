#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kcn/constants_estimation.hpp"
#include "kcn/errors.hpp"
#include "kcn/exponents.hpp"
#include "kcn/radial_field.hpp"
#include "kcn/solvers.hpp"

namespace kcn {

struct GridSpec {
  std::size_t M = 1024;
  double r_max = 16.0;
  Spacing spacing = Spacing::Uniform;
  double stretch = 6.0;  // graded grids only
};

struct RunConfig {
  ProblemParams params;
  std::optional<double> alpha_fraction;  // alpha := fraction * min(alpha1, alpha2[, alpha3])
  GridSpec grid;
  GridSpec shl_grid{2048, 256.0, Spacing::Graded, 6.0};
  double shl_delta = 64.0;  // bubble cut-off radius
  SolverOptions solver;
  std::vector<double> ladder{0.5, 0.25, 0.1, 0.05, 0.0};  // fractions of the admissible alpha
  std::optional<double> c_p, c_q, s_hl;
  int gn_starts = 16;
  std::string out = "out";
  std::uint64_t seed = 20240611;
};

inline GridPtr make_grid(int N, const GridSpec& s) {
  switch (s.spacing) {
    case Spacing::Uniform: return RadialGrid::uniform(N, s.M, s.r_max);
    case Spacing::Graded: return RadialGrid::graded(N, s.M, s.r_max, s.stretch);
    case Spacing::Custom: break;
  }
  throw InvalidParams("config grids must be uniform or graded");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double config_double(const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw InvalidParams("not a number: '" + v + "'");
  }
  if (used != v.size()) throw InvalidParams("trailing characters in number '" + v + "'");
  return x;
}

inline std::uint64_t config_unsigned(const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw InvalidParams("not a non-negative integer: '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw InvalidParams("integer out of range: '" + v + "'");
  }
}

inline std::string optional_text(const std::optional<double>& x, const char* unset) {
  return x ? format_double(*x) : std::string(unset);
}

inline std::optional<double> optional_value(const std::string& v, const char* unset) {
  if (v == unset) return std::nullopt;
  return config_double(v);
}

inline std::string spacing_text(Spacing s) { return to_string(s); }

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
Field number(const char* key, T RunConfig::*group, double T::*member) {
  return {key, [=](const RunConfig& c) { return format_double(c.*group.*member); },
          [=](RunConfig& c, const std::string& v) { c.*group.*member = config_double(v); }};
}

inline Field grid_size(std::string key, GridSpec RunConfig::*g) {
  return {key, [=](const RunConfig& c) { return std::to_string((c.*g).M); },
          [=](RunConfig& c, const std::string& v) { (c.*g).M = static_cast<std::size_t>(config_unsigned(v)); }};
}

// Every key, in serialization order.
inline const std::vector<Field>& config_fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back({"N", [](const RunConfig& c) { return std::to_string(c.params.N); },
                 [](RunConfig& c, const std::string& v) { c.params.N = static_cast<int>(config_unsigned(v)); }});
    f.push_back(number("mu", &RunConfig::params, &ProblemParams::mu));
    f.push_back(number("a", &RunConfig::params, &ProblemParams::a));
    f.push_back(number("b", &RunConfig::params, &ProblemParams::b));
    f.push_back(number("theta", &RunConfig::params, &ProblemParams::theta));
    f.push_back(number("c", &RunConfig::params, &ProblemParams::c));
    f.push_back(number("q", &RunConfig::params, &ProblemParams::q));
    f.push_back(number("p", &RunConfig::params, &ProblemParams::p));
    f.push_back(number("alpha", &RunConfig::params, &ProblemParams::alpha));
    f.push_back({"alpha_fraction", [](const RunConfig& c) { return optional_text(c.alpha_fraction, "none"); },
                 [](RunConfig& c, const std::string& v) { c.alpha_fraction = optional_value(v, "none"); }});
    for (auto [prefix, g] : {std::pair{"grid", &RunConfig::grid}, std::pair{"shl", &RunConfig::shl_grid}}) {
      auto key = [p = std::string(prefix)](const char* s) { return p + "." + s; };
      f.push_back(grid_size(key("M"), g));
      f.push_back({key("r_max"), [g](const RunConfig& c) { return format_double((c.*g).r_max); },
                   [g](RunConfig& c, const std::string& v) { (c.*g).r_max = config_double(v); }});
      f.push_back({key("spacing"), [g](const RunConfig& c) { return spacing_text((c.*g).spacing); },
                   [g](RunConfig& c, const std::string& v) { (c.*g).spacing = parse_spacing(v); }});
      f.push_back({key("stretch"), [g](const RunConfig& c) { return format_double((c.*g).stretch); },
                   [g](RunConfig& c, const std::string& v) { (c.*g).stretch = config_double(v); }});
    }
    f.push_back({"shl.delta", [](const RunConfig& c) { return format_double(c.shl_delta); },
                 [](RunConfig& c, const std::string& v) { c.shl_delta = config_double(v); }});
    f.push_back(number("solver.grad_tol", &RunConfig::solver, &SolverOptions::grad_tol));
    f.push_back(number("solver.el_tol", &RunConfig::solver, &SolverOptions::el_tol));
    f.push_back(number("solver.armijo", &RunConfig::solver, &SolverOptions::armijo));
    f.push_back(number("solver.guard_margin", &RunConfig::solver, &SolverOptions::guard_margin));
    f.push_back({"solver.max_iter", [](const RunConfig& c) { return std::to_string(c.solver.max_iter); },
                 [](RunConfig& c, const std::string& v) { c.solver.max_iter = static_cast<int>(config_unsigned(v)); }});
    f.push_back({"solver.memory", [](const RunConfig& c) { return std::to_string(c.solver.memory); },
                 [](RunConfig& c, const std::string& v) { c.solver.memory = static_cast<int>(config_unsigned(v)); }});
    f.push_back({"ladder",
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.ladder.size(); ++i) s += (i ? "," : "") + format_double(c.ladder[i]);
                   return s;
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.ladder.clear();
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ',')) c.ladder.push_back(config_double(trim(item)));
                   if (c.ladder.empty()) throw InvalidParams("empty ladder");
                 }});
    f.push_back({"C_p", [](const RunConfig& c) { return optional_text(c.c_p, "auto"); },
                 [](RunConfig& c, const std::string& v) { c.c_p = optional_value(v, "auto"); }});
    f.push_back({"C_q", [](const RunConfig& c) { return optional_text(c.c_q, "auto"); },
                 [](RunConfig& c, const std::string& v) { c.c_q = optional_value(v, "auto"); }});
    f.push_back({"S_HL", [](const RunConfig& c) { return optional_text(c.s_hl, "auto"); },
                 [](RunConfig& c, const std::string& v) { c.s_hl = optional_value(v, "auto"); }});
    f.push_back({"gn.starts", [](const RunConfig& c) { return std::to_string(c.gn_starts); },
                 [](RunConfig& c, const std::string& v) { c.gn_starts = static_cast<int>(config_unsigned(v)); }});
    f.push_back({"out", [](const RunConfig& c) { return c.out; },
                 [](RunConfig& c, const std::string& v) { c.out = v; }});
    f.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) { c.seed = config_unsigned(v); }});
    return f;
  }();
  return fields;
}

}  // namespace detail

// Flat key = value lines; '#' starts a comment. Unknown or repeated keys are errors.
inline RunConfig parse_config(std::istream& is) {
  RunConfig cfg;
  std::map<std::string, const detail::Field*> by_key;
  for (const auto& f : detail::config_fields()) by_key[f.key] = &f;
  std::set<std::string> seen;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line);
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError("unknown key '" + key + "'", line);
    if (!seen.insert(key).second) throw ConfigError("key '" + key + "' given twice", line);
    try {
      it->second->set(cfg, value);
    } catch (const Error& e) {
      throw ConfigError(key + ": " + e.what(), line);
    }
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline void write_config(std::ostream& os, const RunConfig& cfg) {
  for (const auto& f : detail::config_fields()) os << f.key << " = " << f.get(cfg) << '\n';
}

inline std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  write_config(os, cfg);
  return os.str();
}

}  // namespace kcn
