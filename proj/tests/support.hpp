#pragma once

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "kcn/exponents.hpp"
#include "kcn/radial_field.hpp"
#include "kcn/riesz.hpp"
#include "kcn/solvers.hpp"

namespace kcn::test {

inline ProblemParams case_one() { return {}; }  // N=3, mu=2, a=b=1, theta=2, c=1, q=1.5, p=3

inline ProblemParams with(ProblemParams P, double q, double p, double alpha) {
  P.q = q;
  P.p = p;
  P.alpha = alpha;
  return P;
}

// Constants estimated on the canonical grid (GN) and the graded bubble grid (S_HL), frozen.
inline ConstantsUsed canonical_constants() { return {0.0439861, 3.83448, 3.3326, "frozen"}; }

inline const RieszKernel& canonical_kernel() {
  static const RieszKernel K = cached_kernel(RadialGrid::uniform(3, 1024, 16.0), 2.0);
  return K;
}

inline const RieszKernel& small_kernel() {
  static const RieszKernel K = cached_kernel(RadialGrid::uniform(3, 256, 12.0), 2.0);
  return K;
}

// key = value lines from the extended-precision golden file.
inline std::map<std::string, double> golden(const std::string& name) {
  std::ifstream is(std::string(KCN_SOURCE_DIR) + "/tests/golden/" + name);
  if (!is) throw std::runtime_error("missing golden file " + name);
  std::map<std::string, double> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = std::stod(line.substr(eq + 3));
  }
  return out;
}

}  // namespace kcn::test
