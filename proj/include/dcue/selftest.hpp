#pragma once

#include "dcue/cross_fit.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dcue {

/// Random residualized system with a nonzero first stage and heteroscedastic
/// errors: Zbar ~ N(0, I), Dbar = Zbar pi + v, Ybar = Dbar beta + u.
ResidualData random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m, double beta = 0.5);

/// Just-identified instance (m = 1).
inline ResidualData random_just_identified(std::mt19937_64& rng, Eigen::Index n) {
  return random_instance(rng, n, 1);
}

/// Rotates the instruments, Zbar -> Zbar A' for a random well-conditioned A.
ResidualData rotate_instruments(const ResidualData& rd, std::mt19937_64& rng);

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestOptions {
  std::uint64_t seed = 20240101;
  int instances = 100;
  // Test hook: perturbs the analytic gradient so the gradient property must fail.
  bool corrupt_gradient = false;
};

PropertyResult check_gradient(const SelftestOptions& opts);
PropertyResult check_rotation_invariance(const SelftestOptions& opts);
PropertyResult check_just_identified(const SelftestOptions& opts);
PropertyResult check_chisq(const SelftestOptions& opts);

/// All four properties, in the order above.
std::vector<PropertyResult> run_selftest(const SelftestOptions& opts = {});

}  // namespace dcue
