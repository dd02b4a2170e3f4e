#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depse/schedule.hpp"

namespace depse {

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct OracleOptions {
  /// Multiplies the tabulated sigma by (1 + p) before the ODE check; nonzero
  /// values exist to confirm the check can fail.
  double sigma_perturbation = 0.0;
  std::uint64_t seed = 0;
};

/// Invariant suite: ODE residual, closed form vs Euler integration, score
/// finite differences, fusion identities, Tweedie exactness, STFT round trip,
/// NMF monotonicity, guidance-off equivalence, serial/parallel agreement.
std::vector<CheckResult> run_oracle_checks(const SdeParams& params, const OracleOptions& options);

}  // namespace depse
