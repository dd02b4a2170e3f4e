#pragma once

#include <span>

namespace depse {

inline constexpr double kMetricCap = 60.0;

struct BssScores {
  double si_sdr = 0.0;
  double si_sir = 0.0;
  double si_sar = 0.0;
};

/// 10 log10(|a ref|^2 / |est - a ref|^2) with a = <est, ref> / |ref|^2, clamped to +-60 dB.
double si_sdr(std::span<const double> ref, std::span<const double> est);

/// Scale-invariant SDR/SIR/SAR on the Gram-Schmidt basis {ref, noise minus its
/// projection on ref}, each clamped to +-60 dB.
BssScores bss_eval(std::span<const double> ref, std::span<const double> noise,
                   std::span<const double> est);

}  // namespace depse
