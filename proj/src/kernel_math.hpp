#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include "depse/kernels.hpp"

// Per-element arithmetic shared by the serial and OpenMP kernels.
namespace depse::kernels::detail {

inline void fuse_one(std::complex<double> prior_mean, double prior_var,
                     std::complex<double> obs_mean, double obs_var,
                     std::complex<double>& out_mean, double& out_var) {
  if (obs_var == 0.0) {
    out_mean = obs_mean;
    out_var = 0.0;
    return;
  }
  if (std::isinf(obs_var)) {
    out_mean = prior_mean;
    out_var = prior_var;
    return;
  }
  const double p = std::max(prior_var, kVarianceFloor);
  const double o = std::max(obs_var, kVarianceFloor);
  out_var = o * p / (o + p);
  out_mean = out_var * (prior_mean / p + obs_mean / o);
}

inline double is_term(double v, double wh) {
  const double ratio = v / wh;
  return ratio - std::log(ratio) - 1.0;
}

}  // namespace depse::kernels::detail
