#include "depse/nmf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "depse/kernels.hpp"

namespace depse {

void NmfConfig::validate() const {
  if (rank == 0) throw ConfigError("nmf.rank must be >= 1");
}

NmfNoiseModel nmf_init(std::size_t freqs, std::size_t frames, std::size_t rank, Rng& rng,
                       std::optional<double> target_mean) {
  if (freqs == 0 || frames == 0 || rank == 0)
    throw ConfigError("nmf_init: F, L and K must be positive");
  NmfNoiseModel m{freqs, rank, frames, std::vector<double>(freqs * rank),
                  std::vector<double>(rank * frames)};
  for (double& x : m.w) x = rng.uniform(0.5, 1.5);
  for (double& x : m.h) x = rng.uniform(0.5, 1.5);

  double target = target_mean.value_or(1.0);
  if (!(target > 0.0) || !std::isfinite(target)) target = 1.0;
  const RealField v = noise_variance(m);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  // Split the scale evenly so neither factor drifts toward the floor.
  const double c = std::sqrt(target / mean);
  for (double& x : m.w) x = std::max(x * c, kNmfFloor);
  for (double& x : m.h) x = std::max(x * c, kNmfFloor);
  return m;
}

RealField noise_variance(const NmfNoiseModel& model, ExecPolicy policy) {
  RealField out(model.shape());
  kernels::nmf_product(policy, model.w, model.h, out.values(),
                       {model.freqs, model.rank, model.frames});
  return out;
}

double is_divergence(const RealField& v, const NmfNoiseModel& model, ExecPolicy policy) {
  require_same_shape(v.shape(), model.shape(), "is_divergence");
  const RealField wh = noise_variance(model, policy);
  return kernels::is_divergence(policy, v.values(), wh.values(), model.freqs, model.frames);
}

void nmf_update(const RealField& v, NmfNoiseModel& model, std::size_t n_iter,
                ExecPolicy policy) {
  require_same_shape(v.shape(), model.shape(), "nmf_update");
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]) || v[i] < 0.0)
      throw NumericalError("nmf_update: V has a negative or non-finite entry at index " +
                           std::to_string(i));

  // V == 0 makes the IS ratios degenerate; the floor keeps WH strictly positive.
  RealField vf = v;
  for (double& x : vf) x = std::max(x, kNmfFloor * kNmfFloor);

  const kernels::NmfDims dims{model.freqs, model.rank, model.frames};
  std::vector<double> wh(model.freqs * model.frames);
  for (std::size_t it = 0; it < n_iter; ++it) {
    kernels::nmf_product(policy, model.w, model.h, wh, dims);
    kernels::is_update_w(policy, vf.values(), model.w, model.h, wh, dims, kNmfFloor);
    kernels::nmf_product(policy, model.w, model.h, wh, dims);
    kernels::is_update_h(policy, vf.values(), model.w, model.h, wh, dims, kNmfFloor);
  }
}

}  // namespace depse
