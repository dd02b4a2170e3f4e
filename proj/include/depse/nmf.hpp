#pragma once

#include <cstddef>
#include <optional>

#include "depse/exec.hpp"
#include "depse/field.hpp"
#include "depse/random.hpp"

namespace depse {

inline constexpr double kNmfFloor = 1e-10;

struct NmfConfig {
  std::size_t rank = 4;
  std::size_t iters_per_step = 2;  // warm-started across reverse steps

  void validate() const;
};

/// Noise variance v = W H with W (F x K) and H (K x L), both row-major.
struct NmfNoiseModel {
  std::size_t freqs = 0;
  std::size_t rank = 0;
  std::size_t frames = 0;
  std::vector<double> w;
  std::vector<double> h;

  Shape shape() const { return {freqs, frames}; }
};

/// Uniform(0.5, 1.5) factors, rescaled so that mean(WH) equals `target_mean`
/// (pass mean(|x|^2)/2 of the mixture) or 1 when absent.
NmfNoiseModel nmf_init(std::size_t freqs, std::size_t frames, std::size_t rank, Rng& rng,
                       std::optional<double> target_mean = std::nullopt);

/// n_iter Itakura-Saito multiplicative updates (W then H), entries floored at
/// kNmfFloor. Rejects negative or non-finite V.
void nmf_update(const RealField& v, NmfNoiseModel& model, std::size_t n_iter,
                ExecPolicy policy = ExecPolicy::serial);

/// v = WH
RealField noise_variance(const NmfNoiseModel& model, ExecPolicy policy = ExecPolicy::serial);

/// D_IS(V || WH)
double is_divergence(const RealField& v, const NmfNoiseModel& model,
                     ExecPolicy policy = ExecPolicy::serial);

}  // namespace depse
