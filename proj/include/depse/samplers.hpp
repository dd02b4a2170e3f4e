#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "depse/exec.hpp"
#include "depse/field.hpp"
#include "depse/nmf.hpp"
#include "depse/random.hpp"
#include "depse/schedule.hpp"
#include "depse/score.hpp"

namespace depse {

enum class Method { prior, guided, depse_il, depse_tl };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);

/// Backward transition N_C(mu_back, var_back I) of the discretized reverse SDE.
struct TransitionParams {
  Spectrogram mu_back;
  double var_back = 0.0;
};

/// Diagonal Gaussian over s_{i-1} after fusing with the observation.
struct PosteriorParams {
  Spectrogram mu_post;
  RealField var_post;
};

struct SamplerConfig {
  Method method = Method::depse_tl;
  double r = 0.5;
  /// lambda[i-1] weights the likelihood score at step i (guided only). Empty
  /// means the default alternating schedule built from lambda_even.
  std::vector<double> lambda;
  double lambda_even = 1.5;
  std::size_t corrector_steps = 1;
  std::uint64_t seed = 0;
  ExecPolicy kernels = ExecPolicy::serial;

  void validate(std::size_t steps) const;
  double lambda_at(std::size_t i) const;
};

/// lambda_i = lambda_even for even i, 0 for odd i, i = 1..N.
std::vector<double> alternating_lambda(std::size_t steps, double lambda_even);

/// h = s + eps S(s, tau_i) + sqrt(2 eps) zeta with eps = (sigma_{tau_i} r)^2,
/// repeated `steps` times.
Spectrogram langevin_correct(const Spectrogram& state, std::size_t i, const ScoreModel& model,
                             const DiffusionSchedule& schedule, double r, Rng& rng,
                             std::size_t steps = 1);

/// Corrector followed by the Euler-Maruyama mean
/// mu_back = h + gamma h dtau + g_i^2 S(h, tau_i) dtau, var_back = g_i^2 dtau.
TransitionParams prior_transition(const Spectrogram& state, std::size_t i,
                                  const ScoreModel& model, const DiffusionSchedule& schedule,
                                  double r, Rng& rng, std::size_t corrector_steps = 1);

/// s_{i-1} ~ N_C(mu_back, var_back I).
Spectrogram prior_step(const Spectrogram& state, std::size_t i, const ScoreModel& model,
                       const DiffusionSchedule& schedule, double r, Rng& rng,
                       std::size_t corrector_steps = 1);

/// Unconditional chain from s_N ~ N_C(0, I) down to s_0.
Spectrogram sample_prior(const ScoreModel& model, const DiffusionSchedule& schedule, double r,
                         Rng& rng, std::size_t corrector_steps = 1);

/// (s_i + sigma_i^2 S(s_i, tau_i)) / e^{-gamma tau_i}
Spectrogram tweedie_denoise(const Spectrogram& state, std::size_t i, const ScoreModel& model,
                            const DiffusionSchedule& schedule);
Spectrogram tweedie_from_score(const Spectrogram& state, const Spectrogram& score,
                               std::size_t i, const DiffusionSchedule& schedule);

/// e^{gamma t} (x - e^{gamma t} s) / (sigma_t^2 e^{2 gamma t} + v), the gradient of
/// log N_C(x; e^{gamma t} s, sigma_t^2 e^{2 gamma t} + v) in s.
Spectrogram likelihood_score(const Spectrogram& state, const Spectrogram& x,
                             const RealField& noise_var, double t,
                             const DiffusionSchedule& schedule);

Spectrogram guided_step(const Spectrogram& state, const Spectrogram& x, std::size_t i,
                        const ScoreModel& model, const RealField& noise_var, double lambda,
                        const DiffusionSchedule& schedule, double r, Rng& rng,
                        std::size_t corrector_steps = 1);

/// Fusion with the uninformative-prior likelihood: observation d x with variance
/// d^2 (sigma_{i-1}^2 / d^2 + v), d = e^{-gamma tau_{i-1}}.
PosteriorParams il_posterior(const TransitionParams& transition, const Spectrogram& x,
                             const RealField& noise_var, std::size_t i,
                             const DiffusionSchedule& schedule,
                             ExecPolicy policy = ExecPolicy::serial);

/// Fusion with the diffused measurement x_{i-1}: observation variance d^2 v.
PosteriorParams tl_posterior(const TransitionParams& transition, const Spectrogram& x_prev,
                             const RealField& noise_var, std::size_t i,
                             const DiffusionSchedule& schedule,
                             ExecPolicy policy = ExecPolicy::serial);

Spectrogram sample_posterior(const PosteriorParams& post, Rng& rng);

Spectrogram depse_il_step(const Spectrogram& state, const Spectrogram& x, std::size_t i,
                          const ScoreModel& model, const RealField& noise_var,
                          const DiffusionSchedule& schedule, double r, Rng& rng,
                          std::size_t corrector_steps = 1,
                          ExecPolicy policy = ExecPolicy::serial);

Spectrogram depse_tl_step(const Spectrogram& state, const Spectrogram& x, std::size_t i,
                          const ScoreModel& model, const RealField& noise_var,
                          const DiffusionSchedule& schedule, double r, Rng& rng,
                          std::size_t corrector_steps = 1,
                          ExecPolicy policy = ExecPolicy::serial);

/// Noise model for enhance: a fixed variance field, or NMF re-estimated from
/// the Tweedie residual after every reverse step.
struct NoiseSpec {
  std::optional<RealField> fixed_variance;
  NmfConfig nmf;
};

struct EnhanceResult {
  Spectrogram estimate;
  RealField noise_variance;  // v at the end of the reverse pass
};

EnhanceResult enhance(const Spectrogram& x, const SamplerConfig& config,
                      const ScoreModel& model, const DiffusionSchedule& schedule,
                      const NoiseSpec& noise, Rng& rng);

}  // namespace depse
