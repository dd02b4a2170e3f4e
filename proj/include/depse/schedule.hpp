#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "depse/field.hpp"
#include "depse/random.hpp"

namespace depse {

/// Parameters of the Ornstein-Uhlenbeck variance-exploding forward SDE
///   ds = -gamma s dt + g(t) dw,  g(t) = sigma_min (sigma_max/sigma_min)^t sqrt(2 ln(sigma_max/sigma_min))
/// together with the reverse-time grid resolution.
struct SdeParams {
  double gamma = 1.5;
  double sigma_min = 0.05;
  double sigma_max = 0.5;
  double t_eps = 0.03;
  double t_max = 1.0;
  std::size_t steps = 30;

  void validate() const;
};

struct KernelParams {
  double decay;  // e^{-gamma t}
  double sigma;  // perturbation kernel standard deviation
};

/// Immutable discretization of the forward SDE: the equally spaced grid
/// tau_0 = t_eps < ... < tau_N = t_max with the kernel scale sigma and
/// diffusion coefficient g tabulated at every grid time.
class DiffusionSchedule {
 public:
  explicit DiffusionSchedule(const SdeParams& params);

  const SdeParams& params() const { return params_; }
  std::size_t steps() const { return params_.steps; }
  double gamma() const { return params_.gamma; }
  double delta_tau() const { return delta_tau_; }

  std::span<const double> tau() const { return tau_; }
  std::span<const double> sigma() const { return sigma_; }
  std::span<const double> g() const { return g_; }

  double tau(std::size_t i) const { return tau_.at(i); }
  double sigma(std::size_t i) const { return sigma_.at(i); }
  double g(std::size_t i) const { return g_.at(i); }
  double decay(std::size_t i) const;

  /// (e^{-gamma tau_i}, sigma_{tau_i}); throws for i > N.
  KernelParams kernel_params(std::size_t i) const;

  // Closed forms at arbitrary t >= 0.
  double variance_at(double t) const;
  double sigma_at(double t) const;
  double g_at(double t) const;
  double decay_at(double t) const;

 private:
  SdeParams params_;
  double delta_tau_;
  std::vector<double> tau_;
  std::vector<double> sigma_;
  std::vector<double> g_;
};

DiffusionSchedule make_schedule(const SdeParams& params);

/// Closed-form kernel variance sigma^2(t) of the forward SDE.
double kernel_variance(const SdeParams& params, double t);
double diffusion_coefficient(const SdeParams& params, double t);

/// Draw s_t ~ N_C(e^{-gamma t} s0, sigma_t^2 I); t must lie in [0, T].
Spectrogram perturb(const Spectrogram& s0, double t, const DiffusionSchedule& schedule,
                    Rng& rng);

/// Residuals of the variance ODE d(sigma^2)/dt = g^2 - 2 gamma sigma^2.
struct OdeResidual {
  double max_residual = 0.0;
  double max_variance = 0.0;  // max over the table of sigma^2
  std::size_t worst_index = 0;

  double relative() const { return max_variance > 0.0 ? max_residual / max_variance : 0.0; }
};

/// Grid-step check: secant slope (sigma^2[i] - sigma^2[i-1]) / dtau against the
/// right-hand side at the interval midpoint, i = 1..N. Its floor is the midpoint
/// truncation error dtau^2/24 * (sigma^2)''', so it only resolves fine grids.
OdeResidual grid_ode_residual(const SdeParams& params, std::span<const double> tau,
                              std::span<const double> sigma);

/// Pointwise check at interior grid times i = 1..N-1: central difference of the
/// closed-form variance with step h against g(tau_i)^2 - 2 gamma sigma_table[i]^2.
/// Any error in the tabulated sigma shows up directly in the residual.
OdeResidual pointwise_ode_residual(const SdeParams& params, std::span<const double> tau,
                                   std::span<const double> sigma, double h = 1e-5);

}  // namespace depse
