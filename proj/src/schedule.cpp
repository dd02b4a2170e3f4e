#include "depse/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace depse {

void SdeParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("sde.gamma must be > 0");
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max))
    throw ConfigError("sde requires 0 < sigma_min < sigma_max");
  if (!(t_eps > 0.0) || !(t_max > t_eps) || !std::isfinite(t_max))
    throw ConfigError("sde requires 0 < t_eps < T");
  if (steps < 1) throw ConfigError("sde.N must be >= 1");
}

double kernel_variance(const SdeParams& p, double t) {
  const double log_ratio = std::log(p.sigma_max / p.sigma_min);
  const double growth = std::exp(2.0 * t * log_ratio);
  const double shrink = std::exp(-2.0 * p.gamma * t);
  return p.sigma_min * p.sigma_min * (growth - shrink) * log_ratio / (p.gamma + log_ratio);
}

double diffusion_coefficient(const SdeParams& p, double t) {
  const double log_ratio = std::log(p.sigma_max / p.sigma_min);
  return p.sigma_min * std::exp(t * log_ratio) * std::sqrt(2.0 * log_ratio);
}

DiffusionSchedule::DiffusionSchedule(const SdeParams& params) : params_(params) {
  params_.validate();
  const std::size_t n = params_.steps;
  delta_tau_ = (params_.t_max - params_.t_eps) / static_cast<double>(n);
  tau_.resize(n + 1);
  sigma_.resize(n + 1);
  g_.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    tau_[i] = i == n ? params_.t_max : params_.t_eps + static_cast<double>(i) * delta_tau_;
    sigma_[i] = std::sqrt(kernel_variance(params_, tau_[i]));
    g_[i] = diffusion_coefficient(params_, tau_[i]);
  }
}

double DiffusionSchedule::decay(std::size_t i) const {
  return std::exp(-params_.gamma * tau_.at(i));
}

KernelParams DiffusionSchedule::kernel_params(std::size_t i) const {
  if (i > params_.steps)
    throw std::out_of_range("kernel_params: step index " + std::to_string(i) + " > N");
  return {decay(i), sigma_[i]};
}

double DiffusionSchedule::variance_at(double t) const { return kernel_variance(params_, t); }
double DiffusionSchedule::sigma_at(double t) const {
  return std::sqrt(std::max(0.0, variance_at(t)));
}
double DiffusionSchedule::g_at(double t) const { return diffusion_coefficient(params_, t); }
double DiffusionSchedule::decay_at(double t) const { return std::exp(-params_.gamma * t); }

DiffusionSchedule make_schedule(const SdeParams& params) { return DiffusionSchedule(params); }

Spectrogram perturb(const Spectrogram& s0, double t, const DiffusionSchedule& schedule,
                    Rng& rng) {
  if (!(t >= 0.0) || t > schedule.params().t_max)
    throw ConfigError("perturb: t outside [0, T]");
  const double decay = schedule.decay_at(t);
  const double sigma = schedule.sigma_at(t);
  Spectrogram out(s0.shape());
  for (std::size_t k = 0; k < s0.size(); ++k) {
    const cplx z = rng.complex_normal();
    out[k] = decay * s0[k] + sigma * z;
  }
  return out;
}

namespace {

double max_variance(std::span<const double> sigma) {
  double m = 0.0;
  for (double s : sigma) m = std::max(m, s * s);
  return m;
}

void check_tables(const SdeParams& p, std::span<const double> tau,
                  std::span<const double> sigma) {
  if (tau.size() != sigma.size() || tau.size() != p.steps + 1)
    throw ShapeError("ode residual: schedule tables must have N+1 entries");
}

}  // namespace

OdeResidual grid_ode_residual(const SdeParams& p, std::span<const double> tau,
                              std::span<const double> sigma) {
  check_tables(p, tau, sigma);
  OdeResidual out;
  out.max_variance = max_variance(sigma);
  for (std::size_t i = 1; i < tau.size(); ++i) {
    const double dt = tau[i] - tau[i - 1];
    const double slope = (sigma[i] * sigma[i] - sigma[i - 1] * sigma[i - 1]) / dt;
    const double mid = 0.5 * (tau[i] + tau[i - 1]);
    const double g = diffusion_coefficient(p, mid);
    const double rhs = g * g - 2.0 * p.gamma * kernel_variance(p, mid);
    const double r = std::abs(slope - rhs);
    if (r > out.max_residual) {
      out.max_residual = r;
      out.worst_index = i;
    }
  }
  return out;
}

OdeResidual pointwise_ode_residual(const SdeParams& p, std::span<const double> tau,
                                   std::span<const double> sigma, double h) {
  check_tables(p, tau, sigma);
  OdeResidual out;
  out.max_variance = max_variance(sigma);
  for (std::size_t i = 1; i + 1 < tau.size(); ++i) {
    const double slope =
        (kernel_variance(p, tau[i] + h) - kernel_variance(p, tau[i] - h)) / (2.0 * h);
    const double g = diffusion_coefficient(p, tau[i]);
    const double rhs = g * g - 2.0 * p.gamma * sigma[i] * sigma[i];
    const double r = std::abs(slope - rhs);
    if (r > out.max_residual) {
      out.max_residual = r;
      out.worst_index = i;
    }
  }
  return out;
}

}  // namespace depse
