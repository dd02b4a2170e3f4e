#include "depse/samplers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "depse/kernels.hpp"

namespace depse {

Method parse_method(std::string_view name) {
  if (name == "prior") return Method::prior;
  if (name == "guided") return Method::guided;
  if (name == "depse_il") return Method::depse_il;
  if (name == "depse_tl") return Method::depse_tl;
  throw ConfigError("unknown sampler method '" + std::string(name) +
                    "' (prior|guided|depse_il|depse_tl)");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::prior: return "prior";
    case Method::guided: return "guided";
    case Method::depse_il: return "depse_il";
    case Method::depse_tl: return "depse_tl";
  }
  return "?";
}

std::vector<double> alternating_lambda(std::size_t steps, double lambda_even) {
  std::vector<double> out(steps);
  for (std::size_t i = 1; i <= steps; ++i) out[i - 1] = i % 2 == 0 ? lambda_even : 0.0;
  return out;
}

void SamplerConfig::validate(std::size_t steps) const {
  if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("sampler.r must be positive");
  if (corrector_steps == 0) throw ConfigError("sampler.corrector_steps must be >= 1");
  if (!(lambda_even >= 0.0) || !std::isfinite(lambda_even))
    throw ConfigError("sampler.lambda_even must be nonnegative");
  if (!lambda.empty() && lambda.size() != steps)
    throw ConfigError("sampler.lambda must have one entry per reverse step (" +
                      std::to_string(steps) + ")");
  for (double l : lambda)
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("sampler.lambda entries must be >= 0");
}

double SamplerConfig::lambda_at(std::size_t i) const {
  if (!lambda.empty()) return lambda.at(i - 1);
  return i % 2 == 0 ? lambda_even : 0.0;
}

namespace {

void check_index(std::size_t i, const DiffusionSchedule& schedule) {
  if (i == 0 || i > schedule.steps())
    throw std::out_of_range("reverse step index " + std::to_string(i) + " outside 1.." +
                            std::to_string(schedule.steps()));
}

Spectrogram checked_score(const ScoreModel& model, const Spectrogram& s, double t) {
  Spectrogram out = model.score(s, t);
  require_same_shape(out.shape(), s.shape(), "score model reply");
  for (std::size_t k = 0; k < out.size(); ++k)
    if (!std::isfinite(out[k].real()) || !std::isfinite(out[k].imag()))
      throw NumericalError("non-finite score at t=" + std::to_string(t) + ", bin " +
                           std::to_string(k));
  return out;
}

// Langevin corrector starting from a precomputed score of `state`.
Spectrogram correct(const Spectrogram& state, const Spectrogram& first_score, std::size_t i,
                    const ScoreModel& model, const DiffusionSchedule& schedule, double r,
                    Rng& rng, std::size_t steps) {
  if (!(r >= 0.0)) throw ConfigError("Langevin ratio r must be nonnegative");
  const double eps = std::pow(schedule.sigma(i) * r, 2);
  const double noise = std::sqrt(2.0 * eps);
  Spectrogram h = state;
  for (std::size_t c = 0; c < steps; ++c) {
    const Spectrogram sc = c == 0 ? first_score : checked_score(model, h, schedule.tau(i));
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = h[k] + eps * sc[k] + noise * rng.complex_normal();
  }
  return h;
}

// Euler-Maruyama mean from the corrected state h, with an optional likelihood
// term weighted by lambda (skipped entirely when lambda == 0).
TransitionParams transition_from(const Spectrogram& h, std::size_t i, const ScoreModel& model,
                                 const DiffusionSchedule& schedule, double lambda,
                                 const Spectrogram* x, const RealField* noise_var) {
  const double dt = schedule.delta_tau();
  const double g2dt = schedule.g(i) * schedule.g(i) * dt;
  const double drift = schedule.gamma() * dt;
  Spectrogram total = checked_score(model, h, schedule.tau(i));
  if (lambda != 0.0) {
    const Spectrogram lik = likelihood_score(h, *x, *noise_var, schedule.tau(i), schedule);
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += lambda * lik[k];
  }
  TransitionParams tp{Spectrogram(h.shape()), g2dt};
  for (std::size_t k = 0; k < h.size(); ++k) tp.mu_back[k] = h[k] + drift * h[k] + g2dt * total[k];
  return tp;
}

Spectrogram draw(const Spectrogram& mean, double var, Rng& rng) {
  const double sd = std::sqrt(var);
  Spectrogram out(mean.shape());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = mean[k] + sd * rng.complex_normal();
  return out;
}

void check_noise(const RealField& v, Shape shape) {
  require_same_shape(v.shape(), shape, "noise variance");
  for (double x : v)
    if (!(x >= 0.0)) throw NumericalError("noise variance must be nonnegative");
}

PosteriorParams fuse(const TransitionParams& tp, const Spectrogram& obs_mean,
                     const RealField& obs_var, ExecPolicy policy) {
  PosteriorParams post{Spectrogram(obs_mean.shape()), RealField(obs_mean.shape())};
  kernels::fuse_gaussians(policy, tp.mu_back.values(), tp.var_back, obs_mean.values(),
                          obs_var.values(), post.mu_post.values(), post.var_post.values());
  return post;
}

struct Stepped {
  Spectrogram next;
  Spectrogram score_at_state;
};

Stepped step_impl(Method method, const Spectrogram& s, const Spectrogram* x, std::size_t i,
                  const ScoreModel& model, const RealField* v, double lambda,
                  const DiffusionSchedule& schedule, double r, Rng& rng,
                  std::size_t corrector_steps, ExecPolicy policy) {
  check_index(i, schedule);
  if (x) require_same_shape(x->shape(), s.shape(), "observation");
  if (v) check_noise(*v, s.shape());
  Stepped out{Spectrogram{}, checked_score(model, s, schedule.tau(i))};
  const Spectrogram h =
      correct(s, out.score_at_state, i, model, schedule, r, rng, corrector_steps);

  switch (method) {
    case Method::prior: {
      const TransitionParams tp = transition_from(h, i, model, schedule, 0.0, nullptr, nullptr);
      out.next = draw(tp.mu_back, tp.var_back, rng);
      break;
    }
    case Method::guided: {
      const TransitionParams tp = transition_from(h, i, model, schedule, lambda, x, v);
      out.next = draw(tp.mu_back, tp.var_back, rng);
      break;
    }
    case Method::depse_il: {
      const TransitionParams tp = transition_from(h, i, model, schedule, 0.0, nullptr, nullptr);
      out.next = sample_posterior(il_posterior(tp, *x, *v, i, schedule, policy), rng);
      break;
    }
    case Method::depse_tl: {
      const TransitionParams tp = transition_from(h, i, model, schedule, 0.0, nullptr, nullptr);
      const double d = schedule.decay(i - 1);
      const Spectrogram x_prev = [&] {
        Spectrogram m(x->shape());
        for (std::size_t k = 0; k < m.size(); ++k) m[k] = d * (*x)[k];
        return draw(m, std::pow(schedule.sigma(i - 1), 2), rng);
      }();
      out.next = sample_posterior(tl_posterior(tp, x_prev, *v, i, schedule, policy), rng);
      break;
    }
  }
  if (!all_finite(out.next))
    throw NumericalError(std::string(to_string(method)) + ": non-finite state after step " +
                         std::to_string(i));
  return out;
}

}  // namespace

Spectrogram langevin_correct(const Spectrogram& state, std::size_t i, const ScoreModel& model,
                             const DiffusionSchedule& schedule, double r, Rng& rng,
                             std::size_t steps) {
  check_index(i, schedule);
  return correct(state, checked_score(model, state, schedule.tau(i)), i, model, schedule, r,
                 rng, steps);
}

TransitionParams prior_transition(const Spectrogram& state, std::size_t i,
                                  const ScoreModel& model, const DiffusionSchedule& schedule,
                                  double r, Rng& rng, std::size_t corrector_steps) {
  const Spectrogram h = langevin_correct(state, i, model, schedule, r, rng, corrector_steps);
  return transition_from(h, i, model, schedule, 0.0, nullptr, nullptr);
}

Spectrogram prior_step(const Spectrogram& state, std::size_t i, const ScoreModel& model,
                       const DiffusionSchedule& schedule, double r, Rng& rng,
                       std::size_t corrector_steps) {
  return step_impl(Method::prior, state, nullptr, i, model, nullptr, 0.0, schedule, r, rng,
                   corrector_steps, ExecPolicy::serial)
      .next;
}

Spectrogram sample_prior(const ScoreModel& model, const DiffusionSchedule& schedule, double r,
                         Rng& rng, std::size_t corrector_steps) {
  Spectrogram s = complex_noise(model.shape(), rng);
  for (std::size_t i = schedule.steps(); i >= 1; --i)
    s = prior_step(s, i, model, schedule, r, rng, corrector_steps);
  return s;
}

Spectrogram tweedie_from_score(const Spectrogram& state, const Spectrogram& score,
                               std::size_t i, const DiffusionSchedule& schedule) {
  require_same_shape(state.shape(), score.shape(), "tweedie_denoise");
  const double var = std::pow(schedule.sigma(i), 2);
  const double d = schedule.decay(i);
  Spectrogram out(state.shape());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (state[k] + var * score[k]) / d;
  return out;
}

Spectrogram tweedie_denoise(const Spectrogram& state, std::size_t i, const ScoreModel& model,
                            const DiffusionSchedule& schedule) {
  check_index(i, schedule);
  return tweedie_from_score(state, checked_score(model, state, schedule.tau(i)), i, schedule);
}

Spectrogram likelihood_score(const Spectrogram& state, const Spectrogram& x,
                             const RealField& noise_var, double t,
                             const DiffusionSchedule& schedule) {
  require_same_shape(state.shape(), x.shape(), "likelihood_score");
  require_same_shape(state.shape(), noise_var.shape(), "likelihood_score");
  const double grow = 1.0 / schedule.decay_at(t);
  const double var_scaled = schedule.variance_at(t) * grow * grow;
  Spectrogram out(state.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double denom = std::max(var_scaled + noise_var[k], kernels::kVarianceFloor);
    out[k] = grow * (x[k] - grow * state[k]) / denom;
  }
  return out;
}

Spectrogram guided_step(const Spectrogram& state, const Spectrogram& x, std::size_t i,
                        const ScoreModel& model, const RealField& noise_var, double lambda,
                        const DiffusionSchedule& schedule, double r, Rng& rng,
                        std::size_t corrector_steps) {
  if (!(lambda >= 0.0)) throw ConfigError("guidance weight must be nonnegative");
  return step_impl(Method::guided, state, &x, i, model, &noise_var, lambda, schedule, r, rng,
                   corrector_steps, ExecPolicy::serial)
      .next;
}

PosteriorParams il_posterior(const TransitionParams& tp, const Spectrogram& x,
                             const RealField& noise_var, std::size_t i,
                             const DiffusionSchedule& schedule, ExecPolicy policy) {
  check_index(i, schedule);
  require_same_shape(tp.mu_back.shape(), x.shape(), "il_posterior");
  check_noise(noise_var, x.shape());
  const double d = schedule.decay(i - 1);
  const double s2 = std::pow(schedule.sigma(i - 1), 2);
  Spectrogram obs_mean(x.shape());
  RealField obs_var(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double sigma_x = s2 / (d * d) + noise_var[k];
    obs_mean[k] = d * x[k];
    obs_var[k] = d * d * sigma_x;
  }
  return fuse(tp, obs_mean, obs_var, policy);
}

PosteriorParams tl_posterior(const TransitionParams& tp, const Spectrogram& x_prev,
                             const RealField& noise_var, std::size_t i,
                             const DiffusionSchedule& schedule, ExecPolicy policy) {
  check_index(i, schedule);
  require_same_shape(tp.mu_back.shape(), x_prev.shape(), "tl_posterior");
  check_noise(noise_var, x_prev.shape());
  const double d2 = std::pow(schedule.decay(i - 1), 2);
  RealField obs_var(x_prev.shape());
  for (std::size_t k = 0; k < obs_var.size(); ++k) obs_var[k] = d2 * noise_var[k];
  return fuse(tp, x_prev, obs_var, policy);
}

Spectrogram sample_posterior(const PosteriorParams& post, Rng& rng) {
  require_same_shape(post.mu_post.shape(), post.var_post.shape(), "sample_posterior");
  Spectrogram out(post.mu_post.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!(post.var_post[k] >= 0.0))
      throw NumericalError("negative posterior variance at bin " + std::to_string(k));
    out[k] = post.mu_post[k] + std::sqrt(post.var_post[k]) * rng.complex_normal();
  }
  return out;
}

Spectrogram depse_il_step(const Spectrogram& state, const Spectrogram& x, std::size_t i,
                          const ScoreModel& model, const RealField& noise_var,
                          const DiffusionSchedule& schedule, double r, Rng& rng,
                          std::size_t corrector_steps, ExecPolicy policy) {
  return step_impl(Method::depse_il, state, &x, i, model, &noise_var, 0.0, schedule, r, rng,
                   corrector_steps, policy)
      .next;
}

Spectrogram depse_tl_step(const Spectrogram& state, const Spectrogram& x, std::size_t i,
                          const ScoreModel& model, const RealField& noise_var,
                          const DiffusionSchedule& schedule, double r, Rng& rng,
                          std::size_t corrector_steps, ExecPolicy policy) {
  return step_impl(Method::depse_tl, state, &x, i, model, &noise_var, 0.0, schedule, r, rng,
                   corrector_steps, policy)
      .next;
}

EnhanceResult enhance(const Spectrogram& x, const SamplerConfig& config,
                      const ScoreModel& model, const DiffusionSchedule& schedule,
                      const NoiseSpec& noise, Rng& rng) {
  config.validate(schedule.steps());
  require_same_shape(x.shape(), model.shape(), "enhance: mixture vs score model");
  if (!all_finite(x)) throw NumericalError("enhance: mixture has non-finite entries");
  const std::size_t n = schedule.steps();

  std::optional<NmfNoiseModel> nmf;
  RealField v;
  if (noise.fixed_variance) {
    check_noise(*noise.fixed_variance, x.shape());
    v = *noise.fixed_variance;
  } else {
    noise.nmf.validate();
    double power = 0.0;
    for (const cplx& c : x) power += std::norm(c);
    power /= static_cast<double>(x.size());
    nmf = nmf_init(x.freqs(), x.frames(), noise.nmf.rank, rng, power / 2.0);
    v = noise_variance(*nmf, config.kernels);
  }

  Spectrogram s;
  const double sigma_n = schedule.sigma(n);
  switch (config.method) {
    case Method::prior:
      s = complex_noise(x.shape(), rng);
      break;
    case Method::guided:
    case Method::depse_il:
      s = draw(x, sigma_n * sigma_n, rng);
      break;
    case Method::depse_tl: {
      Spectrogram xn(x.shape());
      for (std::size_t k = 0; k < x.size(); ++k) xn[k] = schedule.decay(n) * x[k];
      xn = draw(xn, sigma_n * sigma_n, rng);
      s = draw(xn, sigma_n * sigma_n, rng);
      break;
    }
  }

  for (std::size_t i = n; i >= 1; --i) {
    Stepped st = step_impl(config.method, s, &x, i, model, &v, config.lambda_at(i), schedule,
                           config.r, rng, config.corrector_steps, config.kernels);
    if (nmf && config.method != Method::prior) {
      const Spectrogram s0 = tweedie_from_score(s, st.score_at_state, i, schedule);
      RealField resid(x.shape());
      for (std::size_t k = 0; k < x.size(); ++k) resid[k] = std::norm(x[k] - s0[k]);
      try {
        nmf_update(resid, *nmf, noise.nmf.iters_per_step, config.kernels);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string("NMF update failed at step ") + std::to_string(i) +
                             ": " + e.what());
      }
      v = noise_variance(*nmf, config.kernels);
    }
    s = std::move(st.next);
  }
  return {std::move(s), std::move(v)};
}

}  // namespace depse
