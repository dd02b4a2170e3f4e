#include "depse/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "depse/kernels.hpp"
#include "depse/nmf.hpp"
#include "depse/samplers.hpp"
#include "depse/score.hpp"
#include "depse/signal.hpp"
#include "depse/synthetic.hpp"

namespace depse {

namespace {

CheckResult below(std::string name, double residual, double threshold) {
  return {std::move(name), residual, threshold, std::isfinite(residual) && residual < threshold};
}

double euler_variance(const SdeParams& p, double t_end, double dt) {
  double v = 0.0;
  const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t k = 0; k < n; ++k) {
    const double g = diffusion_coefficient(p, static_cast<double>(k) * dt);
    v += dt * (g * g - 2.0 * p.gamma * v);
  }
  return v;
}

// Worst relative error of a score field against central differences of a log
// density, taking the conjugate gradient (d/dre + i d/dim) / 2.
template <typename LogDensity, typename Score>
double score_fd_error(const Spectrogram& s, LogDensity logp, Score score) {
  constexpr double h = 1e-4;
  const Spectrogram analytic = score(s);
  double worst = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    Spectrogram a = s, b = s;
    a[k] += cplx(h, 0.0);
    b[k] -= cplx(h, 0.0);
    const double dre = (logp(a) - logp(b)) / (2 * h);
    a = s;
    b = s;
    a[k] += cplx(0.0, h);
    b[k] -= cplx(0.0, h);
    const double dim = (logp(a) - logp(b)) / (2 * h);
    const cplx fd(0.5 * dre, 0.5 * dim);
    worst = std::max(worst, std::abs(fd - analytic[k]) / std::max(std::abs(analytic[k]), 1e-3));
  }
  return worst;
}

CheckResult check_ode(const SdeParams& params, double perturbation) {
  const DiffusionSchedule sched(params);
  std::vector<double> sigma(sched.sigma().begin(), sched.sigma().end());
  for (double& s : sigma) s *= 1.0 + perturbation;
  const OdeResidual r = pointwise_ode_residual(params, sched.tau(), sigma);
  return below("ode_residual", r.relative(), 1e-3);
}

CheckResult check_euler(const SdeParams& params) {
  const double t = std::min(0.5, params.t_max);
  const double exact = kernel_variance(params, t);
  return below("variance_vs_euler", std::abs(euler_variance(params, t, 1e-5) - exact) / exact,
               1e-4);
}

CheckResult check_gaussian_score(const DiffusionSchedule& sched, Rng& rng) {
  const Shape shape{2, 2};
  const GaussianPrior prior = random_gaussian_prior(shape, rng);
  double worst = 0.0;
  for (std::size_t i = 0; i <= sched.steps(); ++i) {
    const double t = sched.tau(i);
    const Spectrogram s = complex_noise(shape, rng);
    worst = std::max(worst, score_fd_error(
                                s, [&](const Spectrogram& z) { return gaussian_log_marginal(prior, z, t, sched); },
                                [&](const Spectrogram& z) { return gaussian_score(prior, z, t, sched); }));
  }
  return below("gaussian_score_fd", worst, 1e-4);
}

CheckResult check_gmm_score(const DiffusionSchedule& sched, Rng& rng) {
  const Shape shape{2, 2};
  GmmPrior prior;
  double total = 0.0;
  for (int m = 0; m < 3; ++m) {
    prior.components.push_back(random_gaussian_prior(shape, rng));
    prior.weights.push_back(rng.uniform(0.2, 1.0));
    total += prior.weights.back();
  }
  for (double& w : prior.weights) w /= total;
  double worst = 0.0;
  for (std::size_t i = 0; i <= sched.steps(); ++i) {
    const double t = sched.tau(i);
    const Spectrogram s = complex_noise(shape, rng);
    worst = std::max(worst, score_fd_error(
                                s, [&](const Spectrogram& z) { return gmm_log_marginal(prior, z, t, sched); },
                                [&](const Spectrogram& z) { return gmm_score(prior, z, t, sched); }));
  }
  return below("gmm_score_fd", worst, 1e-4);
}

CheckResult check_fusion(Rng& rng) {
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const cplx pm(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const cplx om(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const double pv = rng.uniform(0.01, 2.0);
    const double ov = rng.uniform(0.01, 2.0);
    cplx mean;
    double var;
    kernels::serial::fuse_gaussians({&pm, 1}, pv, {&om, 1}, {&ov, 1}, {&mean, 1}, {&var, 1});
    const double prec = 1.0 / pv + 1.0 / ov;
    const cplx expect = (pm / pv + om / ov) / prec;
    worst = std::max({worst, std::abs(mean - expect), std::abs(var - 1.0 / prec),
                      std::abs(1.0 / var - prec) / prec});
  }
  return below("fusion_identities", worst, 1e-8);
}

CheckResult check_tweedie(const DiffusionSchedule& sched, Rng& rng) {
  const Shape shape{4, 4};
  const GaussianPrior prior = random_gaussian_prior(shape, rng);
  const GaussianScore model(prior, sched);
  double worst = 0.0;
  for (std::size_t i = 1; i <= sched.steps(); ++i) {
    const double d = sched.decay(i);
    const double s2 = sched.sigma(i) * sched.sigma(i);
    const Spectrogram s = perturb(prior.mean, sched.tau(i), sched, rng);
    const Spectrogram est = tweedie_denoise(s, i, model, sched);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double p0 = prior.variance[k];
      const cplx exact = prior.mean[k] + d * p0 / (s2 + d * d * p0) * (s[k] - d * prior.mean[k]);
      worst = std::max(worst, std::abs(est[k] - exact));
    }
  }
  return below("tweedie_exactness", worst, 1e-10);
}

CheckResult check_stft(Rng& rng) {
  Waveform w;
  w.samples.resize(kSampleRate);
  for (double& x : w.samples) x = rng.normal();
  const Waveform back = istft(stft(w), w.size());
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    num += (back.samples[k] - w.samples[k]) * (back.samples[k] - w.samples[k]);
    den += w.samples[k] * w.samples[k];
  }
  return below("stft_round_trip", std::sqrt(num / den), 1e-6);
}

CheckResult check_nmf(Rng& rng) {
  double worst = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    const Shape shape{16, 20};
    RealField v(shape);
    for (double& x : v) x = rng.uniform(0.01, 2.0);
    NmfNoiseModel m = nmf_init(shape.freqs, shape.frames, 3, rng);
    double prev = is_divergence(v, m);
    for (int it = 0; it < 100; ++it) {
      nmf_update(v, m, 1);
      const double cur = is_divergence(v, m);
      worst = std::max(worst, (cur - prev) / std::max(1.0, prev));
      prev = cur;
    }
  }
  return below("nmf_monotonicity", worst, 1e-10);
}

CheckResult check_guidance_off(const DiffusionSchedule& sched, Rng& rng) {
  const Shape shape{4, 4};
  const GaussianPrior prior = random_gaussian_prior(shape, rng);
  const GaussianScore model(prior, sched);
  const Spectrogram x = complex_noise(shape, rng);
  const RealField v(shape, 0.3);
  const std::uint64_t seed = rng.next_u64();
  Rng a(seed), b(seed);
  Spectrogram sa = complex_noise(shape, a);
  Spectrogram sb = complex_noise(shape, b);
  for (std::size_t i = sched.steps(); i >= 1; --i) {
    sa = prior_step(sa, i, model, sched, 0.5, a);
    sb = guided_step(sb, x, i, model, v, 0.0, sched, 0.5, b);
  }
  double diff = 0.0;
  for (std::size_t k = 0; k < sa.size(); ++k) diff = std::max(diff, std::abs(sa[k] - sb[k]));
  return {"guidance_off_equivalence", diff, 0.0, sa == sb};
}

CheckResult check_kernels_agree(Rng& rng) {
  const Shape shape{64, 40};
  RealField v(shape);
  for (double& x : v) x = rng.uniform(0.01, 2.0);
  NmfNoiseModel a = nmf_init(shape.freqs, shape.frames, 4, rng);
  NmfNoiseModel b = a;
  nmf_update(v, a, 5, ExecPolicy::serial);
  nmf_update(v, b, 5, ExecPolicy::parallel);
  Waveform w;
  w.samples.resize(4000);
  for (double& x : w.samples) x = rng.normal();
  const bool same = a.w == b.w && a.h == b.h &&
                    stft(w, {}, ExecPolicy::serial) == stft(w, {}, ExecPolicy::parallel);
  return {"serial_parallel_agreement", same ? 0.0 : 1.0, 0.0, same};
}

}  // namespace

std::vector<CheckResult> run_oracle_checks(const SdeParams& params, const OracleOptions& opt) {
  params.validate();
  const DiffusionSchedule sched(params);
  Rng rng = derive_stream(opt.seed, 0x0AC1E);
  return {check_ode(params, opt.sigma_perturbation),
          check_euler(params),
          check_gaussian_score(sched, rng),
          check_gmm_score(sched, rng),
          check_fusion(rng),
          check_tweedie(sched, rng),
          check_stft(rng),
          check_nmf(rng),
          check_guidance_off(sched, rng),
          check_kernels_agree(rng)};
}

}  // namespace depse
