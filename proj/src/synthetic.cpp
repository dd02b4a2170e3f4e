#include "depse/synthetic.hpp"

#include <cmath>
#include <numbers>

namespace depse {

namespace {
cplx phasor(Rng& rng) { return std::polar(1.0, rng.uniform(0.0, 2.0 * std::numbers::pi)); }
}  // namespace

GaussianPrior random_gaussian_prior(Shape shape, Rng& rng) {
  GaussianPrior p{Spectrogram(shape), RealField(shape)};
  for (std::size_t k = 0; k < shape.size(); ++k) {
    p.mean[k] = rng.uniform(0.5, 1.5) * phasor(rng);
    p.variance[k] = rng.uniform(0.1, 0.4);
  }
  return p;
}

GaussianPosterior gaussian_posterior(const GaussianPrior& prior, const Spectrogram& x,
                                     const RealField& noise_var) {
  require_same_shape(prior.shape(), x.shape(), "gaussian_posterior");
  require_same_shape(prior.shape(), noise_var.shape(), "gaussian_posterior");
  GaussianPosterior post{Spectrogram(x.shape()), RealField(x.shape())};
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double p0 = prior.variance[k];
    const double v = noise_var[k];
    post.mean[k] = p0 / (p0 + v) * x[k] + v / (p0 + v) * prior.mean[k];
    post.variance[k] = p0 * v / (p0 + v);
  }
  return post;
}

GmmPrior random_gmm_prior(Shape shape, std::size_t components, Rng& rng) {
  GmmPrior prior;
  for (std::size_t m = 0; m < components; ++m) {
    std::vector<double> envelope(shape.freqs), activation(shape.frames);
    for (double& e : envelope) e = rng.uniform(0.2, 1.5);
    for (double& a : activation) a = rng.uniform(0.2, 1.5);
    GaussianPrior c{Spectrogram(shape), RealField(shape)};
    for (std::size_t f = 0; f < shape.freqs; ++f)
      for (std::size_t l = 0; l < shape.frames; ++l) {
        c.mean(f, l) = envelope[f] * activation[l] * phasor(rng);
        c.variance(f, l) = 0.05 * std::norm(c.mean(f, l)) + 0.01;
      }
    prior.components.push_back(std::move(c));
    prior.weights.push_back(1.0 / static_cast<double>(components));
  }
  return prior;
}

RealField random_noise_power(Shape shape, Rng& rng) {
  constexpr std::size_t kRank = 2;
  std::vector<double> w(shape.freqs * kRank), h(kRank * shape.frames);
  for (double& x : w) x = rng.uniform(0.1, 1.0);
  for (double& x : h) x = rng.uniform(0.1, 1.0);
  RealField v(shape);
  for (std::size_t f = 0; f < shape.freqs; ++f)
    for (std::size_t l = 0; l < shape.frames; ++l)
      for (std::size_t k = 0; k < kRank; ++k) v(f, l) += w[f * kRank + k] * h[k * shape.frames + l];
  return v;
}

SyntheticTrial draw_gmm_trial(std::size_t frames, std::size_t components, double snr_db,
                              const StftConfig& stft, Rng& rng) {
  const Shape shape{stft.bins(), frames};
  SyntheticTrial t;
  t.snr_db = snr_db;
  t.prior = random_gmm_prior(shape, components, rng);

  const std::size_t m = rng.index(components);
  const GaussianPrior& c = t.prior.components[m];
  t.clean_spec = Spectrogram(shape);
  for (std::size_t k = 0; k < shape.size(); ++k)
    t.clean_spec[k] = c.mean[k] + std::sqrt(c.variance[k]) * rng.complex_normal();

  const RealField power = random_noise_power(shape, rng);
  Spectrogram noise_spec(shape);
  for (std::size_t k = 0; k < shape.size(); ++k)
    noise_spec[k] = std::sqrt(power[k]) * rng.complex_normal();

  const std::size_t length = (frames - 1) * stft.hop;
  t.clean = istft(t.clean_spec, length, stft);
  const Waveform raw_noise = istft(noise_spec, length, stft);
  Mixture mix = mix_at_snr(t.clean, raw_noise, snr_db);
  t.noise = std::move(mix.scaled_noise);
  t.mixture = std::move(mix.mixture);
  t.noisy_spec = Spectrogram(shape);
  for (std::size_t k = 0; k < shape.size(); ++k)
    t.noisy_spec[k] = t.clean_spec[k] + mix.scale * noise_spec[k];
  return t;
}

}  // namespace depse
