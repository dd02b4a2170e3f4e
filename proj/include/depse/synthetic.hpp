#pragma once

#include "depse/random.hpp"
#include "depse/score.hpp"
#include "depse/signal.hpp"

namespace depse {

/// Gaussian prior with |mu0| in [0.5, 1.5], uniform phase, p0 in [0.1, 0.4].
GaussianPrior random_gaussian_prior(Shape shape, Rng& rng);

/// Conjugate posterior of s0 given x = s0 + n, n ~ N_C(0, v):
/// mean p0/(p0+v) x + v/(p0+v) mu0, variance p0 v/(p0+v).
struct GaussianPosterior {
  Spectrogram mean;
  RealField variance;
};
GaussianPosterior gaussian_posterior(const GaussianPrior& prior, const Spectrogram& x,
                                     const RealField& noise_var);

/// Mixture of `components` speech-like priors: component means are a spectral
/// envelope times a temporal activation with uniform phase, per-bin variance
/// 0.05 |mu|^2 + 0.01.
GmmPrior random_gmm_prior(Shape shape, std::size_t components, Rng& rng);

/// Rank-2 nonnegative noise power field.
RealField random_noise_power(Shape shape, Rng& rng);

/// A clean/noise/mixture triple built in the STFT domain. The clean
/// spectrogram is drawn from the mixture prior, noise from N_C(0, noise_power);
/// waveforms come from istft, and the noise is scaled to the requested SNR in
/// the waveform domain, so noisy_spec = clean_spec + scale * noise_spec.
struct SyntheticTrial {
  GmmPrior prior;
  Spectrogram clean_spec;
  Spectrogram noisy_spec;
  Waveform clean;
  Waveform noise;  // already scaled
  Waveform mixture;
  double snr_db = 0.0;
};

/// Frames of the trial spectrogram; the waveforms have (frames-1)*hop samples.
SyntheticTrial draw_gmm_trial(std::size_t frames, std::size_t components, double snr_db,
                              const StftConfig& stft, Rng& rng);

}  // namespace depse
