#include "depse/signal.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "depse/kernels.hpp"

namespace depse {

void StftConfig::validate() const {
  if (window < 4 || window % 2 != 0) throw ConfigError("stft.window must be even and >= 4");
  if (hop == 0 || hop > window) throw ConfigError("stft.hop must lie in 1..window");
  if (compression) {
    if (!(compression->alpha > 0.0) || !(compression->beta > 0.0))
      throw ConfigError("stft.compression alpha and beta must be positive");
  }
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t m = 0; m < n; ++m)
    w[m] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(m) /
                                static_cast<double>(n));
  return w;
}

Spectrogram stft(const Waveform& w, const StftConfig& config, ExecPolicy policy) {
  config.validate();
  const std::size_t len = w.size();
  if (len == 0) throw ShapeError("stft: empty input");
  const std::size_t pad = config.window / 2;
  if (len < config.window)
    throw ShapeError("stft: input shorter than one window (" + std::to_string(len) + " < " +
                     std::to_string(config.window) + ")");

  std::vector<double> padded(len + 2 * pad);
  for (std::size_t n = 0; n < len; ++n) padded[pad + n] = w.samples[n];
  for (std::size_t k = 1; k <= pad; ++k) {
    padded[pad - k] = w.samples[k];
    padded[pad + len - 1 + k] = w.samples[len - 1 - k];
  }

  const std::size_t frames = config.frames(len);
  Spectrogram out({config.bins(), frames});
  const std::vector<double> window = hann_window(config.window);
  kernels::stft_frames(policy, padded, window, {config.window, config.hop, frames},
                       out.values());
  return out;
}

Waveform istft(const Spectrogram& spec, std::size_t length, const StftConfig& config,
               ExecPolicy policy) {
  config.validate();
  if (spec.freqs() != config.bins())
    throw ShapeError("istft: spectrogram has " + std::to_string(spec.freqs()) +
                     " bins, expected " + std::to_string(config.bins()));
  if (spec.frames() == 0) throw ShapeError("istft: no frames");

  const std::size_t frames = spec.frames();
  const std::size_t n = config.window;
  const std::vector<double> window = hann_window(n);
  std::vector<double> frame_data(frames * n);
  kernels::istft_frames(policy, spec.values(), window, {n, config.hop, frames}, frame_data);

  const std::size_t total = (frames - 1) * config.hop + n;
  std::vector<double> acc(total, 0.0);
  std::vector<double> norm(total, 0.0);
  for (std::size_t l = 0; l < frames; ++l)
    for (std::size_t m = 0; m < n; ++m) {
      acc[l * config.hop + m] += frame_data[l * n + m];
      norm[l * config.hop + m] += window[m] * window[m];
    }

  const std::size_t pad = n / 2;
  Waveform out;
  out.samples.assign(length, 0.0);
  for (std::size_t k = 0; k < length && pad + k < total; ++k) {
    const double z = norm[pad + k];
    out.samples[k] = z > 1e-10 ? acc[pad + k] / z : 0.0;
  }
  return out;
}

Spectrogram compress(const Spectrogram& spec, const Compression& c) {
  Spectrogram out(spec.shape());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double mag = std::abs(spec[k]);
    out[k] = mag > 0.0 ? c.beta * std::pow(mag, c.alpha) * (spec[k] / mag) : cplx{};
  }
  return out;
}

Spectrogram decompress(const Spectrogram& spec, const Compression& c) {
  Spectrogram out(spec.shape());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double mag = std::abs(spec[k]);
    out[k] = mag > 0.0 ? std::pow(mag / c.beta, 1.0 / c.alpha) * (spec[k] / mag) : cplx{};
  }
  return out;
}

Mixture mix_at_snr(const Waveform& s, const Waveform& n, double snr_db) {
  if (!std::isfinite(snr_db)) throw ConfigError("mix_at_snr: SNR must be finite");
  if (s.size() == 0 || n.size() == 0) throw ShapeError("mix_at_snr: empty signal");
  std::vector<double> noise(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) noise[k] = n.samples[k % n.size()];

  double es = 0.0;
  double en = 0.0;
  for (double v : s.samples) es += v * v;
  for (double v : noise) en += v * v;
  if (!(es > 0.0)) throw NumericalError("mix_at_snr: speech is silent");
  if (!(en > 0.0)) throw NumericalError("mix_at_snr: noise is silent");

  Mixture m;
  m.scale = std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
  m.mixture.samples.resize(s.size());
  m.scaled_noise.samples.resize(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    m.scaled_noise.samples[k] = m.scale * noise[k];
    m.mixture.samples[k] = s.samples[k] + m.scaled_noise.samples[k];
  }
  return m;
}

SampleFormat parse_sample_format(std::string_view name) {
  if (name == "pcm16") return SampleFormat::pcm16;
  if (name == "float32") return SampleFormat::float32;
  throw ConfigError("unknown sample format '" + std::string(name) + "' (pcm16|float32)");
}

}  // namespace depse
