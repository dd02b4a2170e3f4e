#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "depse/exec.hpp"
#include "depse/field.hpp"

namespace depse {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

/// Amplitude compression c = beta |X|^alpha e^{i arg X}, applied bin-wise.
struct Compression {
  double alpha = 0.5;
  double beta = 0.15;
};

struct StftConfig {
  std::size_t window = 510;
  std::size_t hop = 127;
  std::optional<Compression> compression;

  std::size_t bins() const { return window / 2 + 1; }
  /// Frames produced for a signal of `length` samples: 1 + length / hop.
  std::size_t frames(std::size_t length) const { return 1 + length / hop; }
  void validate() const;
};

/// Periodic Hann window w[m] = 0.5 - 0.5 cos(2 pi m / n).
std::vector<double> hann_window(std::size_t n);

/// Centered frames (reflection padding of window/2 on both sides), one-sided
/// spectrum of every windowed frame. Bins x frames.
Spectrogram stft(const Waveform& w, const StftConfig& config = {},
                 ExecPolicy policy = ExecPolicy::serial);

/// Weighted overlap-add with the analysis window, normalized by the overlapped
/// squared window, then cropped or zero-padded to `length` samples.
Waveform istft(const Spectrogram& spec, std::size_t length, const StftConfig& config = {},
               ExecPolicy policy = ExecPolicy::serial);

Spectrogram compress(const Spectrogram& spec, const Compression& c);
Spectrogram decompress(const Spectrogram& spec, const Compression& c);

struct Mixture {
  Waveform mixture;
  Waveform scaled_noise;
  double scale = 0.0;
};

/// x = s + alpha n with alpha chosen so that 10 log10(|s|^2 / |alpha n|^2) = snr_db.
/// The noise is cropped or looped to the length of s.
Mixture mix_at_snr(const Waveform& s, const Waveform& n, double snr_db);

enum class SampleFormat { pcm16, float32 };

SampleFormat parse_sample_format(std::string_view name);

/// Mono 16 kHz RIFF/WAVE, PCM16 or IEEE float32. Anything else raises IoError.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w,
               SampleFormat format = SampleFormat::float32);

}  // namespace depse
