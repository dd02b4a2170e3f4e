#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <vector>

#include "depse/signal.hpp"
#include "support.hpp"

using namespace depse;

namespace {

Waveform white(std::size_t n, Rng& rng) {
  Waveform w;
  w.samples.resize(n);
  for (double& x : w.samples) x = rng.normal();
  return w;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += (a[k] - b[k]) * (a[k] - b[k]);
    den += b[k] * b[k];
  }
  return std::sqrt(num / den);
}

double energy(const std::vector<double>& v) {
  return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

// Minimal RIFF writer so the reader can be fed headers the library never emits.
void write_raw_wav(const std::filesystem::path& p, std::uint16_t format, std::uint16_t channels,
                   std::uint32_t rate, std::uint16_t bits, const std::vector<char>& data,
                   std::size_t declared = 0) {
  std::ofstream f(p, std::ios::binary);
  const auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  const auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  const std::uint32_t size = declared ? declared : data.size();
  f.write("RIFF", 4);
  u32(36 + size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(channels * bits / 8);
  u16(bits);
  f.write("data", 4);
  u32(size);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace

TEST_CASE("STFT geometry") {
  const StftConfig cfg;
  CHECK(cfg.bins() == 256);
  CHECK(cfg.hop == 127);
  Rng rng(1);
  const Spectrogram s = stft(white(16000, rng), cfg);
  CHECK(s.freqs() == 256);
  CHECK(s.frames() == 1 + 16000 / 127);
}

TEST_CASE("periodic Hann window") {
  const auto w = hann_window(8);
  CHECK(w[0] == 0.0);
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(0.5));
  CHECK(w[6] == doctest::Approx(0.5));
}

TEST_CASE("round trip on white noise and 1-second signals") {
  Rng rng(2);
  for (std::size_t n : {std::size_t{1020}, std::size_t{5003}, std::size_t{16000}}) {
    const Waveform w = white(n, rng);
    const Waveform back = istft(stft(w), n);
    REQUIRE(back.size() == n);
    CHECK(rel_err(back.samples, w.samples) < 1e-6);
  }
}

TEST_CASE("stft and istft are linear") {
  Rng rng(3);
  const Waveform u = white(4000, rng), v = white(4000, rng);
  Waveform mix;
  for (std::size_t k = 0; k < 4000; ++k) mix.samples.push_back(2.0 * u.samples[k] - 0.5 * v.samples[k]);
  const Spectrogram su = stft(u), sv = stft(v), sm = stft(mix);
  Spectrogram combo(su.shape());
  for (std::size_t k = 0; k < su.size(); ++k) combo[k] = 2.0 * su[k] - 0.5 * sv[k];
  CHECK(test::max_abs_diff(sm, combo) < 1e-10);

  Spectrogram sum(su.shape());
  for (std::size_t k = 0; k < su.size(); ++k) sum[k] = su[k] + sv[k];
  const Waveform a = istft(su, 4000), b = istft(sv, 4000), c = istft(sum, 4000);
  for (std::size_t k = 0; k < 4000; ++k) CHECK(std::abs(c.samples[k] - a.samples[k] - b.samples[k]) < 1e-10);
}

TEST_CASE("zero signal and zero spectrogram") {
  Waveform z;
  z.samples.assign(2000, 0.0);
  for (const cplx& c : stft(z)) CHECK(c == cplx(0.0, 0.0));
  const Waveform back = istft(Spectrogram({256, 10}), 1200);
  for (double x : back.samples) CHECK(x == 0.0);
}

TEST_CASE("Parseval against the windowed frame energy") {
  Rng rng(4);
  const StftConfig cfg;
  const Waveform w = white(3000, rng);
  const Spectrogram s = stft(w, cfg);
  // Reflection padding written out here rather than reused.
  const std::size_t pad = cfg.window / 2, n = w.size();
  std::vector<double> padded(n + 2 * pad);
  for (std::size_t k = 0; k < padded.size(); ++k) {
    const long j = static_cast<long>(k) - static_cast<long>(pad);
    const long m = j < 0 ? -j : (j >= long(n) ? 2 * long(n) - 2 - j : j);
    padded[k] = w.samples[static_cast<std::size_t>(m)];
  }
  const auto win = hann_window(cfg.window);
  double time_energy = 0.0, freq_energy = 0.0;
  for (std::size_t l = 0; l < s.frames(); ++l) {
    for (std::size_t m = 0; m < cfg.window; ++m) {
      const std::size_t idx = l * cfg.hop + m;
      const double x = idx < padded.size() ? padded[idx] : 0.0;
      time_energy += std::pow(win[m] * x, 2);
    }
    for (std::size_t f = 0; f < s.freqs(); ++f) {
      const double weight = (f == 0 || f == s.freqs() - 1) ? 1.0 : 2.0;
      freq_energy += weight * std::norm(s(f, l));
    }
  }
  freq_energy /= static_cast<double>(cfg.window);
  CHECK(std::abs(freq_energy - time_energy) / time_energy < 1e-6);
}

// The periodic Hann window leaks into both neighbours: a unit sinusoid at bin
// k0 gives |X[k0]| = N/4 and |X[k0 +- 1]| = N/8, so the centre bin carries
// 2/3 of the one-sided frame energy and the main lobe all of it.
TEST_CASE("bin-centre sinusoid concentrates in its main lobe") {
  const StftConfig cfg;
  const std::size_t n = cfg.window, k0 = 40;
  Waveform w;
  for (std::size_t t = 0; t < 4000; ++t)
    w.samples.push_back(std::cos(2.0 * M_PI * double(k0) * double(t) / double(n)));
  const Spectrogram s = stft(w, cfg);
  for (std::size_t l = 3; l < s.frames() - 3; ++l) {
    double total = 0.0;
    for (std::size_t f = 0; f < s.freqs(); ++f) total += std::norm(s(f, l));
    const double centre = std::norm(s(k0, l));
    const double lobe = centre + std::norm(s(k0 - 1, l)) + std::norm(s(k0 + 1, l));
    CHECK(std::abs(s(k0, l)) == doctest::Approx(n / 4.0).epsilon(1e-9));
    CHECK(std::abs(s(k0 + 1, l)) == doctest::Approx(n / 8.0).epsilon(1e-9));
    CHECK(centre / total == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(lobe / total > 0.999);
  }
}

TEST_CASE("stft input errors") {
  CHECK_THROWS_AS(stft(Waveform{}), ShapeError);
  Waveform shorty;
  shorty.samples.assign(100, 1.0);
  CHECK_THROWS_AS(stft(shorty), ShapeError);
  StftConfig bad;
  bad.hop = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("compression round trip") {
  Rng rng(5);
  const Spectrogram s = test::random_spec({5, 4}, rng);
  const Compression c;
  const Spectrogram cs = compress(s, c);
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(std::abs(cs[k]) == doctest::Approx(0.15 * std::sqrt(std::abs(s[k]))));
    CHECK(std::arg(cs[k]) == doctest::Approx(std::arg(s[k])));
  }
  CHECK(test::max_abs_diff(decompress(cs, c), s) < 1e-12);
}

TEST_CASE("mixing at a prescribed SNR") {
  Rng rng(6);
  const Waveform s = white(8000, rng);
  const Waveform n = white(3000, rng);
  for (double snr : {-5.0, 0.0, 5.0, 12.5}) {
    const Mixture m = mix_at_snr(s, n, snr);
    REQUIRE(m.mixture.size() == s.size());
    REQUIRE(m.scaled_noise.size() == s.size());
    const double measured = 10.0 * std::log10(energy(s.samples) / energy(m.scaled_noise.samples));
    CHECK(std::abs(measured - snr) < 1e-6);
    for (std::size_t k = 0; k < s.size(); ++k)
      CHECK(m.mixture.samples[k] == s.samples[k] + m.scaled_noise.samples[k]);
    if (snr == 0.0)
      CHECK(std::abs(energy(s.samples) - energy(m.scaled_noise.samples)) / energy(s.samples) < 1e-9);
  }
  // noise is looped to the speech length
  const Mixture m = mix_at_snr(s, n, 0.0);
  CHECK(m.scaled_noise.samples[3000] == doctest::Approx(m.scaled_noise.samples[0]));

  Waveform silent;
  silent.samples.assign(100, 0.0);
  CHECK_THROWS_AS(mix_at_snr(silent, n, 0.0), NumericalError);
  CHECK_THROWS_AS(mix_at_snr(s, silent, 0.0), NumericalError);
  CHECK_THROWS_AS(mix_at_snr(s, n, INFINITY), ConfigError);
  CHECK_THROWS_AS(mix_at_snr(Waveform{}, n, 0.0), ShapeError);
}

TEST_CASE("WAV round trips") {
  test::TempDir dir("wav");
  Rng rng(7);
  Waveform w;
  for (int k = 0; k < 1000; ++k) w.samples.push_back(rng.uniform(-0.99, 0.99));
  // float32 is exact for values already representable in single precision
  for (double& x : w.samples) x = static_cast<float>(x);

  write_wav(dir.path / "f.wav", w, SampleFormat::float32);
  CHECK(read_wav(dir.path / "f.wav").samples == w.samples);

  write_wav(dir.path / "p.wav", w, SampleFormat::pcm16);
  const Waveform p = read_wav(dir.path / "p.wav");
  REQUIRE(p.size() == w.size());
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(std::abs(p.samples[k] - w.samples[k]) <= 1.0 / 32768);
  CHECK(p.sample_rate == 16000);
  CHECK(parse_sample_format("pcm16") == SampleFormat::pcm16);
  CHECK_THROWS_AS(parse_sample_format("mp3"), ConfigError);
}

TEST_CASE("WAV reader rejects what it cannot represent") {
  test::TempDir dir("wav");
  const std::vector<char> data(400, 0);
  write_raw_wav(dir.path / "441.wav", 1, 1, 44100, 16, data);
  CHECK_THROWS_AS(read_wav(dir.path / "441.wav"), IoError);
  write_raw_wav(dir.path / "st.wav", 1, 2, 16000, 16, data);
  CHECK_THROWS_AS(read_wav(dir.path / "st.wav"), IoError);
  write_raw_wav(dir.path / "u8.wav", 1, 1, 16000, 8, data);
  CHECK_THROWS_AS(read_wav(dir.path / "u8.wav"), IoError);
  write_raw_wav(dir.path / "trunc.wav", 1, 1, 16000, 16, data, 800);
  CHECK_THROWS_AS(read_wav(dir.path / "trunc.wav"), IoError);
  std::ofstream(dir.path / "junk.wav") << "not a wave file at all";
  CHECK_THROWS_AS(read_wav(dir.path / "junk.wav"), IoError);
  CHECK_THROWS_AS(read_wav(dir.path / "missing.wav"), IoError);

  std::vector<char> nan_data(8);
  const float bad[2] = {0.5f, NAN};
  std::memcpy(nan_data.data(), bad, 8);
  write_raw_wav(dir.path / "nan.wav", 3, 1, 16000, 32, nan_data);
  CHECK_THROWS_AS(read_wav(dir.path / "nan.wav"), IoError);

  // a valid PCM16 header written by hand decodes as value / 32768
  std::vector<char> pcm(4);
  const std::int16_t vals[2] = {16384, -32768};
  std::memcpy(pcm.data(), vals, 4);
  write_raw_wav(dir.path / "ok.wav", 1, 1, 16000, 16, pcm);
  const Waveform ok = read_wav(dir.path / "ok.wav");
  REQUIRE(ok.size() == 2);
  CHECK(ok.samples[0] == 0.5);
  CHECK(ok.samples[1] == -1.0);
}
