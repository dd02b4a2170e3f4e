#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "depse/signal.hpp"

namespace depse {

static_assert(std::endian::native == std::endian::little, "WAV codec assumes little-endian host");

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t at) {
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::string& out, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  out.append(bytes, sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<char> buf((std::istreambuf_iterator<char>(in)), {});
  const auto fail = [&](const std::string& why) -> IoError {
    return IoError(path.string() + ": " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_at = 0, data_len = 0;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const std::size_t len = read_le<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (len < 16 || body + len > buf.size()) throw fail("malformed fmt chunk");
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible) {
        if (len < 40) throw fail("malformed extensible fmt chunk");
        format = read_le<std::uint16_t>(buf, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_len = std::min(len, buf.size() - body);
      if (data_len != len) throw fail("truncated data chunk");
      have_data = true;
      break;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (!have_data) throw fail("missing data chunk");
  if (channels != 1) throw fail("expected mono, found " + std::to_string(channels) + " channels");
  if (rate != kSampleRate)
    throw fail("sample rate " + std::to_string(rate) + " Hz is not supported (need 16000 Hz; resample first)");

  Waveform w;
  if (format == kFormatPcm && bits == 16) {
    w.samples.resize(data_len / 2);
    for (std::size_t k = 0; k < w.size(); ++k)
      w.samples[k] = read_le<std::int16_t>(buf, data_at + 2 * k) / 32768.0;
  } else if (format == kFormatFloat && bits == 32) {
    w.samples.resize(data_len / 4);
    for (std::size_t k = 0; k < w.size(); ++k)
      w.samples[k] = read_le<float>(buf, data_at + 4 * k);
  } else {
    throw fail("unsupported encoding (format " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits); need PCM16 or float32");
  }
  for (double v : w.samples)
    if (!std::isfinite(v)) throw fail("non-finite sample");
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w, SampleFormat format) {
  if (w.sample_rate != kSampleRate) throw IoError("write_wav: only 16 kHz is supported");
  const bool pcm = format == SampleFormat::pcm16;
  const std::uint16_t bytes = pcm ? 2 : 4;
  const auto data_len = static_cast<std::uint32_t>(w.size() * bytes);

  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_le<std::uint32_t>(out, 36 + data_len);
  out += "WAVEfmt ";
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, kSampleRate);
  put_le<std::uint32_t>(out, kSampleRate * bytes);
  put_le<std::uint16_t>(out, bytes);
  put_le<std::uint16_t>(out, bytes * 8);
  out += "data";
  put_le<std::uint32_t>(out, data_len);
  for (double v : w.samples) {
    if (!std::isfinite(v)) throw IoError("write_wav: non-finite sample");
    if (pcm) {
      const double q = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put_le<std::int16_t>(out, static_cast<std::int16_t>(q));
    } else {
      put_le<float>(out, static_cast<float>(v));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace depse
