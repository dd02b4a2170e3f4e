#include <algorithm>
#include <cstddef>
#include <vector>

#include "depse/kernels.hpp"
#include "fft.hpp"
#include "kernel_math.hpp"

namespace depse::kernels::omp {

namespace {
using index_t = std::ptrdiff_t;
}

void fuse_gaussians(std::span<const cplx> prior_mean, double prior_var,
                    std::span<const cplx> obs_mean, std::span<const double> obs_var,
                    std::span<cplx> out_mean, std::span<double> out_var) {
  const auto n = static_cast<index_t>(prior_mean.size());
#pragma omp parallel for schedule(static)
  for (index_t k = 0; k < n; ++k)
    detail::fuse_one(prior_mean[k], prior_var, obs_mean[k], obs_var[k], out_mean[k], out_var[k]);
}

void nmf_product(std::span<const double> w, std::span<const double> h, std::span<double> out,
                 NmfDims d) {
  const auto freqs = static_cast<index_t>(d.freqs);
#pragma omp parallel for schedule(static)
  for (index_t f = 0; f < freqs; ++f)
    for (std::size_t l = 0; l < d.frames; ++l) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d.rank; ++k) acc += w[f * d.rank + k] * h[k * d.frames + l];
      out[f * d.frames + l] = acc;
    }
}

void is_update_w(std::span<const double> v, std::span<double> w, std::span<const double> h,
                 std::span<const double> wh, NmfDims d, double floor) {
  const auto freqs = static_cast<index_t>(d.freqs);
#pragma omp parallel for schedule(static)
  for (index_t f = 0; f < freqs; ++f)
    for (std::size_t k = 0; k < d.rank; ++k) {
      double num = 0.0;
      double den = 0.0;
      for (std::size_t l = 0; l < d.frames; ++l) {
        const double inv = 1.0 / wh[f * d.frames + l];
        num += v[f * d.frames + l] * inv * inv * h[k * d.frames + l];
        den += inv * h[k * d.frames + l];
      }
      w[f * d.rank + k] = std::max(w[f * d.rank + k] * num / den, floor);
    }
}

void is_update_h(std::span<const double> v, std::span<const double> w, std::span<double> h,
                 std::span<const double> wh, NmfDims d, double floor) {
  const auto cells = static_cast<index_t>(d.rank * d.frames);
#pragma omp parallel for schedule(static)
  for (index_t idx = 0; idx < cells; ++idx) {
    const std::size_t k = static_cast<std::size_t>(idx) / d.frames;
    const std::size_t l = static_cast<std::size_t>(idx) % d.frames;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t f = 0; f < d.freqs; ++f) {
      const double inv = 1.0 / wh[f * d.frames + l];
      num += w[f * d.rank + k] * v[f * d.frames + l] * inv * inv;
      den += w[f * d.rank + k] * inv;
    }
    h[k * d.frames + l] = std::max(h[k * d.frames + l] * num / den, floor);
  }
}

double is_divergence(std::span<const double> v, std::span<const double> wh, std::size_t freqs,
                     std::size_t frames) {
  std::vector<double> rows(freqs, 0.0);
  const auto nf = static_cast<index_t>(freqs);
#pragma omp parallel for schedule(static)
  for (index_t f = 0; f < nf; ++f) {
    double acc = 0.0;
    for (std::size_t l = 0; l < frames; ++l)
      acc += detail::is_term(v[f * frames + l], wh[f * frames + l]);
    rows[f] = acc;
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

void stft_frames(std::span<const double> padded, std::span<const double> window, FrameDims d,
                 std::span<cplx> out) {
  const auto& fft = depse::detail::RealFft::get(d.window);
  const std::size_t bins = d.window / 2 + 1;
  const auto frames = static_cast<index_t>(d.frames);
#pragma omp parallel
  {
    std::vector<double> buf(d.window);
    std::vector<cplx> spec(bins);
#pragma omp for schedule(static)
    for (index_t l = 0; l < frames; ++l) {
      const double* src = padded.data() + static_cast<std::size_t>(l) * d.hop;
      for (std::size_t m = 0; m < d.window; ++m) buf[m] = src[m] * window[m];
      fft.forward(buf.data(), spec.data());
      for (std::size_t k = 0; k < bins; ++k) out[k * d.frames + l] = spec[k];
    }
  }
}

void istft_frames(std::span<const cplx> spec, std::span<const double> window, FrameDims d,
                  std::span<double> frames_out) {
  const auto& fft = depse::detail::RealFft::get(d.window);
  const std::size_t bins = d.window / 2 + 1;
  const auto frames = static_cast<index_t>(d.frames);
#pragma omp parallel
  {
    std::vector<cplx> col(bins);
#pragma omp for schedule(static)
    for (index_t l = 0; l < frames; ++l) {
      for (std::size_t k = 0; k < bins; ++k) col[k] = spec[k * d.frames + l];
      double* dst = frames_out.data() + static_cast<std::size_t>(l) * d.window;
      fft.inverse(col.data(), dst);
      for (std::size_t m = 0; m < d.window; ++m) dst[m] *= window[m];
    }
  }
}

}  // namespace depse::kernels::omp
