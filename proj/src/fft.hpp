#pragma once

#include <complex>
#include <cstddef>

namespace depse::detail {

/// Real-input DFT of fixed length backed by FFTW. Plans are created once per
/// length under a lock; execution is reentrant and may be called concurrently.
class RealFft {
 public:
  static const RealFft& get(std::size_t n);

  std::size_t size() const { return n_; }
  /// out[0..n/2] = sum_m in[m] e^{-2 pi i k m / n}
  void forward(const double* in, std::complex<double>* out) const;
  /// Inverse of forward including the 1/n factor; reads n/2+1 bins.
  void inverse(const std::complex<double>* in, double* out) const;

 private:
  explicit RealFft(std::size_t n);
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace depse::detail
