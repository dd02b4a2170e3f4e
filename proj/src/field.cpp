#include "depse/field.hpp"

#include <algorithm>
#include <cmath>

#include "depse/random.hpp"

namespace depse {

bool all_finite(const Spectrogram& s) {
  return std::all_of(s.begin(), s.end(), [](const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

bool all_finite(const RealField& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Spectrogram complex_noise(Shape shape, Rng& rng) {
  Spectrogram out(shape);
  for (auto& z : out) z = rng.complex_normal();
  return out;
}

}  // namespace depse
