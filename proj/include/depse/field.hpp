#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "depse/error.hpp"

namespace depse {

using cplx = std::complex<double>;

/// Frequency-by-frame extent of a time-frequency array.
struct Shape {
  std::size_t freqs = 0;
  std::size_t frames = 0;

  std::size_t size() const { return freqs * frames; }
  bool operator==(const Shape&) const = default;
};

/// Dense F x L array stored row-major (index f * frames + l). The vectorized
/// form used by the samplers is exactly this storage order.
template <typename T>
class Field {
 public:
  Field() = default;
  explicit Field(Shape shape, T fill = T{})
      : shape_(shape), data_(shape.size(), fill) {}
  Field(Shape shape, std::vector<T> values)
      : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.size())
      throw ShapeError("field data length does not match its shape");
  }

  Shape shape() const { return shape_; }
  std::size_t freqs() const { return shape_.freqs; }
  std::size_t frames() const { return shape_.frames; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t f, std::size_t l) { return data_[f * shape_.frames + l]; }
  const T& operator()(std::size_t f, std::size_t l) const {
    return data_[f * shape_.frames + l];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool operator==(const Field&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Complex STFT-domain array; carries clean estimates and diffusion states.
using Spectrogram = Field<cplx>;
/// Nonnegative per-bin quantity (variances, powers).
using RealField = Field<double>;

inline void require_same_shape(Shape a, Shape b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string(what) + ": shape mismatch");
}

bool all_finite(const Spectrogram& s);
bool all_finite(const RealField& v);

}  // namespace depse
