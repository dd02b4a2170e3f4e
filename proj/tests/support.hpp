#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "depse/field.hpp"
#include "depse/random.hpp"

namespace test {

using depse::cplx;

inline double max_abs_diff(const depse::Spectrogram& a, const depse::Spectrogram& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline depse::Spectrogram random_spec(depse::Shape shape, depse::Rng& rng, double scale = 1.0) {
  depse::Spectrogram s(shape);
  for (auto& v : s) v = cplx(rng.uniform(-scale, scale), rng.uniform(-scale, scale));
  return s;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace test
