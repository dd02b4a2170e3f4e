#include <doctest.h>

#include <cmath>
#include <limits>

#include "depse/nmf.hpp"
#include "support.hpp"

using namespace depse;

namespace {

// Direct triple loop, independent of the kernels.
RealField product(const NmfNoiseModel& m) {
  RealField v(m.shape());
  for (std::size_t f = 0; f < m.freqs; ++f)
    for (std::size_t l = 0; l < m.frames; ++l) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m.rank; ++k) acc += m.w[f * m.rank + k] * m.h[k * m.frames + l];
      v(f, l) = acc;
    }
  return v;
}

double divergence(const RealField& v, const RealField& wh) {
  double d = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) d += v[k] / wh[k] - std::log(v[k] / wh[k]) - 1.0;
  return d;
}

RealField random_power(Shape shape, Rng& rng) {
  RealField v(shape);
  for (double& x : v) x = rng.uniform(0.01, 3.0) * rng.uniform(0.1, 1.0);
  return v;
}

}  // namespace

TEST_CASE("init shapes, scaling and determinism") {
  Rng a(7), b(7);
  const NmfNoiseModel m = nmf_init(255, 100, 4, a);
  CHECK(m.w.size() == 255 * 4);
  CHECK(m.h.size() == 4 * 100);
  const NmfNoiseModel n = nmf_init(255, 100, 4, b);
  CHECK(m.w == n.w);
  CHECK(m.h == n.h);

  double mean = 0.0;
  for (double x : noise_variance(m)) mean += x;
  CHECK(mean / (255 * 100) == doctest::Approx(1.0).epsilon(1e-12));

  Rng c(8);
  const NmfNoiseModel t = nmf_init(16, 10, 3, c, 0.37);
  mean = 0.0;
  for (double x : noise_variance(t)) mean += x;
  CHECK(mean / 160 == doctest::Approx(0.37).epsilon(1e-12));
  CHECK_THROWS_AS(nmf_init(0, 3, 1, c), ConfigError);
}

TEST_CASE("rank one with all-ones factors gives a constant variance") {
  NmfNoiseModel m{6, 1, 5, std::vector<double>(6, 1.0), std::vector<double>(5, 1.0)};
  for (double x : noise_variance(m)) CHECK(x == 1.0);
}

TEST_CASE("noise_variance matches a direct matrix product") {
  Rng rng(1);
  const NmfNoiseModel m = nmf_init(13, 17, 5, rng);
  const RealField a = noise_variance(m), b = product(m);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-14));
  CHECK(noise_variance(m, ExecPolicy::parallel) == a);
}

TEST_CASE("identity W with H = V reproduces V") {
  Rng rng(2);
  const std::size_t f = 5, l = 7;
  const RealField v = random_power({f, l}, rng);
  NmfNoiseModel m{f, f, l, std::vector<double>(f * f, 0.0), v.storage()};
  for (std::size_t i = 0; i < f; ++i) m.w[i * f + i] = 1.0;
  CHECK(noise_variance(m) == v);
}

TEST_CASE("IS divergence is non-increasing on 50 random instances") {
  Rng rng(3);
  for (int inst = 0; inst < 50; ++inst) {
    const Shape shape{3 + rng.index(20), 3 + rng.index(20)};
    const RealField v = random_power(shape, rng);
    NmfNoiseModel m = nmf_init(shape.freqs, shape.frames, 1 + rng.index(5), rng);
    double prev = divergence(v, product(m));
    for (int it = 0; it < 60; ++it) {
      nmf_update(v, m, 1);
      const double cur = divergence(v, product(m));
      CHECK(cur <= prev + 1e-10 * std::max(1.0, prev));
      prev = cur;
      for (double x : m.w) CHECK(x >= kNmfFloor);
      for (double x : m.h) CHECK(x >= kNmfFloor);
    }
  }
}

TEST_CASE("exact rank-K data is recovered") {
  Rng rng(4);
  for (std::size_t rank : {1u, 2u, 3u}) {
    const std::size_t f = 20, l = 30;
    NmfNoiseModel truth = nmf_init(f, l, rank, rng);
    const RealField v = noise_variance(truth);
    NmfNoiseModel m = nmf_init(f, l, rank, rng);
    double prev = is_divergence(v, m);
    for (int it = 0; it < 500; ++it) {
      nmf_update(v, m, 1);
      const double cur = is_divergence(v, m);
      CHECK(cur <= prev + 1e-10 * std::max(1.0, prev));
      prev = cur;
    }
    CHECK(prev < 1e-6 * f * l);
  }
}

TEST_CASE("constant V with rank one is a fixed point") {
  const double c = 0.8;
  const RealField v({4, 6}, c);
  NmfNoiseModel m{4, 1, 6, std::vector<double>(4, 2.0), std::vector<double>(6, c / 2.0)};
  nmf_update(v, m, 1);
  for (double x : noise_variance(m)) CHECK(std::abs(x - c) < 1e-12);
}

TEST_CASE("zero V drives WH to the floor without NaN") {
  Rng rng(5);
  const RealField v({5, 5}, 0.0);
  NmfNoiseModel m = nmf_init(5, 5, 2, rng);
  nmf_update(v, m, 200);
  for (double x : noise_variance(m)) {
    CHECK(std::isfinite(x));
    CHECK(x < 1e-6);
  }
  for (double x : m.w) CHECK(x >= kNmfFloor);
}

TEST_CASE("rescaling W and H leaves v unchanged") {
  Rng rng(6);
  NmfNoiseModel m{3, 2, 4, {1.0, 2.0, 0.5, 0.25, 4.0, 1.0}, {1, 2, 3, 4, 0.5, 0.5, 0.5, 0.5}};
  const RealField before = noise_variance(m);
  for (double& x : m.w) x *= 4.0;
  for (double& x : m.h) x *= 0.25;
  CHECK(noise_variance(m) == before);
}

TEST_CASE("non-finite or negative V is rejected") {
  Rng rng(7);
  NmfNoiseModel m = nmf_init(3, 3, 1, rng);
  RealField v({3, 3}, 1.0);
  v[4] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(nmf_update(v, m, 1), NumericalError);
  v[4] = -1.0;
  CHECK_THROWS_AS(nmf_update(v, m, 1), NumericalError);
  CHECK_THROWS_AS(nmf_update(RealField({2, 3}, 1.0), m, 1), ShapeError);
}

TEST_CASE("serial and parallel updates agree bit for bit") {
  Rng rng(8);
  const RealField v = random_power({40, 33}, rng);
  NmfNoiseModel a = nmf_init(40, 33, 4, rng);
  NmfNoiseModel b = a;
  nmf_update(v, a, 10, ExecPolicy::serial);
  nmf_update(v, b, 10, ExecPolicy::parallel);
  CHECK(a.w == b.w);
  CHECK(a.h == b.h);
}
