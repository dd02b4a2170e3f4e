#include <doctest.h>

#include <cmath>
#include <vector>

#include "depse/schedule.hpp"
#include "support.hpp"

using namespace depse;

namespace {

// g(t) written out independently of the library.
double g_ref(const SdeParams& p, double t) {
  const double rho = p.sigma_max / p.sigma_min;
  return p.sigma_min * std::pow(rho, t) * std::sqrt(2.0 * std::log(rho));
}

double euler_variance(const SdeParams& p, double t_end, double dt) {
  double v = 0.0;
  const auto steps = static_cast<long>(std::llround(t_end / dt));
  for (long k = 0; k < steps; ++k) {
    const double g = g_ref(p, static_cast<double>(k) * dt);
    v += dt * (g * g - 2.0 * p.gamma * v);
  }
  return v;
}

SdeParams random_params(Rng& rng) {
  SdeParams p;
  p.gamma = rng.uniform(0.5, 3.0);
  p.sigma_min = rng.uniform(0.01, 0.1);
  p.sigma_max = rng.uniform(0.3, 1.0);
  p.t_eps = rng.uniform(0.01, 0.05);
  p.t_max = 1.0;
  p.steps = 10 + rng.index(50);
  return p;
}

}  // namespace

TEST_CASE("default schedule has 31 grid points spaced 0.97/30") {
  const DiffusionSchedule s = make_schedule({});
  REQUIRE(s.tau().size() == 31);
  CHECK(s.delta_tau() == doctest::Approx(0.97 / 30).epsilon(1e-14));
  CHECK(s.tau(0) == doctest::Approx(0.03));
  CHECK(s.tau(30) == doctest::Approx(1.0));
  for (std::size_t i = 1; i <= 30; ++i) {
    CHECK(s.tau(i) > s.tau(i - 1));
    CHECK(s.tau(i) - s.tau(i - 1) == doctest::Approx(s.delta_tau()).epsilon(1e-12));
    CHECK(s.g(i) > 0.0);
  }
}

TEST_CASE("g follows the geometric noise scale") {
  const SdeParams p;
  const DiffusionSchedule s(p);
  for (std::size_t i = 0; i <= p.steps; ++i)
    CHECK(s.g(i) == doctest::Approx(g_ref(p, s.tau(i))).epsilon(1e-13));
}

TEST_CASE("kernel variance vanishes at t = 0") {
  const DiffusionSchedule s({});
  CHECK(s.variance_at(0.0) == 0.0);
  CHECK(s.variance_at(1e-9) < 1e-10);
}

TEST_CASE("closed-form variance matches explicit Euler integration of the variance ODE") {
  const SdeParams p;
  const double exact = kernel_variance(p, 0.5);
  const double euler = euler_variance(p, 0.5, 1e-5);
  CHECK(std::abs(exact - euler) / exact < 1e-4);

  Rng rng(11);
  for (int n = 0; n < 3; ++n) {
    const SdeParams q = random_params(rng);
    const double e = kernel_variance(q, 0.5);
    CHECK(std::abs(e - euler_variance(q, 0.5, 1e-5)) / e < 1e-4);
  }
}

TEST_CASE("invalid parameters are rejected") {
  const auto bad = [](auto mutate) {
    SdeParams p;
    mutate(p);
    return p;
  };
  CHECK_THROWS_AS(make_schedule(bad([](SdeParams& p) { p.gamma = 0.0; })), ConfigError);
  CHECK_THROWS_AS(make_schedule(bad([](SdeParams& p) { p.sigma_min = 0.0; })), ConfigError);
  CHECK_THROWS_AS(make_schedule(bad([](SdeParams& p) { p.sigma_max = 0.01; })), ConfigError);
  CHECK_THROWS_AS(make_schedule(bad([](SdeParams& p) { p.t_eps = 1.0; })), ConfigError);
  CHECK_THROWS_AS(make_schedule(bad([](SdeParams& p) { p.t_eps = -0.1; })), ConfigError);
  CHECK_THROWS_AS(make_schedule(bad([](SdeParams& p) { p.steps = 0; })), ConfigError);
}

TEST_CASE("kernel_params") {
  const DiffusionSchedule s({});
  const KernelParams last = s.kernel_params(30);
  CHECK(last.decay == doctest::Approx(std::exp(-1.5)).epsilon(1e-14));
  CHECK(last.decay == doctest::Approx(0.2231).epsilon(1e-4));
  CHECK(last.sigma == s.sigma()[30]);
  CHECK_THROWS_AS(s.kernel_params(31), std::out_of_range);
  // t = 0 is off the grid; the closed forms give the identity kernel.
  CHECK(s.decay_at(0.0) == 1.0);
  CHECK(s.sigma_at(0.0) == 0.0);
  for (std::size_t i = 1; i <= 30; ++i) CHECK(s.decay(i) < s.decay(i - 1));
}

TEST_CASE("perturb at t = 0 is the identity and rejects times outside [0, T]") {
  const DiffusionSchedule s({});
  Rng rng(1);
  const Spectrogram s0 = test::random_spec({3, 2}, rng);
  CHECK(perturb(s0, 0.0, s, rng) == s0);
  CHECK_THROWS_AS(perturb(s0, -0.1, s, rng), ConfigError);
  CHECK_THROWS_AS(perturb(s0, 1.01, s, rng), ConfigError);
}

TEST_CASE("perturb moments match the kernel") {
  const DiffusionSchedule s({});
  Rng rng(2);
  const Spectrogram s0 = test::random_spec({2, 2}, rng);
  const double t = 0.5;
  const double decay = std::exp(-1.5 * t);
  const double var = kernel_variance({}, t);
  const int n = 10000;
  std::vector<cplx> sum(4);
  std::vector<double> sq_re(4), sq_im(4);
  for (int k = 0; k < n; ++k) {
    const Spectrogram d = perturb(s0, t, s, rng);
    for (std::size_t b = 0; b < 4; ++b) {
      const cplx e = d[b] - decay * s0[b];
      sum[b] += d[b];
      sq_re[b] += e.real() * e.real();
      sq_im[b] += e.imag() * e.imag();
    }
  }
  const double se = std::sqrt(var / 2.0 / n);
  for (std::size_t b = 0; b < 4; ++b) {
    const cplx mean = sum[b] / static_cast<double>(n);
    CHECK(std::abs(mean.real() - decay * s0[b].real()) < 4 * se);
    CHECK(std::abs(mean.imag() - decay * s0[b].imag()) < 4 * se);
    const double cvar = (sq_re[b] + sq_im[b]) / n;
    CHECK(std::abs(cvar - var) / var < 0.05);
    // circular symmetry: each part carries half
    CHECK(std::abs(sq_re[b] / n - var / 2) / (var / 2) < 0.06);
  }
}

TEST_CASE("perturb composes with two-stage OU algebra") {
  const SdeParams p;
  const DiffusionSchedule s(p);
  Rng rng(3);
  const Spectrogram s0 = test::random_spec({8, 1}, rng);
  const double t1 = 0.3, t = 0.7;
  const double d = std::exp(-p.gamma * (t - t1));
  const double extra = kernel_variance(p, t) - d * d * kernel_variance(p, t1);
  REQUIRE(extra > 0.0);
  const int n = 20000;
  std::vector<cplx> m1(8), m2(8);
  std::vector<double> v1(8), v2(8);
  for (int k = 0; k < n; ++k) {
    const Spectrogram a = perturb(s0, t, s, rng);
    Spectrogram b = perturb(s0, t1, s, rng);
    for (auto& v : b) v = d * v + std::sqrt(extra) * rng.complex_normal();
    for (std::size_t j = 0; j < 8; ++j) {
      m1[j] += a[j];
      m2[j] += b[j];
      v1[j] += std::norm(a[j]);
      v2[j] += std::norm(b[j]);
    }
  }
  for (std::size_t j = 0; j < 8; ++j) {
    const cplx a = m1[j] / double(n), b = m2[j] / double(n);
    const double va = v1[j] / n - std::norm(a), vb = v2[j] / n - std::norm(b);
    CHECK(std::abs(a - b) < 0.05 * std::max(std::abs(a), std::sqrt(va)));
    CHECK(std::abs(va - vb) / va < 0.05);
  }
}

TEST_CASE("pointwise variance-ODE residual is small on the default and random grids") {
  Rng rng(4);
  std::vector<SdeParams> configs{SdeParams{}};
  for (int k = 0; k < 5; ++k) configs.push_back(random_params(rng));
  for (const SdeParams& p : configs) {
    const DiffusionSchedule s(p);
    const OdeResidual r = pointwise_ode_residual(p, s.tau(), s.sigma());
    CHECK(r.relative() < 1e-3);
  }
}

TEST_CASE("grid-step ODE residual resolves on a fine grid") {
  SdeParams p;
  p.steps = 300;
  const DiffusionSchedule fine(p);
  CHECK(grid_ode_residual(p, fine.tau(), fine.sigma()).relative() < 1e-3);
  // At N = 30 the secant-vs-midpoint gap is truncation error of order dtau^2
  // (the worst interval moves slightly, hence the loose ratio).
  const DiffusionSchedule coarse({});
  const double r30 = grid_ode_residual({}, coarse.tau(), coarse.sigma()).relative();
  const double r300 = grid_ode_residual(p, fine.tau(), fine.sigma()).relative();
  CHECK(r30 / r300 == doctest::Approx(100.0).epsilon(0.1));
}

TEST_CASE("a corrupted sigma table fails the ODE residual") {
  const SdeParams p;
  const DiffusionSchedule s(p);
  std::vector<double> sigma(s.sigma().begin(), s.sigma().end());
  sigma[15] *= 1.01;
  const OdeResidual r = pointwise_ode_residual(p, s.tau(), sigma);
  CHECK(r.relative() > 1e-3);
  CHECK(r.worst_index == 15);
}
