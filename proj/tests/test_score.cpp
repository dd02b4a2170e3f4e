#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "depse/score.hpp"
#include "depse/synthetic.hpp"
#include "support.hpp"

using namespace depse;

namespace {

// Diffused marginal of one prior component, written out from the kernel.
double log_nc(cplx s, cplx m, double v) { return -std::norm(s - m) / v - std::log(std::numbers::pi * v); }

double log_marginal(const GaussianPrior& p, const Spectrogram& s, double t, const SdeParams& sde) {
  const double d = std::exp(-sde.gamma * t);
  const double s2 = kernel_variance(sde, t);
  double acc = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k)
    acc += log_nc(s[k], d * p.mean[k], s2 + d * d * p.variance[k]);
  return acc;
}

double log_mixture(const GmmPrior& g, const Spectrogram& s, double t, const SdeParams& sde) {
  std::vector<double> terms;
  for (std::size_t m = 0; m < g.weights.size(); ++m)
    terms.push_back(std::log(g.weights[m]) + log_marginal(g.components[m], s, t, sde));
  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double x : terms) acc += std::exp(x - top);
  return top + std::log(acc);
}

// Conjugate gradient (d/dre + i d/dim)/2 by central differences.
template <typename F>
Spectrogram fd_gradient(const Spectrogram& s, F logp, double h) {
  Spectrogram out(s.shape());
  for (std::size_t k = 0; k < s.size(); ++k) {
    Spectrogram a = s, b = s;
    a[k] += cplx(h, 0);
    b[k] -= cplx(h, 0);
    const double dre = (logp(a) - logp(b)) / (2 * h);
    a = s;
    b = s;
    a[k] += cplx(0, h);
    b[k] -= cplx(0, h);
    const double dim = (logp(a) - logp(b)) / (2 * h);
    out[k] = 0.5 * cplx(dre, dim);
  }
  return out;
}

double rel_err(const Spectrogram& got, const Spectrogram& want) {
  double worst = 0.0;
  for (std::size_t k = 0; k < got.size(); ++k)
    worst = std::max(worst, std::abs(got[k] - want[k]) / std::max(std::abs(want[k]), 1e-3));
  return worst;
}

GmmPrior random_mixture(Shape shape, std::size_t m, Rng& rng) {
  GmmPrior g;
  double total = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    g.components.push_back(random_gaussian_prior(shape, rng));
    g.weights.push_back(rng.uniform(0.2, 1.0));
    total += g.weights.back();
  }
  for (double& w : g.weights) w /= total;
  return g;
}

}  // namespace

TEST_CASE("gaussian score vanishes at the diffused mean") {
  const SdeParams sde;
  const DiffusionSchedule s(sde);
  Rng rng(1);
  const GaussianPrior p = random_gaussian_prior({3, 3}, rng);
  for (double t : {0.1, 0.5, 1.0}) {
    Spectrogram mode(p.shape());
    for (std::size_t k = 0; k < mode.size(); ++k) mode[k] = std::exp(-sde.gamma * t) * p.mean[k];
    const Spectrogram sc = gaussian_score(p, mode, t, s);
    for (const cplx& v : sc) CHECK(std::abs(v) < 1e-12);
  }
}

TEST_CASE("point-mass prior at zero gives the kernel score -s / sigma^2") {
  const DiffusionSchedule s({});
  const GaussianPrior p{Spectrogram({1, 2}), RealField({1, 2}, 0.0)};
  Spectrogram st({1, 2});
  st[0] = {1.0, 0.0};
  st[1] = {-0.3, 0.7};
  const double t = 0.6;
  const Spectrogram sc = gaussian_score(p, st, t, s);
  const double var = s.variance_at(t);
  CHECK(std::abs(sc[0] * var - cplx(-1.0, 0.0)) < 1e-12);
  CHECK(std::abs(sc[1] * var + st[1]) < 1e-12);
}

TEST_CASE("gaussian score matches finite differences of the log marginal at every grid time") {
  const SdeParams sde;
  const DiffusionSchedule s(sde);
  Rng rng(2);
  for (std::size_t i = 0; i <= s.steps(); ++i) {
    const GaussianPrior p = random_gaussian_prior({2, 2}, rng);
    const Spectrogram st = test::random_spec({2, 2}, rng, 1.5);
    const double t = s.tau(i);
    const auto logp = [&](const Spectrogram& z) { return log_marginal(p, z, t, sde); };
    CHECK(rel_err(gaussian_score(p, st, t, s), fd_gradient(st, logp, 1e-4)) < 1e-4);
    CHECK(gaussian_log_marginal(p, st, t, s) == doctest::Approx(logp(st)).epsilon(1e-12));
  }
}

TEST_CASE("gmm score matches finite differences at every grid time") {
  const SdeParams sde;
  const DiffusionSchedule s(sde);
  Rng rng(3);
  for (std::size_t i = 0; i <= s.steps(); ++i) {
    const GmmPrior g = random_mixture({2, 2}, 3, rng);
    const Spectrogram st = test::random_spec({2, 2}, rng, 1.5);
    const double t = s.tau(i);
    const auto logp = [&](const Spectrogram& z) { return log_mixture(g, z, t, sde); };
    CHECK(rel_err(gmm_score(g, st, t, s), fd_gradient(st, logp, 1e-4)) < 1e-4);
  }
}

TEST_CASE("single-component mixture reduces to the gaussian score") {
  const DiffusionSchedule s({});
  Rng rng(4);
  const GaussianPrior p = random_gaussian_prior({3, 4}, rng);
  const GmmPrior g{{1.0}, {p}};
  const Spectrogram st = test::random_spec({3, 4}, rng);
  CHECK(test::max_abs_diff(gmm_score(g, st, 0.4, s), gaussian_score(p, st, 0.4, s)) < 1e-12);
}

TEST_CASE("symmetric mixture has zero score at the origin") {
  const DiffusionSchedule s({});
  const Shape shape{2, 3};
  Rng rng(5);
  const Spectrogram m = test::random_spec(shape, rng);
  Spectrogram neg(shape);
  for (std::size_t k = 0; k < shape.size(); ++k) neg[k] = -m[k];
  const RealField var(shape, 0.2);
  const GmmPrior g{{0.5, 0.5}, {GaussianPrior{m, var}, GaussianPrior{neg, var}}};
  for (const cplx& v : gmm_score(g, Spectrogram(shape), 0.3, s)) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("gmm score is continuous in the weights") {
  const DiffusionSchedule s({});
  Rng rng(6);
  GmmPrior g = random_mixture({2, 2}, 3, rng);
  const Spectrogram st = test::random_spec({2, 2}, rng);
  const Spectrogram base = gmm_score(g, st, 0.2, s);
  double prev_ratio = 0.0;
  for (double eps : {1e-4, 1e-6}) {
    GmmPrior q = g;
    q.weights[0] += eps;
    q.weights[1] -= eps;
    const double change = test::max_abs_diff(gmm_score(q, st, 0.2, s), base);
    const double ratio = change / eps;
    CHECK(ratio < 1e3);
    if (prev_ratio > 0.0) CHECK(ratio == doctest::Approx(prev_ratio).epsilon(0.01));
    prev_ratio = ratio;
  }
}

TEST_CASE("prior validation") {
  const DiffusionSchedule s({});
  GmmPrior empty;
  CHECK_THROWS(empty.validate());
  Rng rng(7);
  GmmPrior bad = random_mixture({2, 2}, 2, rng);
  bad.weights[0] += 1e-6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  GaussianPrior neg = random_gaussian_prior({2, 2}, rng);
  neg.variance[0] = -1.0;
  CHECK_THROWS(neg.validate());
  const GaussianPrior p = random_gaussian_prior({2, 2}, rng);
  CHECK_THROWS_AS(gaussian_score(p, Spectrogram({2, 3}), 0.1, s), ShapeError);
  GmmPrior mixed{{0.5, 0.5}, {p, random_gaussian_prior({3, 2}, rng)}};
  CHECK_THROWS(mixed.validate());
}

TEST_CASE("analytic linear model reproduces the gaussian score on the grid") {
  const DiffusionSchedule s({});
  Rng rng(8);
  const GaussianPrior p = random_gaussian_prior({2, 3}, rng);
  const LinearScoreModel lin = LinearScoreModel::analytic(p, s);
  for (std::size_t i = 0; i <= s.steps(); ++i) {
    const Spectrogram st = test::random_spec({2, 3}, rng);
    CHECK(test::max_abs_diff(lin.score(st, s.tau(i)), gaussian_score(p, st, s.tau(i), s)) < 1e-10);
  }
  CHECK_THROWS_AS(lin.score(Spectrogram({2, 3}), 0.5 * (s.tau(3) + s.tau(4))), ConfigError);
}

TEST_CASE("echo score is the unit-gaussian score") {
  Rng rng(9);
  const Spectrogram st = test::random_spec({2, 2}, rng);
  const Spectrogram sc = EchoScore({2, 2}).score(st, 0.5);
  for (std::size_t k = 0; k < st.size(); ++k) CHECK(sc[k] == -st[k]);
}

namespace {

std::vector<Spectrogram> draw_samples(const GaussianPrior& p, std::size_t n, Rng& rng) {
  std::vector<Spectrogram> out;
  for (std::size_t j = 0; j < n; ++j) {
    Spectrogram s(p.shape());
    for (std::size_t k = 0; k < s.size(); ++k)
      s[k] = p.mean[k] + std::sqrt(p.variance[k]) * rng.complex_normal();
    out.push_back(std::move(s));
  }
  return out;
}

// Irreducible DSM loss E|zeta - E[zeta | s_t]|^2 summed over bins, averaged over tau_1..tau_N.
double loss_floor(const GaussianPrior& p, const DiffusionSchedule& s) {
  double acc = 0.0;
  for (std::size_t i = 1; i <= s.steps(); ++i) {
    const double s2 = s.sigma(i) * s.sigma(i);
    const double d = s.decay(i);
    for (double p0 : p.variance) acc += 1.0 - s2 / (s2 + d * d * p0);
  }
  return acc / static_cast<double>(s.steps());
}

}  // namespace

TEST_CASE("DSM loss at the analytic optimum equals the irreducible floor") {
  const DiffusionSchedule s({});
  Rng rng(10);
  const GaussianPrior p = random_gaussian_prior({2, 2}, rng);
  const auto samples = draw_samples(p, 400, rng);
  const LinearScoreModel opt = LinearScoreModel::analytic(p, s);
  const double mc = dsm_loss(opt, samples, s, rng, 4);
  CHECK(std::abs(mc - loss_floor(p, s)) / loss_floor(p, s) < 0.05);
  // Any other model does worse.
  CHECK(dsm_loss(LinearScoreModel::identity({2, 2}, s), samples, s, rng, 4) > mc);
}

TEST_CASE("train_dsm on a small problem approaches the analytic coefficients") {
  const DiffusionSchedule s({});
  Rng rng(11);
  const GaussianPrior p = random_gaussian_prior({1, 2}, rng);
  const auto samples = draw_samples(p, 2000, rng);
  DsmOptions opt;
  opt.iterations = 6000;
  opt.seed = 5;
  const DsmResult r = train_dsm(samples, s, LinearScoreModel::identity({1, 2}, s), opt);
  const LinearScoreModel exact = LinearScoreModel::analytic(p, s);
  double worst = 0.0;
  for (std::size_t i = 1; i <= s.steps(); ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      worst = std::max(worst, std::abs(r.model.slope(i)[k] / exact.slope(i)[k] - 1.0));
      worst = std::max(worst, std::abs(r.model.offset(i)[k] - exact.offset(i)[k]) /
                                  std::abs(exact.offset(i)[k]));
    }
  CHECK(worst < 0.15);

  SUBCASE("validation loss is non-increasing across epochs within 2%") {
    for (std::size_t e = 1; e < r.validation_loss.size(); ++e)
      CHECK(r.validation_loss[e] <= r.validation_loss[e - 1] * 1.02);
  }
}

TEST_CASE("train_dsm with a point-mass prior approaches the kernel score") {
  const DiffusionSchedule s({});
  Rng rng(12);
  GaussianPrior p = random_gaussian_prior({1, 1}, rng);
  p.variance[0] = 0.0;
  const std::vector<Spectrogram> samples(500, p.mean);
  DsmOptions opt;
  opt.iterations = 6000;
  const DsmResult r = train_dsm(samples, s, LinearScoreModel::identity({1, 1}, s), opt);
  for (std::size_t i = 1; i <= s.steps(); ++i) {
    const double s2 = s.sigma(i) * s.sigma(i);
    CHECK(r.model.slope(i)[0] * s2 == doctest::Approx(-1.0).epsilon(0.15));
  }
}

TEST_CASE("train_dsm is independent of the execution policy") {
  const DiffusionSchedule s({});
  Rng rng(13);
  const GaussianPrior p = random_gaussian_prior({2, 2}, rng);
  const auto samples = draw_samples(p, 200, rng);
  DsmOptions opt;
  opt.iterations = 500;
  opt.policy = ExecPolicy::serial;
  const DsmResult a = train_dsm(samples, s, LinearScoreModel::identity({2, 2}, s), opt);
  opt.policy = ExecPolicy::parallel;
  const DsmResult b = train_dsm(samples, s, LinearScoreModel::identity({2, 2}, s), opt);
  for (std::size_t i = 0; i <= s.steps(); ++i) {
    CHECK(a.model.slope(i) == b.model.slope(i));
    CHECK(a.model.offset(i) == b.model.offset(i));
  }
}

TEST_CASE("train_dsm rejects bad inputs and reports divergence") {
  const DiffusionSchedule s({});
  Rng rng(14);
  const GaussianPrior p = random_gaussian_prior({1, 1}, rng);
  const auto few = draw_samples(p, 50, rng);
  CHECK_THROWS_AS(train_dsm(few, s, LinearScoreModel::identity({1, 1}, s), {}), ConfigError);
  const auto samples = draw_samples(p, 200, rng);
  DsmOptions wild;
  wild.iterations = 2000;
  wild.learning_rate = 1e6;
  CHECK_THROWS_AS(train_dsm(samples, s, LinearScoreModel::identity({1, 1}, s), wild),
                  NumericalError);
}
