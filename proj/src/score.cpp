#include "depse/score.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace depse {

namespace {

constexpr double kVarianceFloor = 1e-12;

double marginal_variance(double sigma2, double decay, double p0) {
  return std::max(sigma2 + decay * decay * p0, kVarianceFloor);
}

}  // namespace

void GaussianPrior::validate() const {
  require_same_shape(mean.shape(), variance.shape(), "GaussianPrior mean/variance");
  if (!all_finite(mean) || !all_finite(variance))
    throw ConfigError("GaussianPrior: non-finite parameters");
  for (double p : variance)
    if (p < 0.0) throw ConfigError("GaussianPrior: negative variance");
}

Shape GmmPrior::shape() const {
  return components.empty() ? Shape{} : components.front().shape();
}

void GmmPrior::validate() const {
  if (components.empty()) throw ConfigError("GmmPrior: empty mixture");
  if (weights.size() != components.size())
    throw ConfigError("GmmPrior: weights and components differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("GmmPrior: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("GmmPrior: weights must sum to 1");
  for (const auto& c : components) {
    c.validate();
    require_same_shape(c.shape(), shape(), "GmmPrior components");
  }
}

Spectrogram gaussian_score(const GaussianPrior& prior, const Spectrogram& state, double t,
                           const DiffusionSchedule& schedule) {
  require_same_shape(prior.shape(), state.shape(), "gaussian_score");
  const double decay = schedule.decay_at(t);
  const double sigma2 = schedule.variance_at(t);
  Spectrogram out(state.shape());
  for (std::size_t k = 0; k < state.size(); ++k) {
    const double var = marginal_variance(sigma2, decay, prior.variance[k]);
    out[k] = -(state[k] - decay * prior.mean[k]) / var;
  }
  return out;
}

double gaussian_log_marginal(const GaussianPrior& prior, const Spectrogram& state, double t,
                             const DiffusionSchedule& schedule) {
  require_same_shape(prior.shape(), state.shape(), "gaussian_log_marginal");
  const double decay = schedule.decay_at(t);
  const double sigma2 = schedule.variance_at(t);
  double acc = 0.0;
  for (std::size_t k = 0; k < state.size(); ++k) {
    const double var = marginal_variance(sigma2, decay, prior.variance[k]);
    acc -= std::norm(state[k] - decay * prior.mean[k]) / var + std::log(std::numbers::pi * var);
  }
  return acc;
}

namespace {

std::vector<double> gmm_responsibilities(const GmmPrior& prior, const Spectrogram& state,
                                         double t, const DiffusionSchedule& schedule) {
  if (prior.components.empty()) throw ConfigError("gmm_score: empty mixture");
  std::vector<double> logp(prior.components.size());
  for (std::size_t m = 0; m < logp.size(); ++m)
    logp[m] = std::log(prior.weights[m]) +
              gaussian_log_marginal(prior.components[m], state, t, schedule);
  const double top = *std::max_element(logp.begin(), logp.end());
  double norm = 0.0;
  for (double& l : logp) {
    l = std::exp(l - top);
    norm += l;
  }
  for (double& l : logp) l /= norm;
  return logp;
}

}  // namespace

Spectrogram gmm_score(const GmmPrior& prior, const Spectrogram& state, double t,
                      const DiffusionSchedule& schedule) {
  if (prior.components.empty()) throw ConfigError("gmm_score: empty mixture");
  require_same_shape(prior.shape(), state.shape(), "gmm_score");
  const auto resp = gmm_responsibilities(prior, state, t, schedule);
  const double decay = schedule.decay_at(t);
  const double sigma2 = schedule.variance_at(t);
  Spectrogram out(state.shape());
  for (std::size_t m = 0; m < resp.size(); ++m) {
    if (resp[m] == 0.0) continue;
    const auto& c = prior.components[m];
    for (std::size_t k = 0; k < state.size(); ++k) {
      const double var = marginal_variance(sigma2, decay, c.variance[k]);
      out[k] -= resp[m] * (state[k] - decay * c.mean[k]) / var;
    }
  }
  return out;
}

double gmm_log_marginal(const GmmPrior& prior, const Spectrogram& state, double t,
                        const DiffusionSchedule& schedule) {
  if (prior.components.empty()) throw ConfigError("gmm_log_marginal: empty mixture");
  std::vector<double> logp(prior.components.size());
  for (std::size_t m = 0; m < logp.size(); ++m)
    logp[m] = std::log(prior.weights[m]) +
              gaussian_log_marginal(prior.components[m], state, t, schedule);
  const double top = *std::max_element(logp.begin(), logp.end());
  double acc = 0.0;
  for (double l : logp) acc += std::exp(l - top);
  return top + std::log(acc);
}

GaussianScore::GaussianScore(GaussianPrior prior, const DiffusionSchedule& schedule)
    : prior_(std::move(prior)), schedule_(schedule) {
  prior_.validate();
}

Spectrogram GaussianScore::score(const Spectrogram& state, double t) const {
  return gaussian_score(prior_, state, t, schedule_);
}

GmmScore::GmmScore(GmmPrior prior, const DiffusionSchedule& schedule)
    : prior_(std::move(prior)), schedule_(schedule) {
  prior_.validate();
}

Spectrogram GmmScore::score(const Spectrogram& state, double t) const {
  return gmm_score(prior_, state, t, schedule_);
}

Spectrogram EchoScore::score(const Spectrogram& state, double) const {
  require_same_shape(shape_, state.shape(), "echo score");
  Spectrogram out(state.shape());
  for (std::size_t k = 0; k < state.size(); ++k) out[k] = -state[k];
  return out;
}

// ---------------------------------------------------------------------------
// Linear score model

LinearScoreModel::LinearScoreModel(Shape shape, std::vector<double> tau)
    : shape_(shape), tau_(std::move(tau)) {
  if (tau_.empty()) throw ConfigError("LinearScoreModel: empty time grid");
  slope_.assign(tau_.size(), RealField(shape_));
  offset_.assign(tau_.size(), Spectrogram(shape_));
}

LinearScoreModel LinearScoreModel::identity(Shape shape, const DiffusionSchedule& schedule) {
  LinearScoreModel m(shape, {schedule.tau().begin(), schedule.tau().end()});
  for (auto& a : m.slope_) std::fill(a.begin(), a.end(), -1.0);
  return m;
}

LinearScoreModel LinearScoreModel::analytic(const GaussianPrior& prior,
                                            const DiffusionSchedule& schedule) {
  prior.validate();
  LinearScoreModel m = identity(prior.shape(), schedule);
  for (std::size_t i = 0; i < m.num_times(); ++i) {
    const double decay = schedule.decay(i);
    const double sigma2 = schedule.sigma(i) * schedule.sigma(i);
    for (std::size_t k = 0; k < prior.mean.size(); ++k) {
      const double var = marginal_variance(sigma2, decay, prior.variance[k]);
      m.slope_[i][k] = -1.0 / var;
      m.offset_[i][k] = decay * prior.mean[k] / var;
    }
  }
  return m;
}

std::size_t LinearScoreModel::time_index(double t) const {
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  const auto it = std::lower_bound(tau_.begin(), tau_.end(), t - tol);
  if (it == tau_.end() || std::abs(*it - t) > tol) {
    std::ostringstream msg;
    msg << "LinearScoreModel: t = " << t << " is not a model grid time";
    throw ConfigError(msg.str());
  }
  return static_cast<std::size_t>(it - tau_.begin());
}

Spectrogram LinearScoreModel::score(const Spectrogram& state, double t) const {
  require_same_shape(shape_, state.shape(), "linear score");
  const std::size_t i = time_index(t);
  Spectrogram out(shape_);
  for (std::size_t k = 0; k < state.size(); ++k)
    out[k] = slope_[i][k] * state[k] + offset_[i][k];
  return out;
}

// ---------------------------------------------------------------------------
// Denoising score matching

namespace {

struct DsmPlan {
  std::vector<std::size_t> time;    // grid index per iteration, in 1..N
  std::vector<std::size_t> offset;  // batch start into perm
  std::vector<std::size_t> perm;
  std::vector<std::size_t> snapshot_at;  // iteration counts at which to snapshot
};

struct ValidationSet {
  std::vector<std::size_t> time;
  std::vector<std::size_t> sample;
  std::vector<Spectrogram> noise;
};

double validation_loss(const ValidationSet& val, std::span<const Spectrogram> samples,
                       const DiffusionSchedule& schedule, const std::vector<double>& slope,
                       const std::vector<cplx>& offset, std::size_t bins) {
  double acc = 0.0;
  for (std::size_t v = 0; v < val.time.size(); ++v) {
    const std::size_t i = val.time[v];
    const double sigma = schedule.sigma(i);
    const double decay = schedule.decay(i);
    const auto& s0 = samples[val.sample[v]];
    for (std::size_t k = 0; k < bins; ++k) {
      const cplx z = val.noise[v][k];
      const cplx st = decay * s0[k] + sigma * z;
      const cplx score = slope[i * bins + k] * st + offset[i * bins + k];
      acc += std::norm(sigma * score + z);
    }
  }
  return acc / static_cast<double>(val.time.size());
}

}  // namespace

DsmResult train_dsm(std::span<const Spectrogram> samples, const DiffusionSchedule& schedule,
                    LinearScoreModel model, const DsmOptions& opt) {
  if (samples.size() < 100) throw ConfigError("train_dsm: need at least 100 samples");
  if (opt.batch_size == 0 || opt.iterations == 0 || opt.epochs == 0)
    throw ConfigError("train_dsm: batch_size, iterations and epochs must be positive");
  if (!(opt.learning_rate > 0.0) || !(opt.decay_offset > 0.0))
    throw ConfigError("train_dsm: learning_rate and decay_offset must be positive");
  const Shape shape = model.shape();
  for (const auto& s : samples) require_same_shape(shape, s.shape(), "train_dsm sample");
  if (model.num_times() != schedule.steps() + 1)
    throw ConfigError("train_dsm: model grid does not match the schedule");

  const std::size_t bins = shape.size();
  const std::size_t times = model.num_times();
  const std::size_t n = samples.size();
  const std::size_t iters = opt.iterations;

  // Iteration plan and validation set come from one master stream; per-bin
  // perturbation noise comes from per-bin streams.
  Rng master(opt.seed);
  DsmPlan plan;
  plan.perm.resize(n);
  std::iota(plan.perm.begin(), plan.perm.end(), std::size_t{0});
  std::shuffle(plan.perm.begin(), plan.perm.end(), master.engine());
  plan.time.resize(iters);
  plan.offset.resize(iters);
  for (std::size_t k = 0; k < iters; ++k) {
    plan.time[k] = 1 + master.index(schedule.steps());
    plan.offset[k] = (k * opt.batch_size) % n;
  }
  for (std::size_t e = 1; e <= opt.epochs; ++e) plan.snapshot_at.push_back(e * iters / opt.epochs);

  ValidationSet val;
  for (std::size_t v = 0; v < opt.validation_size; ++v) {
    val.time.push_back(1 + master.index(schedule.steps()));
    val.sample.push_back(master.index(n));
    val.noise.push_back(complex_noise(shape, master));
  }

  // Centering constants decouple slope and offset in the curvature.
  std::vector<cplx> center(bins);
  for (const auto& s : samples)
    for (std::size_t k = 0; k < bins; ++k) center[k] += s[k];
  for (auto& c : center) c /= static_cast<double>(n);

  const std::size_t snapshots = plan.snapshot_at.size() + 1;
  std::vector<double> snap_slope(snapshots * times * bins);
  std::vector<cplx> snap_offset(snapshots * times * bins);
  std::atomic<bool> diverged{false};
  std::atomic<std::size_t> bad_bin{0}, bad_iter{0}, bad_time{0};

  const auto train_bin = [&](std::size_t k) {
    Rng rng = derive_stream(opt.seed, 1000003 + k);
    std::vector<double> a(times);
    std::vector<cplx> c(times);  // centered offset: S = a (s - e^{-gamma t} center) + c
    std::vector<double> curvature(times, 0.0);
    std::vector<std::size_t> count(times, 0);
    const auto store = [&](std::size_t snap) {
      for (std::size_t i = 0; i < times; ++i) {
        const std::size_t idx = (snap * times + i) * bins + k;
        snap_slope[idx] = a[i];
        snap_offset[idx] = c[i] - a[i] * schedule.decay(i) * center[k];
      }
    };
    for (std::size_t i = 0; i < times; ++i) {
      a[i] = model.slope(i)[k];
      c[i] = model.offset(i)[k] + a[i] * schedule.decay(i) * center[k];
    }
    store(0);
    std::size_t next_snap = 0;
    for (std::size_t it = 0; it < iters; ++it) {
      const std::size_t i = plan.time[it];
      const double sigma = schedule.sigma(i);
      const double decay = schedule.decay(i);
      const cplx shift = decay * center[k];
      double grad_a = 0.0;
      cplx grad_c = 0.0;
      double spread = 0.0;
      for (std::size_t j = 0; j < opt.batch_size; ++j) {
        const cplx s0 = samples[plan.perm[(plan.offset[it] + j) % n]][k];
        const cplx z = rng.complex_normal();
        const cplx centered = decay * s0 + sigma * z - shift;
        const cplx resid = sigma * (a[i] * centered + c[i]) + z;
        grad_a += 2.0 * sigma * (std::conj(centered) * resid).real();
        grad_c += 2.0 * sigma * resid;
        spread += std::norm(centered);
      }
      const double inv_b = 1.0 / static_cast<double>(opt.batch_size);
      grad_a *= inv_b;
      grad_c *= inv_b;
      const double h_a = 2.0 * sigma * sigma * spread * inv_b;
      const double h_c = 2.0 * sigma * sigma;
      ++count[i];
      curvature[i] += (h_a - curvature[i]) / static_cast<double>(count[i]);
      const double step = opt.learning_rate * opt.decay_offset /
                          (opt.decay_offset + static_cast<double>(count[i]) - 1.0);
      a[i] -= step * grad_a / std::max(curvature[i], 1e-300);
      c[i] -= step * grad_c / h_c;
      if (!std::isfinite(a[i]) || !std::isfinite(c[i].real()) || !std::isfinite(c[i].imag())) {
        if (!diverged.exchange(true)) {
          bad_bin = k;
          bad_iter = it;
          bad_time = i;
        }
        return;
      }
      if (next_snap < plan.snapshot_at.size() && it + 1 == plan.snapshot_at[next_snap]) {
        store(++next_snap);
      }
    }
  };

  const auto nbins = static_cast<std::ptrdiff_t>(bins);
  if (opt.policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < nbins; ++k) train_bin(static_cast<std::size_t>(k));
  } else {
    for (std::ptrdiff_t k = 0; k < nbins; ++k) train_bin(static_cast<std::size_t>(k));
  }

  if (diverged) {
    std::ostringstream msg;
    msg << "train_dsm: non-finite parameters at iteration " << bad_iter.load() << ", grid time "
        << bad_time.load() << ", bin " << bad_bin.load();
    throw NumericalError(msg.str());
  }

  DsmResult result{std::move(model), 0.0, {}};
  for (std::size_t snap = 0; snap < snapshots; ++snap) {
    std::vector<double> a(snap_slope.begin() + static_cast<std::ptrdiff_t>(snap * times * bins),
                          snap_slope.begin() + static_cast<std::ptrdiff_t>((snap + 1) * times * bins));
    std::vector<cplx> b(snap_offset.begin() + static_cast<std::ptrdiff_t>(snap * times * bins),
                        snap_offset.begin() + static_cast<std::ptrdiff_t>((snap + 1) * times * bins));
    result.validation_loss.push_back(validation_loss(val, samples, schedule, a, b, bins));
  }
  const std::size_t last = snapshots - 1;
  for (std::size_t i = 0; i < times; ++i)
    for (std::size_t k = 0; k < bins; ++k) {
      const std::size_t idx = (last * times + i) * bins + k;
      result.model.slope(i)[k] = snap_slope[idx];
      result.model.offset(i)[k] = snap_offset[idx];
    }
  result.final_loss = result.validation_loss.back();
  if (!std::isfinite(result.final_loss))
    throw NumericalError("train_dsm: non-finite validation loss");
  return result;
}

double dsm_loss(const ScoreModel& model, std::span<const Spectrogram> samples,
                const DiffusionSchedule& schedule, Rng& rng, std::size_t draws) {
  if (samples.empty() || draws == 0) throw ConfigError("dsm_loss: nothing to average");
  double acc = 0.0;
  std::size_t terms = 0;
  for (std::size_t i = 1; i <= schedule.steps(); ++i) {
    const double sigma = schedule.sigma(i);
    const double decay = schedule.decay(i);
    for (const auto& s0 : samples) {
      for (std::size_t d = 0; d < draws; ++d) {
        const Spectrogram z = complex_noise(s0.shape(), rng);
        Spectrogram st(s0.shape());
        for (std::size_t k = 0; k < st.size(); ++k) st[k] = decay * s0[k] + sigma * z[k];
        const Spectrogram score = model.score(st, schedule.tau(i));
        for (std::size_t k = 0; k < st.size(); ++k) acc += std::norm(sigma * score[k] + z[k]);
        ++terms;
      }
    }
  }
  return acc / static_cast<double>(terms);
}

}  // namespace depse
