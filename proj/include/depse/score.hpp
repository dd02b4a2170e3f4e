#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "depse/exec.hpp"
#include "depse/field.hpp"
#include "depse/schedule.hpp"

namespace depse {

/// Evaluable score map (s_t, t) -> grad log p_t(s_t), conjugate (Wirtinger)
/// convention: for N_C(m, v) the score is -(s - m) / v.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual Spectrogram score(const Spectrogram& state, double t) const = 0;
  virtual Shape shape() const = 0;
};

/// s_0 ~ N_C(mean, diag(variance)).
struct GaussianPrior {
  Spectrogram mean;
  RealField variance;

  Shape shape() const { return mean.shape(); }
  void validate() const;
};

struct GmmPrior {
  std::vector<double> weights;
  std::vector<GaussianPrior> components;

  Shape shape() const;
  void validate() const;
};

/// Exact marginal score of the OU-diffused Gaussian prior:
/// -(s_t - e^{-gamma t} mu0) / (sigma_t^2 + e^{-2 gamma t} p0).
Spectrogram gaussian_score(const GaussianPrior& prior, const Spectrogram& state, double t,
                           const DiffusionSchedule& schedule);

/// Exact score of the OU-diffused mixture: responsibility-weighted component
/// scores, responsibilities from log-sum-exp over whole-field log densities.
Spectrogram gmm_score(const GmmPrior& prior, const Spectrogram& state, double t,
                      const DiffusionSchedule& schedule);

/// Log density of N_C(e^{-gamma t} mu0, sigma_t^2 + e^{-2 gamma t} p0), summed over bins.
double gaussian_log_marginal(const GaussianPrior& prior, const Spectrogram& state, double t,
                             const DiffusionSchedule& schedule);
double gmm_log_marginal(const GmmPrior& prior, const Spectrogram& state, double t,
                        const DiffusionSchedule& schedule);

class GaussianScore final : public ScoreModel {
 public:
  GaussianScore(GaussianPrior prior, const DiffusionSchedule& schedule);
  Spectrogram score(const Spectrogram& state, double t) const override;
  Shape shape() const override { return prior_.shape(); }
  const GaussianPrior& prior() const { return prior_; }

 private:
  GaussianPrior prior_;
  DiffusionSchedule schedule_;
};

class GmmScore final : public ScoreModel {
 public:
  GmmScore(GmmPrior prior, const DiffusionSchedule& schedule);
  Spectrogram score(const Spectrogram& state, double t) const override;
  Shape shape() const override { return prior_.shape(); }
  const GmmPrior& prior() const { return prior_; }

 private:
  GmmPrior prior_;
  DiffusionSchedule schedule_;
};

/// Unit-Gaussian score -s of any shape; the wire-protocol echo model.
class EchoScore final : public ScoreModel {
 public:
  explicit EchoScore(Shape shape) : shape_(shape) {}
  Spectrogram score(const Spectrogram& state, double t) const override;
  Shape shape() const override { return shape_; }

 private:
  Shape shape_;
};

/// Per-time linear score S(s, tau_i) = a_i * s + b_i with real a_i and complex
/// b_i per bin, one pair for every grid time tau_0..tau_N. Queries must hit a
/// grid time.
class LinearScoreModel final : public ScoreModel {
 public:
  LinearScoreModel(Shape shape, std::vector<double> tau);
  /// Starts every time at the unit-Gaussian score (a = -1, b = 0).
  static LinearScoreModel identity(Shape shape, const DiffusionSchedule& schedule);
  /// Exact DSM minimizer for Gaussian data: a = -1/P, b = e^{-gamma tau} mu0 / P with
  /// P = sigma^2 + e^{-2 gamma tau} p0.
  static LinearScoreModel analytic(const GaussianPrior& prior,
                                   const DiffusionSchedule& schedule);

  Spectrogram score(const Spectrogram& state, double t) const override;
  Shape shape() const override { return shape_; }

  std::size_t num_times() const { return tau_.size(); }
  std::span<const double> tau() const { return tau_; }
  std::size_t time_index(double t) const;

  RealField& slope(std::size_t i) { return slope_.at(i); }
  const RealField& slope(std::size_t i) const { return slope_.at(i); }
  Spectrogram& offset(std::size_t i) { return offset_.at(i); }
  const Spectrogram& offset(std::size_t i) const { return offset_.at(i); }

 private:
  Shape shape_;
  std::vector<double> tau_;
  std::vector<RealField> slope_;
  std::vector<Spectrogram> offset_;
};

struct DsmOptions {
  std::size_t iterations = 30000;  // one minibatch at one grid time per iteration
  std::size_t batch_size = 256;
  /// Step size multiplier on the curvature-normalized gradient.
  double learning_rate = 1.0;
  /// Harmonic decay horizon k0: the k-th update of a given time uses
  /// learning_rate * k0 / (k0 + k - 1).
  double decay_offset = 1.0;
  std::size_t epochs = 10;  // validation snapshots
  std::size_t validation_size = 512;
  std::uint64_t seed = 1;
  ExecPolicy policy = ExecPolicy::parallel;
};

struct DsmResult {
  LinearScoreModel model;
  double final_loss = 0.0;
  std::vector<double> validation_loss;  // one entry per epoch boundary, incl. initial
};

/// Denoising score matching E_{t, s, zeta} || sigma_t S(s_t, t) + zeta ||^2 over
/// t uniform on tau_1..tau_N, minimized by minibatch SGD on (a, b). Bins and
/// times are independent parameters, so bins are trained concurrently, each
/// with its own noise stream; results do not depend on the thread count.
DsmResult train_dsm(std::span<const Spectrogram> samples, const DiffusionSchedule& schedule,
                    LinearScoreModel model, const DsmOptions& options);

/// Monte-Carlo DSM objective averaged over grid times tau_1..tau_N, with
/// `draws` perturbations per (time, sample).
double dsm_loss(const ScoreModel& model, std::span<const Spectrogram> samples,
                const DiffusionSchedule& schedule, Rng& rng, std::size_t draws = 1);

}  // namespace depse
