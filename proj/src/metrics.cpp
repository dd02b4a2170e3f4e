#include "depse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "depse/error.hpp"

namespace depse {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

// Ratio in dB, clamped; a zero target reads as -cap.
double db(double num, double den) {
  if (num <= 0.0) return -kMetricCap;
  if (den <= 0.0) return kMetricCap;
  return std::clamp(10.0 * std::log10(num / den), -kMetricCap, kMetricCap);
}

void check_pair(std::span<const double> ref, std::span<const double> est) {
  if (ref.size() != est.size())
    throw ShapeError("metric inputs differ in length (" + std::to_string(ref.size()) + " vs " +
                     std::to_string(est.size()) + ")");
  if (ref.empty()) throw ShapeError("metric inputs are empty");
}

}  // namespace

double si_sdr(std::span<const double> ref, std::span<const double> est) {
  check_pair(ref, est);
  const double rr = dot(ref, ref);
  if (!(rr > 0.0)) throw NumericalError("si_sdr: reference is silent");
  const double a = dot(est, ref) / rr;
  double target = 0.0;
  double resid = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const double t = a * ref[k];
    target += t * t;
    resid += (est[k] - t) * (est[k] - t);
  }
  return db(target, resid);
}

BssScores bss_eval(std::span<const double> ref, std::span<const double> noise,
                   std::span<const double> est) {
  check_pair(ref, est);
  check_pair(ref, noise);
  const double rr = dot(ref, ref);
  const double nn = dot(noise, noise);
  if (!(rr > 0.0)) throw NumericalError("bss_eval: reference is silent");
  if (!(nn > 0.0)) throw NumericalError("bss_eval: noise is silent");

  const double c = dot(noise, ref) / rr;
  std::vector<double> perp(ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) perp[k] = noise[k] - c * ref[k];
  const double pp = dot(perp, perp);
  if (pp <= 1e-12 * nn) throw NumericalError("bss_eval: reference and noise are collinear");

  const double a = dot(est, ref) / rr;
  const double b = dot(est, perp) / pp;
  double e_target = 0.0, e_interf = 0.0, e_artif = 0.0, e_rest = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const double t = a * ref[k];
    const double i = b * perp[k];
    const double r = est[k] - t - i;
    e_target += t * t;
    e_interf += i * i;
    e_artif += r * r;
    e_rest += (est[k] - t) * (est[k] - t);
  }
  return {db(e_target, e_rest), db(e_target, e_interf), db(e_target, e_artif)};
}

}  // namespace depse
