#include "depse/kernels.hpp"

#include <string>

namespace depse {

ExecPolicy parse_exec_policy(std::string_view name) {
  if (name == "serial") return ExecPolicy::serial;
  if (name == "omp" || name == "parallel") return ExecPolicy::parallel;
  throw ConfigError("unknown kernel policy '" + std::string(name) + "' (serial|omp)");
}

std::string_view to_string(ExecPolicy policy) {
  return policy == ExecPolicy::serial ? "serial" : "omp";
}

namespace kernels {

void fuse_gaussians(ExecPolicy policy, std::span<const cplx> prior_mean, double prior_var,
                    std::span<const cplx> obs_mean, std::span<const double> obs_var,
                    std::span<cplx> out_mean, std::span<double> out_var) {
  if (obs_mean.size() != prior_mean.size() || obs_var.size() != prior_mean.size() ||
      out_mean.size() != prior_mean.size() || out_var.size() != prior_mean.size())
    throw ShapeError("fuse_gaussians: operand lengths differ");
  if (policy == ExecPolicy::parallel)
    omp::fuse_gaussians(prior_mean, prior_var, obs_mean, obs_var, out_mean, out_var);
  else
    serial::fuse_gaussians(prior_mean, prior_var, obs_mean, obs_var, out_mean, out_var);
}

void nmf_product(ExecPolicy policy, std::span<const double> w, std::span<const double> h,
                 std::span<double> out, NmfDims dims) {
  if (policy == ExecPolicy::parallel)
    omp::nmf_product(w, h, out, dims);
  else
    serial::nmf_product(w, h, out, dims);
}

void is_update_w(ExecPolicy policy, std::span<const double> v, std::span<double> w,
                 std::span<const double> h, std::span<const double> wh, NmfDims dims,
                 double floor) {
  if (policy == ExecPolicy::parallel)
    omp::is_update_w(v, w, h, wh, dims, floor);
  else
    serial::is_update_w(v, w, h, wh, dims, floor);
}

void is_update_h(ExecPolicy policy, std::span<const double> v, std::span<const double> w,
                 std::span<double> h, std::span<const double> wh, NmfDims dims, double floor) {
  if (policy == ExecPolicy::parallel)
    omp::is_update_h(v, w, h, wh, dims, floor);
  else
    serial::is_update_h(v, w, h, wh, dims, floor);
}

double is_divergence(ExecPolicy policy, std::span<const double> v, std::span<const double> wh,
                     std::size_t freqs, std::size_t frames) {
  return policy == ExecPolicy::parallel ? omp::is_divergence(v, wh, freqs, frames)
                                        : serial::is_divergence(v, wh, freqs, frames);
}

void stft_frames(ExecPolicy policy, std::span<const double> padded,
                 std::span<const double> window, FrameDims dims, std::span<cplx> out) {
  if (policy == ExecPolicy::parallel)
    omp::stft_frames(padded, window, dims, out);
  else
    serial::stft_frames(padded, window, dims, out);
}

void istft_frames(ExecPolicy policy, std::span<const cplx> spec, std::span<const double> window,
                  FrameDims dims, std::span<double> frames_out) {
  if (policy == ExecPolicy::parallel)
    omp::istft_frames(spec, window, dims, frames_out);
  else
    serial::istft_frames(spec, window, dims, frames_out);
}

}  // namespace kernels
}  // namespace depse
