#pragma once

#include <cstddef>
#include <span>

#include "depse/exec.hpp"
#include "depse/field.hpp"

// Data-parallel inner loops. Each kernel exists twice with one signature:
// kernels::serial (the reference) and kernels::omp. Every output element is
// produced by exactly one thread with the same operation order as the serial
// loop, and sums over rows are combined serially, so the two agree bit for bit.
namespace depse::kernels {

/// Geometry of a row-major F x K by K x L nonnegative factorization.
struct NmfDims {
  std::size_t freqs;
  std::size_t rank;
  std::size_t frames;
};

/// Framing of a padded real signal into windowed FFT frames.
struct FrameDims {
  std::size_t window;  // transform size == window length
  std::size_t hop;
  std::size_t frames;
};

inline constexpr double kVarianceFloor = 1e-12;

namespace serial {

/// Elementwise product of N_C(prior_mean, prior_var) and N_C(obs_mean, obs_var) as
/// densities in s. obs_var == 0 returns the observation exactly, obs_var == inf the prior.
void fuse_gaussians(std::span<const cplx> prior_mean, double prior_var,
                    std::span<const cplx> obs_mean, std::span<const double> obs_var,
                    std::span<cplx> out_mean, std::span<double> out_var);
/// out = W H
void nmf_product(std::span<const double> w, std::span<const double> h, std::span<double> out,
                 NmfDims dims);
/// Itakura-Saito multiplicative step on W (resp. H) given the current product WH.
void is_update_w(std::span<const double> v, std::span<double> w, std::span<const double> h,
                 std::span<const double> wh, NmfDims dims, double floor);
void is_update_h(std::span<const double> v, std::span<const double> w, std::span<double> h,
                 std::span<const double> wh, NmfDims dims, double floor);
/// sum V/WH - log(V/WH) - 1 over an F x L grid
double is_divergence(std::span<const double> v, std::span<const double> wh, std::size_t freqs,
                     std::size_t frames);
/// One-sided spectra of windowed frames; out is (window/2+1) x frames, row-major.
void stft_frames(std::span<const double> padded, std::span<const double> window,
                 FrameDims dims, std::span<cplx> out);
/// Inverse transform of every frame times the synthesis window; frames_out is
/// frames x window, row-major.
void istft_frames(std::span<const cplx> spec, std::span<const double> window, FrameDims dims,
                  std::span<double> frames_out);

}  // namespace serial

namespace omp {

void fuse_gaussians(std::span<const cplx> prior_mean, double prior_var,
                    std::span<const cplx> obs_mean, std::span<const double> obs_var,
                    std::span<cplx> out_mean, std::span<double> out_var);
void nmf_product(std::span<const double> w, std::span<const double> h, std::span<double> out,
                 NmfDims dims);
void is_update_w(std::span<const double> v, std::span<double> w, std::span<const double> h,
                 std::span<const double> wh, NmfDims dims, double floor);
void is_update_h(std::span<const double> v, std::span<const double> w, std::span<double> h,
                 std::span<const double> wh, NmfDims dims, double floor);
double is_divergence(std::span<const double> v, std::span<const double> wh, std::size_t freqs,
                     std::size_t frames);
void stft_frames(std::span<const double> padded, std::span<const double> window,
                 FrameDims dims, std::span<cplx> out);
void istft_frames(std::span<const cplx> spec, std::span<const double> window, FrameDims dims,
                  std::span<double> frames_out);

}  // namespace omp

// Dispatchers.
void fuse_gaussians(ExecPolicy policy, std::span<const cplx> prior_mean, double prior_var,
                    std::span<const cplx> obs_mean, std::span<const double> obs_var,
                    std::span<cplx> out_mean, std::span<double> out_var);
void nmf_product(ExecPolicy policy, std::span<const double> w, std::span<const double> h,
                 std::span<double> out, NmfDims dims);
void is_update_w(ExecPolicy policy, std::span<const double> v, std::span<double> w,
                 std::span<const double> h, std::span<const double> wh, NmfDims dims,
                 double floor);
void is_update_h(ExecPolicy policy, std::span<const double> v, std::span<const double> w,
                 std::span<double> h, std::span<const double> wh, NmfDims dims, double floor);
double is_divergence(ExecPolicy policy, std::span<const double> v, std::span<const double> wh,
                     std::size_t freqs, std::size_t frames);
void stft_frames(ExecPolicy policy, std::span<const double> padded,
                 std::span<const double> window, FrameDims dims, std::span<cplx> out);
void istft_frames(ExecPolicy policy, std::span<const cplx> spec, std::span<const double> window,
                  FrameDims dims, std::span<double> frames_out);

}  // namespace depse::kernels
