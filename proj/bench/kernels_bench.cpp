#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "depse/kernels.hpp"
#include "depse/random.hpp"

using namespace depse;
namespace k = depse::kernels;

namespace {

std::vector<double> positive(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(0.1, 2.0);
  return v;
}

// 256 bins, rank 8, ~8 s of audio at hop 128.
constexpr k::NmfDims kNmf{256, 8, 1000};

template <ExecPolicy P>
void nmf_iteration(benchmark::State& state) {
  Rng rng(1);
  const auto v = positive(kNmf.freqs * kNmf.frames, rng);
  auto w = positive(kNmf.freqs * kNmf.rank, rng);
  auto h = positive(kNmf.rank * kNmf.frames, rng);
  std::vector<double> wh(v.size());
  for (auto _ : state) {
    k::nmf_product(P, w, h, wh, kNmf);
    k::is_update_h(P, v, w, h, wh, kNmf, 1e-12);
    k::nmf_product(P, w, h, wh, kNmf);
    k::is_update_w(P, v, w, h, wh, kNmf, 1e-12);
    benchmark::DoNotOptimize(w.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(v.size()));
}

template <ExecPolicy P>
void fusion(benchmark::State& state) {
  Rng rng(2);
  const std::size_t n = 256 * 1000;
  std::vector<cplx> prior(n), obs(n), out(n);
  for (std::size_t j = 0; j < n; ++j) {
    prior[j] = rng.complex_normal();
    obs[j] = rng.complex_normal();
  }
  const auto obs_var = positive(n, rng);
  std::vector<double> out_var(n);
  for (auto _ : state) {
    k::fuse_gaussians(P, prior, 0.3, obs, obs_var, out, out_var);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}

template <ExecPolicy P>
void stft(benchmark::State& state) {
  const k::FrameDims dims{510, 128, 1000};
  Rng rng(3);
  std::vector<double> padded((dims.frames - 1) * dims.hop + dims.window);
  for (double& x : padded) x = rng.normal();
  std::vector<double> window(dims.window);
  for (std::size_t j = 0; j < dims.window; ++j)
    window[j] = 0.5 - 0.5 * std::cos(2 * M_PI * double(j) / double(dims.window));
  std::vector<cplx> spec((dims.window / 2 + 1) * dims.frames);
  std::vector<double> frames(dims.window * dims.frames);
  for (auto _ : state) {
    k::stft_frames(P, padded, window, dims, spec);
    k::istft_frames(P, spec, window, dims, frames);
    benchmark::DoNotOptimize(frames.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(dims.frames));
}

}  // namespace

BENCHMARK(nmf_iteration<ExecPolicy::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(nmf_iteration<ExecPolicy::parallel>)->Unit(benchmark::kMillisecond);
BENCHMARK(fusion<ExecPolicy::serial>)->Unit(benchmark::kMicrosecond);
BENCHMARK(fusion<ExecPolicy::parallel>)->Unit(benchmark::kMicrosecond);
BENCHMARK(stft<ExecPolicy::serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(stft<ExecPolicy::parallel>)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
