#include "depse/app.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "depse/metrics.hpp"
#include "depse/oracle.hpp"
#include "depse/synthetic.hpp"

#ifndef DEPSE_VERSION
#define DEPSE_VERSION "unknown"
#endif

namespace depse {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t base_seed(const RunConfig& cfg, const AppOptions& opt) {
  return opt.seed.value_or(cfg.sampler.seed);
}

int thread_count(const AppOptions& opt) { return static_cast<int>(std::max<std::size_t>(1, opt.jobs)); }

json scores_json(const BssScores& s) {
  return {{"si_sdr", s.si_sdr}, {"si_sir", s.si_sir}, {"si_sar", s.si_sar}};
}

json header(std::string_view command, const RunConfig& cfg, const AppOptions& opt) {
  return {{"version", std::string(version())},
          {"command", std::string(command)},
          {"seed", base_seed(cfg, opt)},
          {"config", cfg.source}};
}

NoiseSpec noise_spec(const RunConfig& cfg, Shape shape) {
  NoiseSpec ns;
  ns.nmf = cfg.noise.nmf;
  if (cfg.noise.fixed_variance) ns.fixed_variance = RealField(shape, *cfg.noise.fixed_variance);
  return ns;
}

}  // namespace

std::string_view version() { return DEPSE_VERSION; }

int cmd_enhance(const RunConfig& cfg, const AppOptions& opt, json& report, std::ostream& log) {
  if (!cfg.has_score) throw ConfigError("enhance: a score section is required");
  if (!cfg.io.inputs.empty() && cfg.io.output.empty())
    throw ConfigError("io.output: enhance needs an output directory");
  const DiffusionSchedule schedule(cfg.sde);
  const std::uint64_t seed = base_seed(cfg, opt);
  if (!cfg.io.output.empty()) std::filesystem::create_directories(cfg.io.output);

  const std::size_t n = cfg.io.inputs.size();
  std::vector<json> rows(n);
  std::vector<double> timings(n, 0.0);
  std::vector<std::string> errors(n);
  const auto policy = cfg.sampler.kernels;

#pragma omp parallel for schedule(dynamic) num_threads(thread_count(opt))
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    const auto start = Clock::now();
    const auto& in = cfg.io.inputs[idx];
    json row = {{"input", in.string()}};
    try {
      const Waveform w = read_wav(in);
      Spectrogram spec = stft(w, cfg.stft, policy);
      if (cfg.stft.compression) spec = compress(spec, *cfg.stft.compression);
      const auto model = make_score_model(cfg.score, spec.shape(), schedule);
      Rng rng = derive_stream(seed, idx);
      EnhanceResult res = enhance(spec, cfg.sampler, *model, schedule,
                                  noise_spec(cfg, spec.shape()), rng);
      if (cfg.stft.compression) res.estimate = decompress(res.estimate, *cfg.stft.compression);
      Waveform out = istft(res.estimate, w.size(), cfg.stft, policy);
      const auto dest = cfg.io.output / in.filename();
      write_wav(dest, out, cfg.io.output_format);
      double vmean = 0.0;
      for (double v : res.noise_variance) vmean += v;
      vmean /= static_cast<double>(res.noise_variance.size());
      row["output"] = dest.string();
      row["status"] = "ok";
      row["samples"] = w.size();
      row["frames"] = spec.frames();
      row["mean_noise_variance"] = vmean;
    } catch (const std::exception& e) {
      row["status"] = "error";
      row["error"] = e.what();
      errors[idx] = e.what();
    }
    rows[idx] = std::move(row);
    timings[idx] = seconds_since(start);
  }

  int failures = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (!errors[k].empty()) {
      ++failures;
      log << "enhance: " << cfg.io.inputs[k].string() << ": " << errors[k] << '\n';
    }
  report["method"] = std::string(to_string(cfg.sampler.method));
  report["utterances"] = rows;
  report["failures"] = failures;
  report["timings"] = {{"per_utterance_s", timings}};
  return failures ? kExitFailure : kExitOk;
}

namespace {

json simulate_gmm(const RunConfig& cfg, std::uint64_t seed, int threads, int& failures) {
  const auto& sim = cfg.simulate;
  const DiffusionSchedule schedule(cfg.sde);
  StftConfig plain = cfg.stft;
  plain.compression.reset();
  std::vector<json> rows(sim.trials);

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(sim.trials); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    const double snr = sim.snrs_db[idx % sim.snrs_db.size()];
    json row = {{"trial", idx}, {"snr_db", snr}};
    try {
      Rng rng = derive_stream(seed, 2 * idx);
      const SyntheticTrial t = draw_gmm_trial(sim.frames, sim.components, snr, plain, rng);
      const GmmScore model(t.prior, schedule);
      const BssScores in = bss_eval(t.clean.samples, t.noise.samples, t.mixture.samples);
      row["input"] = scores_json(in);
      Rng mrng = derive_stream(seed, 2 * idx + 1);
      for (Method m : sim.methods) {
        SamplerConfig sc = cfg.sampler;
        sc.method = m;
        sc.lambda.clear();
        const EnhanceResult res =
            enhance(t.noisy_spec, sc, model, schedule, noise_spec(cfg, t.noisy_spec.shape()), mrng);
        const Waveform est = istft(res.estimate, t.clean.size(), plain);
        const BssScores out = bss_eval(t.clean.samples, t.noise.samples, est.samples);
        json r = scores_json(out);
        r["delta_si_sdr"] = out.si_sdr - in.si_sdr;
        row[std::string(to_string(m))] = r;
      }
      row["status"] = "ok";
    } catch (const std::exception& e) {
      row["status"] = "error";
      row["error"] = e.what();
    }
    rows[idx] = std::move(row);
  }

  json summary = json::object();
  for (Method m : sim.methods) {
    const std::string key(to_string(m));
    double delta = 0.0;
    std::size_t improved = 0, count = 0;
    for (const json& r : rows) {
      if (r["status"] != "ok") continue;
      ++count;
      delta += r[key]["delta_si_sdr"].get<double>();
      if (r[key]["si_sdr"].get<double>() > r["input"]["si_sdr"].get<double>()) ++improved;
    }
    summary[key] = {{"trials", count},
                    {"mean_delta_si_sdr", count ? delta / static_cast<double>(count) : 0.0},
                    {"improved_fraction",
                     count ? static_cast<double>(improved) / static_cast<double>(count) : 0.0}};
  }
  for (const json& r : rows)
    if (r["status"] != "ok") ++failures;
  return {{"trials", rows}, {"summary", summary}};
}

json simulate_gaussian(const RunConfig& cfg, std::uint64_t seed, int threads, int& failures) {
  const auto& sim = cfg.simulate;
  const DiffusionSchedule schedule(cfg.sde);
  const Shape shape{sim.freqs, sim.frames};
  std::vector<json> rows(sim.trials);

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(sim.trials); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    json row = {{"trial", idx}};
    try {
      Rng rng = derive_stream(seed, 2 * idx);
      const GaussianPrior prior = random_gaussian_prior(shape, rng);
      const RealField v(shape, sim.noise_variance);
      Spectrogram x(shape);
      for (std::size_t k = 0; k < x.size(); ++k)
        x[k] = prior.mean[k] + std::sqrt(prior.variance[k]) * rng.complex_normal() +
               std::sqrt(sim.noise_variance) * rng.complex_normal();
      const GaussianPosterior post = gaussian_posterior(prior, x, v);
      const GaussianScore model(prior, schedule);
      NoiseSpec ns;
      ns.fixed_variance = v;
      Rng mrng = derive_stream(seed, 2 * idx + 1);
      for (Method m : sim.methods) {
        SamplerConfig sc = cfg.sampler;
        sc.method = m;
        sc.lambda.clear();
        std::vector<double> sum(2 * x.size(), 0.0), sq(2 * x.size(), 0.0);
        for (std::size_t run = 0; run < sim.runs; ++run) {
          const Spectrogram s = enhance(x, sc, model, schedule, ns, mrng).estimate;
          for (std::size_t k = 0; k < s.size(); ++k) {
            sum[2 * k] += s[k].real();
            sum[2 * k + 1] += s[k].imag();
            sq[2 * k] += s[k].real() * s[k].real();
            sq[2 * k + 1] += s[k].imag() * s[k].imag();
          }
        }
        const auto runs = static_cast<double>(sim.runs);
        double max_z = 0.0, max_err = 0.0;
        std::size_t within = 0;
        for (std::size_t c = 0; c < sum.size(); ++c) {
          const double mean = sum[c] / runs;
          const double var = (sq[c] - runs * mean * mean) / (runs - 1.0);
          const cplx target = post.mean[c / 2];
          const double truth = c % 2 == 0 ? target.real() : target.imag();
          const double z = std::abs(mean - truth) / std::sqrt(std::max(var, 1e-300) / runs);
          max_z = std::max(max_z, z);
          max_err = std::max(max_err, std::abs(mean - truth));
          if (z <= 4.0) ++within;
        }
        row[std::string(to_string(m))] = {
            {"max_abs_error", max_err},
            {"max_z", max_z},
            {"fraction_within_4se", static_cast<double>(within) / static_cast<double>(sum.size())}};
      }
      row["status"] = "ok";
    } catch (const std::exception& e) {
      row["status"] = "error";
      row["error"] = e.what();
    }
    rows[idx] = std::move(row);
  }
  for (const json& r : rows)
    if (r["status"] != "ok") ++failures;
  return {{"trials", rows}};
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, const AppOptions& opt, json& report, std::ostream& log) {
  const auto start = Clock::now();
  int failures = 0;
  const std::uint64_t seed = base_seed(cfg, opt);
  report["scenario"] = cfg.simulate.scenario;
  json body = cfg.simulate.scenario == "gaussian"
                  ? simulate_gaussian(cfg, seed, thread_count(opt), failures)
                  : simulate_gmm(cfg, seed, thread_count(opt), failures);
  for (auto& [k, v] : body.items()) report[k] = v;
  report["failures"] = failures;
  report["timings"] = {{"total_s", seconds_since(start)}};
  if (failures) log << "simulate: " << failures << " trial(s) failed\n";
  return failures ? kExitFailure : kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const AppOptions& opt, json& report, std::ostream& log) {
  const auto start = Clock::now();
  const std::size_t n = cfg.io.triples.size();
  std::vector<json> rows(n);

#pragma omp parallel for schedule(dynamic) num_threads(thread_count(opt))
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n); ++j) {
    const Triple& t = cfg.io.triples[static_cast<std::size_t>(j)];
    json row = {{"ref", t.ref.string()}, {"noise", t.noise.string()}, {"est", t.est.string()}};
    try {
      const Waveform ref = read_wav(t.ref), noise = read_wav(t.noise), est = read_wav(t.est);
      const BssScores s = bss_eval(ref.samples, noise.samples, est.samples);
      row.update(scores_json(s));
      row["status"] = "ok";
    } catch (const std::exception& e) {
      row["status"] = "error";
      row["error"] = e.what();
    }
    rows[static_cast<std::size_t>(j)] = std::move(row);
  }

  int failures = 0;
  log << std::left << std::setw(40) << "est" << std::right << std::setw(10) << "SI-SDR"
      << std::setw(10) << "SI-SIR" << std::setw(10) << "SI-SAR" << '\n';
  for (const json& r : rows) {
    log << std::left << std::setw(40) << std::filesystem::path(r["est"].get<std::string>()).filename().string();
    if (r["status"] == "ok") {
      log << std::right << std::fixed << std::setprecision(2) << std::setw(10)
          << r["si_sdr"].get<double>() << std::setw(10) << r["si_sir"].get<double>()
          << std::setw(10) << r["si_sar"].get<double>() << '\n';
    } else {
      ++failures;
      log << "  error: " << r["error"].get<std::string>() << '\n';
    }
  }
  report["rows"] = rows;
  report["failures"] = failures;
  report["timings"] = {{"total_s", seconds_since(start)}};
  return failures ? kExitFailure : kExitOk;
}

int cmd_oracle_check(const RunConfig& cfg, const AppOptions& opt, json& report,
                     std::ostream& log) {
  const auto start = Clock::now();
  const auto checks =
      run_oracle_checks(cfg.sde, {cfg.oracle.sigma_perturbation, base_seed(cfg, opt)});
  json rows = json::array();
  int failures = 0;
  for (const CheckResult& c : checks) {
    rows.push_back({{"name", c.name}, {"residual", c.residual}, {"threshold", c.threshold},
                    {"passed", c.passed}});
    log << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.name
        << " residual=" << std::scientific << std::setprecision(3) << c.residual
        << " threshold=" << c.threshold << '\n';
    if (!c.passed) ++failures;
  }
  report["checks"] = rows;
  report["failures"] = failures;
  report["timings"] = {{"total_s", seconds_since(start)}};
  return failures ? kExitFailure : kExitOk;
}

int run_command(std::string_view command, const std::filesystem::path& config_path,
                const AppOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    if (opt.jobs == 0) throw ConfigError("--jobs must be >= 1");
    const RunConfig cfg = load_config(config_path);
    json report = header(command, cfg, opt);
    int code;
    if (command == "enhance") code = cmd_enhance(cfg, opt, report, out);
    else if (command == "simulate") code = cmd_simulate(cfg, opt, report, out);
    else if (command == "evaluate") code = cmd_evaluate(cfg, opt, report, out);
    else if (command == "oracle-check") code = cmd_oracle_check(cfg, opt, report, out);
    else throw ConfigError("unknown command '" + std::string(command) + "'");

    if (!cfg.io.report.empty()) {
      if (cfg.io.report.has_parent_path())
        std::filesystem::create_directories(cfg.io.report.parent_path());
      std::ofstream f(cfg.io.report);
      if (!f) throw IoError("cannot write report " + cfg.io.report.string());
      f << report.dump(2) << '\n';
    } else {
      out << report.dump(2) << '\n';
    }
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace depse
