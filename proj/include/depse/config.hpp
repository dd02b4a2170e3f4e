#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "depse/nmf.hpp"
#include "depse/samplers.hpp"
#include "depse/schedule.hpp"
#include "depse/score.hpp"
#include "depse/signal.hpp"

namespace depse {

using json = nlohmann::json;

/// Scalar broadcast prior: the same complex mean and variance in every bin.
struct ScalarGaussian {
  cplx mean{};
  double variance = 1.0;
};

struct ScoreConfig {
  std::string kind = "gaussian";  // gaussian | gmm | linear | echo | external
  ScalarGaussian gaussian;
  std::vector<double> gmm_weights;
  std::vector<ScalarGaussian> gmm_components;
  std::filesystem::path linear_path;
  std::vector<std::string> command;  // external: spawn
  std::string host;                  // external: TCP
  std::uint16_t port = 0;
  int timeout_ms = 10000;
};

struct NoiseConfig {
  NmfConfig nmf;
  std::optional<double> fixed_variance;  // disables NMF when set
};

struct Triple {
  std::filesystem::path ref, noise, est;
};

struct IoConfig {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output;
  std::filesystem::path report;
  SampleFormat output_format = SampleFormat::float32;
  std::vector<Triple> triples;
};

struct SimulateConfig {
  std::string scenario = "gmm";  // gaussian | gmm
  std::vector<double> snrs_db{-5.0, 0.0, 5.0};
  std::size_t trials = 0;
  std::size_t freqs = 4;   // gaussian scenario grid
  std::size_t frames = 32;  // 4 for the gaussian scenario
  std::size_t components = 3;
  std::size_t runs = 2000;  // gaussian scenario: independent chains per method
  double noise_variance = 0.5;
  std::vector<Method> methods{Method::depse_il, Method::depse_tl};
};

struct OracleConfig {
  double sigma_perturbation = 0.0;
};

struct RunConfig {
  SdeParams sde;
  SamplerConfig sampler;
  NoiseConfig noise;
  StftConfig stft;
  ScoreConfig score;
  bool has_score = false;
  IoConfig io;
  SimulateConfig simulate;
  OracleConfig oracle;
  json source;  // the document as read, echoed into reports
};

/// Parses and validates a config document; unknown keys, wrong types and
/// impossible combinations raise ConfigError. Relative paths resolve against
/// `base_dir`.
RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Builds the configured score model for spectrograms of the given shape.
std::unique_ptr<ScoreModel> make_score_model(const ScoreConfig& cfg, Shape shape,
                                             const DiffusionSchedule& schedule);

/// Linear score models on disk: {"freqs", "frames", "tau", "slope", "offset_re", "offset_im"}
/// with one flattened row-major field per grid time.
LinearScoreModel load_linear_model(const std::filesystem::path& path);
void save_linear_model(const std::filesystem::path& path, const LinearScoreModel& model);

}  // namespace depse
