#include "depse/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "depse/wire.hpp"

namespace depse {

namespace {

// Object view that rejects keys outside its schema and reports the JSON path
// of every type error.
class Section {
 public:
  Section(const json& j, std::string path, std::initializer_list<const char*> keys)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items())
      if (!allowed.count(k)) throw ConfigError(path_ + ": unknown key '" + k + "'");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string where(const char* key) const { return path_ + "." + key; }

  double number(const char* key, double def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    return v.get<double>();
  }
  std::size_t count(const char* key, std::size_t def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError(where(key) + ": expected a nonnegative integer");
    return v.get<std::size_t>();
  }
  std::uint64_t u64(const char* key, std::uint64_t def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<long long>() < 0))
      throw ConfigError(where(key) + ": expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::string string(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const char* key) const {
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) throw ConfigError(where(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<std::string> strings(const char* key) const {
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of strings");
    std::vector<std::string> out;
    for (const json& e : v) {
      if (!e.is_string()) throw ConfigError(where(key) + ": expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

json empty_object() { return json::object(); }

cplx parse_mean(const json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError(where + ": expected a number or [re, im]");
}

ScalarGaussian parse_scalar_gaussian(const json& j, const std::string& path) {
  Section s(j, path, {"mean", "variance"});
  ScalarGaussian g;
  if (s.has("mean")) g.mean = parse_mean(s.at("mean"), s.where("mean"));
  g.variance = s.number("variance", 1.0);
  if (!(g.variance >= 0.0)) throw ConfigError(s.where("variance") + ": must be >= 0");
  return g;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

ScoreConfig parse_score(const json& j, const std::filesystem::path& base) {
  Section s(j, "score", {"kind", "params", "endpoint"});
  ScoreConfig c;
  c.kind = s.string("kind", "gaussian");
  const json params = s.has("params") ? s.at("params") : empty_object();
  if (c.kind == "gaussian") {
    c.gaussian = parse_scalar_gaussian(params, "score.params");
  } else if (c.kind == "gmm") {
    Section p(params, "score.params", {"weights", "components"});
    if (!p.has("weights") || !p.has("components"))
      throw ConfigError("score.params: gmm needs weights and components");
    c.gmm_weights = p.numbers("weights");
    const json& comps = p.at("components");
    if (!comps.is_array()) throw ConfigError("score.params.components: expected an array");
    for (std::size_t m = 0; m < comps.size(); ++m)
      c.gmm_components.push_back(
          parse_scalar_gaussian(comps[m], "score.params.components[" + std::to_string(m) + "]"));
    if (c.gmm_components.empty() || c.gmm_components.size() != c.gmm_weights.size())
      throw ConfigError("score.params: weights and components must be non-empty and equal in length");
    double total = 0.0;
    for (double w : c.gmm_weights) {
      if (!(w >= 0.0)) throw ConfigError("score.params.weights: must be >= 0");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("score.params.weights: must sum to 1");
  } else if (c.kind == "linear") {
    Section p(params, "score.params", {"path"});
    if (!p.has("path")) throw ConfigError("score.params.path: required for linear scores");
    c.linear_path = resolve(base, p.string("path", ""));
  } else if (c.kind == "echo") {
    Section p(params, "score.params", {});
  } else if (c.kind == "external") {
    if (!s.has("endpoint")) throw ConfigError("score.endpoint: required for external scores");
    Section e(s.at("endpoint"), "score.endpoint", {"command", "host", "port", "timeout_ms"});
    if (e.has("command")) c.command = e.strings("command");
    c.host = e.string("host", "");
    const std::size_t port = e.count("port", 0);
    if (port > 65535) throw ConfigError("score.endpoint.port: out of range");
    c.port = static_cast<std::uint16_t>(port);
    c.timeout_ms = static_cast<int>(e.count("timeout_ms", 10000));
    if (c.command.empty() == c.host.empty())
      throw ConfigError("score.endpoint: give exactly one of command or host/port");
    if (!c.host.empty() && c.port == 0) throw ConfigError("score.endpoint.port: required with host");
  } else {
    throw ConfigError("score.kind: unknown kind '" + c.kind +
                      "' (gaussian|gmm|linear|echo|external)");
  }
  if (c.kind != "external" && s.has("endpoint"))
    throw ConfigError("score.endpoint: only valid for external scores");
  return c;
}

}  // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base) {
  Section root(doc, "config", {"sde", "sampler", "nmf", "stft", "score", "io", "simulate", "oracle"});
  RunConfig cfg;
  cfg.source = doc;

  {
    const json j = root.has("sde") ? root.at("sde") : empty_object();
    Section s(j, "sde", {"gamma", "sigma_min", "sigma_max", "t_eps", "T", "N"});
    cfg.sde.gamma = s.number("gamma", cfg.sde.gamma);
    cfg.sde.sigma_min = s.number("sigma_min", cfg.sde.sigma_min);
    cfg.sde.sigma_max = s.number("sigma_max", cfg.sde.sigma_max);
    cfg.sde.t_eps = s.number("t_eps", cfg.sde.t_eps);
    cfg.sde.t_max = s.number("T", cfg.sde.t_max);
    cfg.sde.steps = s.count("N", cfg.sde.steps);
    cfg.sde.validate();
  }
  {
    const json j = root.has("sampler") ? root.at("sampler") : empty_object();
    Section s(j, "sampler",
              {"method", "r", "lambda_even", "lambda", "corrector_steps", "seed", "kernels"});
    cfg.sampler.method = parse_method(s.string("method", "depse_tl"));
    cfg.sampler.r = s.number("r", cfg.sampler.r);
    cfg.sampler.lambda_even = s.number("lambda_even", cfg.sampler.lambda_even);
    if (s.has("lambda")) cfg.sampler.lambda = s.numbers("lambda");
    cfg.sampler.corrector_steps = s.count("corrector_steps", 1);
    cfg.sampler.seed = s.u64("seed", 0);
    cfg.sampler.kernels = parse_exec_policy(s.string("kernels", "serial"));
    cfg.sampler.validate(cfg.sde.steps);
    if (s.has("lambda") && cfg.sampler.method != Method::guided)
      throw ConfigError("sampler.lambda: only the guided method uses a lambda schedule");
  }
  {
    const json j = root.has("nmf") ? root.at("nmf") : empty_object();
    Section s(j, "nmf", {"rank", "iters_per_step", "fixed_variance"});
    cfg.noise.nmf.rank = s.count("rank", 4);
    cfg.noise.nmf.iters_per_step = s.count("iters_per_step", 2);
    if (s.has("fixed_variance")) {
      const double v = s.number("fixed_variance", 0.0);
      if (!(v >= 0.0)) throw ConfigError("nmf.fixed_variance: must be >= 0");
      cfg.noise.fixed_variance = v;
    }
    cfg.noise.nmf.validate();
  }
  {
    const json j = root.has("stft") ? root.at("stft") : empty_object();
    Section s(j, "stft", {"window", "hop", "compression"});
    cfg.stft.window = s.count("window", 510);
    cfg.stft.hop = s.count("hop", 127);
    if (s.has("compression")) {
      Section c(s.at("compression"), "stft.compression", {"alpha", "beta"});
      cfg.stft.compression = Compression{c.number("alpha", 0.5), c.number("beta", 0.15)};
    }
    cfg.stft.validate();
  }
  if (root.has("score")) {
    cfg.score = parse_score(root.at("score"), base);
    cfg.has_score = true;
    if (cfg.score.kind == "linear") {
      // Catch grid or bin-count mismatches before any file is processed.
      const LinearScoreModel m = load_linear_model(cfg.score.linear_path);
      const DiffusionSchedule schedule(cfg.sde);
      if (m.num_times() != schedule.tau().size())
        throw ConfigError("score.params.path: linear model has " + std::to_string(m.num_times()) +
                          " grid times, schedule has " + std::to_string(schedule.tau().size()));
      for (std::size_t i = 0; i < m.num_times(); ++i)
        if (std::abs(m.tau()[i] - schedule.tau(i)) > 1e-9)
          throw ConfigError("score.params.path: linear model grid differs from the sde grid");
    }
  }
  {
    const json j = root.has("io") ? root.at("io") : empty_object();
    Section s(j, "io", {"input", "output", "report", "output_format", "triples"});
    if (s.has("input")) {
      const json& in = s.at("input");
      if (in.is_string()) {
        cfg.io.inputs.push_back(resolve(base, in.get<std::string>()));
      } else {
        for (const std::string& p : s.strings("input")) cfg.io.inputs.push_back(resolve(base, p));
      }
    }
    if (s.has("output")) cfg.io.output = resolve(base, s.string("output", ""));
    if (s.has("report")) cfg.io.report = resolve(base, s.string("report", ""));
    cfg.io.output_format = parse_sample_format(s.string("output_format", "float32"));
    if (s.has("triples")) {
      const json& arr = s.at("triples");
      if (!arr.is_array()) throw ConfigError("io.triples: expected an array");
      for (std::size_t k = 0; k < arr.size(); ++k) {
        Section t(arr[k], "io.triples[" + std::to_string(k) + "]", {"ref", "noise", "est"});
        if (!t.has("ref") || !t.has("noise") || !t.has("est"))
          throw ConfigError(t.where("ref") + ": each triple needs ref, noise and est");
        cfg.io.triples.push_back({resolve(base, t.string("ref", "")),
                                  resolve(base, t.string("noise", "")),
                                  resolve(base, t.string("est", ""))});
      }
    }
  }
  {
    const json j = root.has("simulate") ? root.at("simulate") : empty_object();
    Section s(j, "simulate", {"scenario", "snrs_db", "trials", "freqs", "frames", "components",
                              "runs", "noise_variance", "methods"});
    auto& sim = cfg.simulate;
    sim.scenario = s.string("scenario", "gmm");
    if (sim.scenario != "gmm" && sim.scenario != "gaussian")
      throw ConfigError("simulate.scenario: expected gmm or gaussian");
    if (s.has("snrs_db")) sim.snrs_db = s.numbers("snrs_db");
    for (double snr : sim.snrs_db)
      if (!std::isfinite(snr)) throw ConfigError("simulate.snrs_db: entries must be finite");
    sim.trials = s.count("trials", 0);
    sim.freqs = s.count("freqs", 4);
    sim.frames = s.count("frames", sim.scenario == "gaussian" ? 4 : 32);
    sim.components = s.count("components", 3);
    sim.runs = s.count("runs", 2000);
    sim.noise_variance = s.number("noise_variance", 0.5);
    if (s.has("methods")) {
      sim.methods.clear();
      for (const std::string& m : s.strings("methods")) sim.methods.push_back(parse_method(m));
    }
    if (sim.trials > 0 && sim.snrs_db.empty() && sim.scenario == "gmm")
      throw ConfigError("simulate.snrs_db: at least one SNR is needed");
    if (sim.freqs == 0 || sim.frames < 2 || sim.components == 0 || sim.runs < 2)
      throw ConfigError("simulate: freqs >= 1, frames >= 2, components >= 1, runs >= 2");
    if (!(sim.noise_variance > 0.0)) throw ConfigError("simulate.noise_variance: must be > 0");
  }
  {
    const json j = root.has("oracle") ? root.at("oracle") : empty_object();
    Section s(j, "oracle", {"sigma_perturbation"});
    cfg.oracle.sigma_perturbation = s.number("sigma_perturbation", 0.0);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

std::unique_ptr<ScoreModel> make_score_model(const ScoreConfig& cfg, Shape shape,
                                             const DiffusionSchedule& schedule) {
  const auto broadcast = [&](const ScalarGaussian& g) {
    return GaussianPrior{Spectrogram(shape, g.mean), RealField(shape, g.variance)};
  };
  if (cfg.kind == "gaussian")
    return std::make_unique<GaussianScore>(broadcast(cfg.gaussian), schedule);
  if (cfg.kind == "gmm") {
    GmmPrior prior;
    prior.weights = cfg.gmm_weights;
    for (const auto& c : cfg.gmm_components) prior.components.push_back(broadcast(c));
    return std::make_unique<GmmScore>(std::move(prior), schedule);
  }
  if (cfg.kind == "echo") return std::make_unique<EchoScore>(shape);
  if (cfg.kind == "linear") {
    auto m = std::make_unique<LinearScoreModel>(load_linear_model(cfg.linear_path));
    require_same_shape(m->shape(), shape, "linear score model vs input");
    return m;
  }
  if (cfg.kind == "external") {
    wire::Connection conn = cfg.command.empty()
                                ? wire::Connection::tcp(cfg.host, cfg.port, cfg.timeout_ms)
                                : wire::Connection::spawn(cfg.command, cfg.timeout_ms);
    return std::make_unique<wire::ExternalScore>(std::move(conn), shape);
  }
  throw ConfigError("unknown score kind '" + cfg.kind + "'");
}

LinearScoreModel load_linear_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read linear score model " + path.string());
  json j;
  try {
    j = json::parse(in);
    const Shape shape{j.at("freqs").get<std::size_t>(), j.at("frames").get<std::size_t>()};
    LinearScoreModel m(shape, j.at("tau").get<std::vector<double>>());
    const auto& slope = j.at("slope");
    const auto& re = j.at("offset_re");
    const auto& im = j.at("offset_im");
    if (slope.size() != m.num_times() || re.size() != m.num_times() || im.size() != m.num_times())
      throw ConfigError(path.string() + ": one slope/offset field per grid time is required");
    for (std::size_t i = 0; i < m.num_times(); ++i) {
      const auto a = slope[i].get<std::vector<double>>();
      const auto br = re[i].get<std::vector<double>>();
      const auto bi = im[i].get<std::vector<double>>();
      if (a.size() != shape.size() || br.size() != shape.size() || bi.size() != shape.size())
        throw ConfigError(path.string() + ": field length differs from freqs*frames");
      for (std::size_t k = 0; k < shape.size(); ++k) {
        m.slope(i)[k] = a[k];
        m.offset(i)[k] = {br[k], bi[k]};
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": malformed linear score model: " + e.what());
  }
}

void save_linear_model(const std::filesystem::path& path, const LinearScoreModel& m) {
  json j;
  j["freqs"] = m.shape().freqs;
  j["frames"] = m.shape().frames;
  j["tau"] = std::vector<double>(m.tau().begin(), m.tau().end());
  j["slope"] = json::array();
  j["offset_re"] = json::array();
  j["offset_im"] = json::array();
  for (std::size_t i = 0; i < m.num_times(); ++i) {
    j["slope"].push_back(m.slope(i).storage());
    std::vector<double> re, im;
    for (const cplx& b : m.offset(i)) {
      re.push_back(b.real());
      im.push_back(b.imag());
    }
    j["offset_re"].push_back(re);
    j["offset_im"].push_back(im);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

}  // namespace depse
