#include <CLI11.hpp>

#include <iostream>

#include "depse/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Posterior-transition diffusion denoiser"};
  app.set_version_flag("--version", std::string(depse::version()));

  std::string command;
  std::string config;
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  app.add_option("command", command, "enhance | simulate | evaluate | oracle-check")
      ->required()
      ->check(CLI::IsMember({"enhance", "simulate", "evaluate", "oracle-check"}));
  app.add_option("--config", config, "JSON run configuration")->required();
  app.add_option("--jobs", jobs, "utterances processed in parallel")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "overrides sampler.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return depse::kExitConfig;
  }

  depse::AppOptions opt;
  opt.jobs = jobs;
  if (*seed_opt) opt.seed = seed;
  return depse::run_command(command, config, opt, std::cout, std::cerr);
}
