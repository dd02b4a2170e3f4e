#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>

#include "depse/config.hpp"

namespace depse {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

struct AppOptions {
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;  // overrides sampler.seed
};

/// Library version, `git describe` of the source tree at configure time.
std::string_view version();

/// Each command fills `report` and returns an exit code. Per-item failures are
/// recorded in the report and turn the exit code to 1; config errors throw.
int cmd_enhance(const RunConfig& cfg, const AppOptions& opt, json& report, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, const AppOptions& opt, json& report, std::ostream& log);
int cmd_evaluate(const RunConfig& cfg, const AppOptions& opt, json& report, std::ostream& log);
int cmd_oracle_check(const RunConfig& cfg, const AppOptions& opt, json& report,
                     std::ostream& log);

/// Loads the config, runs the command, writes io.report when configured and
/// maps exceptions to exit codes (ConfigError -> 2, anything else -> 1).
int run_command(std::string_view command, const std::filesystem::path& config,
                const AppOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace depse
