#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mortjump {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitStatistical = 1, kExitUsage = 2 };

struct CliEnvironment {
    std::optional<std::uint64_t> seed;  // MORTJUMP_SEED, overrides --seed
};

/// Parses MORTJUMP_SEED from the process environment.
CliEnvironment environment_from_process();

/// Runs one `mortjump` command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliEnvironment& env = {});

}  // namespace mortjump
