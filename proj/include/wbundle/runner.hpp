#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wb {

/// Subcommands understood by run_command.
const std::vector<std::string>& command_names();

/// Runs one subcommand on a JSON configuration. The report carries the command,
/// the completed configuration, a hash of the configuration and every input file,
/// the result and a pass flag with the failed checks. Deterministic for a fixed
/// configuration; `threads` only schedules independent tasks.
/// Throws InvalidArgument for an unknown command or bad configuration.
nlohmann::json run_command(const std::string& command, const nlohmann::json& config, int threads = 1);

/// FNV-1a, 64 bit.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 14695981039346656037ull);

}  // namespace wb
