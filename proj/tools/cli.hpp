#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gridmine::cli
{
/// Entry point of the `gridmine` tool. `args` excludes the program name.
/// Returns the process exit code.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flag, then file, then GRIDMINE_SEED, then 42.
std::uint64_t ResolveSeed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> file);

}  // namespace gridmine::cli
