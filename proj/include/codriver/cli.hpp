#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace codriver::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kViolations = 1;  // validate-dataset found bad records
inline constexpr int kConfigError = 2;
inline constexpr int kAnalyzerFailure = 3;  // analyzer failures exceeded the budget

/// Entry point of the `codriver` tool. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "N..M" (inclusive) or "N".
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

}  // namespace codriver::cli
