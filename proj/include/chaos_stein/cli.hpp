#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chaos_stein::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;      // usage, IO or evaluation error
inline constexpr int kExitViolation = 2;  // a checked bound or invariant failed

/// Runs one subcommand; args excludes the program name. Results go to `out`
/// unless --output names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chaos_stein::cli
