#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trust {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point for the `trust` tool. Subcommands: gen-synth, pseudolabel,
/// weights, train, eval, ablate, validate. Results go to `out` as JSON;
/// failures print a JSON object {"error", "message"} to `err`.
/// Returns 0 on success, 1 on I/O or validation failure, 2 on bad usage.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Same as above; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trust
