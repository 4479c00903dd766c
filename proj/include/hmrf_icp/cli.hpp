#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hmrf_icp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRegistrationFailure = 1;
inline constexpr int kExitUsage = 2;

/// Subcommands: register, synth, benchmark, eval. `args` excludes the
/// program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace hmrf_icp
