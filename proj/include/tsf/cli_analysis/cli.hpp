#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tsf::cli_analysis {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Dispatches `args` (without the program name) to one subcommand: synth,
/// preprocess, train, eval, loso, analyze-noise, analyze-edges, analyze-routes.
/// Progress goes to `out`; failures produce one "error: ..." line on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsf::cli_analysis
