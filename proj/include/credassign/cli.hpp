#pragma once

#include <string>
#include <vector>

namespace credassign {

/// Entry point behind the command-line tool, callable in-process by tests.
/// Subcommands: train, grid, eval, angle, sign, cka, channels, exemplars,
/// bench-backward. Every run writes manifest.json (the resolved config) into
/// its --out directory.
///
/// Exit codes: 0 success; 2 bad usage; 3 I/O failure (missing paths);
/// 4 malformed file; 5 bad configuration value; 6 empty sample subset;
/// 7 internal shape/state error; 8 numeric failure (diverged run);
/// 1 anything else.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args); // args without argv[0]

} // namespace credassign
