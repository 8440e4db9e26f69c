#pragma once

namespace hvis::cli {

// Full command-line entry point: parses argv, dispatches the subcommand and
// maps exceptions to exit codes (0 ok, 2 parameter/config, 3 data/format,
// 4 training divergence). Usable in-process by tests.
int run(int argc, const char* const* argv);

}  // namespace hvis::cli
