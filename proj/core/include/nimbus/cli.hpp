#pragma once

namespace nimbus {

/// Entry point of the `nimbus` tool, exposed so tests can drive subcommands
/// in-process. Returns the process exit code: 0 success, 1 usage error,
/// 2 data/validation error, 3 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace nimbus
