#pragma once

#include <iosfwd>

namespace fscp::harness {

/// Subcommands synth, run, compare and validate-coverage.
///
/// Exit codes: 0 success, 1 runtime error or a failed coverage check,
/// 2 usage error (including no arguments).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fscp::harness
