#pragma once

namespace homoglab::cli {

/// Parses argv, runs one subcommand and returns the process exit status:
/// 0 on success, 1 on usage or validation errors, 2 on numerical failure.
int run(int argc, const char* const* argv);

}  // namespace homoglab::cli
