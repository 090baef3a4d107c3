#pragma once

#include <string>
#include <vector>

namespace rrl {

/// Command-line front end.  Subcommands: run, sweep, validate, oracle, eval.
/// Returns 0 on success, 2 for invalid configs or bad usage, 1 for runtime
/// failures.
int cli_entry(int argc, char** argv);

/// Same entry point for in-process callers; args excludes the program name.
int cli_entry(const std::vector<std::string>& args);

} // namespace rrl
