#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace muplab {

/// Entry point of the `muplab` tool. Subcommands: train, sweep, infwidth,
/// check-activation, check-dataset, plot. Returns 0 on success, 1 on invalid
/// input (including failed checks and usage errors), 2 on runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace muplab
