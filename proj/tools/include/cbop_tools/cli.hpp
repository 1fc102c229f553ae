#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cbop::cli {

/// Runs the `cbop` command line with `args` (excluding the program name) and
/// returns the process exit code: 0 ok, 2 config, 3 io, 4 divergence, 5 shape.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cbop::cli
