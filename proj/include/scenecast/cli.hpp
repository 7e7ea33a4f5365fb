#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scenecast {

/// Runs one subcommand. Returns 0 on success, 1 on a stage failure and 2 on
/// a usage error.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_run(int argc, const char* const* argv);

}  // namespace scenecast
