#pragma once

#include <string>
#include <vector>

namespace fgmgt {

// Entry point behind the fgmgt binary; args excludes the program name.
// Returns the process exit code: 0 success, 1 runtime failure, 2
// configuration error (including command-line parse failures).
int run_cli(const std::vector<std::string>& args);

}  // namespace fgmgt
