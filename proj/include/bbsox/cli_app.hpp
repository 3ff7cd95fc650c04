#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bbsox {

// Runs one CLI invocation (args exclude the program name).  Returns the
// process exit code: 0 success/certified, 1 not certified, 2 usage or config
// error, 3 numerical failure.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bbsox
