#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kinemesh {

// Runs one CLI invocation; args excludes the program name. Returns 0 on
// success, 1 on a runtime error ("error: <code>: <detail>" on err) and 2 on
// bad usage.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kinemesh
